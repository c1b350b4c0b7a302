"""Superpixel segmentation walkthrough.

Generates one synthetic endoscopy-style frame, segments it at a few
superpixel counts, and writes boundary overlays so you can see how the
regions hug the polyp outline as k grows.

Run:  python demos/01_superpixels.py
Output lands in demos/output/superpixels/.
"""

from pathlib import Path

import numpy as np

from polypseg import RgbFrame, SlicParams, segment, write_frame
from polypseg.synth import generate_frame

OUT = Path(__file__).parent / "output" / "superpixels"


def overlay_boundaries(frame: RgbFrame, labels: np.ndarray) -> RgbFrame:
    px = frame.pixels.copy()
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    px[edge] = (255, 40, 40)
    return RgbFrame(px)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(42)
    frame, truth, n_polyps = generate_frame(rng, size=384)
    while n_polyps == 0:  # keep drawing until the demo frame has a lesion
        frame, truth, n_polyps = generate_frame(rng, size=384)

    write_frame(frame, OUT / "frame.png")
    print(f"frame with {n_polyps} polyp blob(s), {int(truth.mask.sum())} polyp pixels")

    for k in (25, 100, 400):
        lm = segment(frame, SlicParams(k=k))
        write_frame(overlay_boundaries(frame, lm.labels), OUT / f"superpixels_k{k}.png")
        sizes = np.bincount(lm.labels.ravel())
        print(
            f"k={k:>3}: {lm.num_labels} regions, "
            f"sizes {sizes.min()}..{sizes.max()} px -> superpixels_k{k}.png"
        )
    print(f"wrote overlays to {OUT}")


if __name__ == "__main__":
    main()
