"""Sweep walkthrough: segmentation quality versus superpixel count.

For a handful of synthetic frames, measures how well whole superpixels can
reconstruct the polyp mask (the oracle-overlap experiment) at several
superpixel counts, and emits the SVG chart plus the CSV behind it.

Run:  python demos/04_metric_sweep.py
"""

from pathlib import Path

import numpy as np

from polypseg.config import PipelineConfig
from polypseg.evaluation import sweep, write_reports_csv
from polypseg.svgplot import write_metrics_chart
from polypseg.synth import generate_frame

OUT = Path(__file__).parent / "output"
K_LIST = (9, 25, 64, 144)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(99)
    frames, truths = [], []
    while len(frames) < 6:
        frame, truth, n = generate_frame(rng, size=256)
        if n:  # the oracle question is only posed on frames with polyps
            frames.append(frame)
            truths.append(truth)

    cfg = PipelineConfig(k_list=K_LIST, min_polyp_px=64)
    results = sweep(frames, truths, K_LIST, cfg)

    print(f"{'k':>5} {'sensitivity':>12} {'specificity':>12} {'accuracy':>9} {'precision':>10}")
    for res in results:
        m = res.oracle_pixel
        print(f"{res.k:>5} {m.sensitivity:>12.4f} {m.specificity:>12.4f} {m.accuracy:>9.4f} {m.precision:>10.4f}")

    write_reports_csv(results, OUT / "sweep_demo.csv")
    series = {
        name: [res.oracle_pixel.metric(name) for res in results]
        for name in ("sensitivity", "specificity", "accuracy", "precision")
    }
    errors = {name: [res.oracle_pixel_std.get(name) for res in results] for name in series}
    write_metrics_chart(OUT / "sweep_demo.svg", list(K_LIST), series, errors,
                        title="oracle segmentation quality vs superpixel count")
    print(f"\nwrote {OUT / 'sweep_demo.csv'} and {OUT / 'sweep_demo.svg'}")


if __name__ == "__main__":
    main()
