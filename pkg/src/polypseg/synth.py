"""Synthetic endoscopy-style frames with exact polyp masks.

The clinical recordings this pipeline was designed around are not
redistributable, so the test harness generates stand-ins: a smooth pinkish
mucosa background with a radial vignette, and zero to two elliptical polyp
blobs with a shifted hue and a bumpier texture. Masks are exact by
construction. Generation is fully driven by one seeded RNG, so the same
(count, seed) always produces byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .evaluation import TruthMask, write_mask
from .imagecore import RgbFrame, write_frame
from .manifest import save_manifest

MIN_POLYP_AREA = 150  # pixels; generated blobs stay well above this

BACKGROUND_RGB = (182, 112, 100)
POLYP_RGB = (224, 178, 130)


def _wave_field(rng, shape, wavelengths, n_waves=3):
    """Sum of randomly oriented sinusoids, normalized to roughly [-1, 1]."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    field = np.zeros(shape)
    for _ in range(n_waves):
        lam = rng.uniform(*wavelengths)
        ang = rng.uniform(0, 2 * math.pi)
        phase = rng.uniform(0, 2 * math.pi)
        field += rng.uniform(0.5, 1.0) * np.sin(
            2 * math.pi * (math.cos(ang) * xx + math.sin(ang) * yy) / lam + phase
        )
    return field / n_waves


def _ellipse_mask(shape, cx, cy, a, b, theta):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    ct, st = math.cos(theta), math.sin(theta)
    u = (dx * ct + dy * st) / a
    v = (-dx * st + dy * ct) / b
    return u * u + v * v <= 1.0


def _polyp_count(rng) -> int:
    r = rng.random()
    if r < 0.45:
        return 0
    if r < 0.80:
        return 1
    return 2


def generate_frame(rng, size: int = 576) -> tuple[RgbFrame, TruthMask, int]:
    """One frame plus its exact mask; returns the number of polyp blobs."""
    if size < 64:
        raise ValueError("synthetic frames must be at least 64 px")
    shape = (size, size)
    scale = size / 576.0

    tex = _wave_field(rng, shape, (120 * scale + 8, 320 * scale + 16))
    grain = rng.normal(0.0, 1.0, shape)
    rgb = np.zeros((size, size, 3))
    for c, (base, tex_gain, grain_gain) in enumerate(
        zip(BACKGROUND_RGB, (18.0, 12.0, 11.0), (4.0, 3.0, 3.0))
    ):
        rgb[:, :, c] = base + tex_gain * tex + grain_gain * grain

    # radial vignette toward the frame corners
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    half = (size - 1) / 2.0
    r2 = ((xx - half) ** 2 + (yy - half) ** 2) / (half * half)
    rgb *= (1.0 - 0.30 * np.clip(r2, 0.0, 1.4))[:, :, None]

    truth = np.zeros(shape, dtype=bool)
    n_polyps = _polyp_count(rng)
    # lesions are large relative to coarse superpixels, as in capsule frames;
    # a pair of blobs draws from a smaller range so both fit with separation
    axis_range = (95.0, 135.0) if n_polyps <= 1 else (75.0, 100.0)
    placed = []
    for _ in range(n_polyps):
        for _attempt in range(20):
            a = max(10.0, rng.uniform(*axis_range) * scale)
            b = max(6.5, a * rng.uniform(0.8, 1.0))
            margin = a + 6.0
            cx = rng.uniform(margin, size - margin)
            cy = rng.uniform(margin, size - margin)
            if all(math.hypot(cx - px, cy - py) > a + pa + 10 for px, py, pa in placed):
                break
        theta = rng.uniform(0, math.pi)
        blob = _ellipse_mask(shape, cx, cy, a, b, theta)
        placed.append((cx, cy, a))

        bump = _wave_field(rng, shape, (10 * scale + 4, 26 * scale + 6), n_waves=4)
        dome = 1.10 + 0.3 * np.clip(1.0 - ((xx - cx) ** 2 + (yy - cy) ** 2) / (a * a), 0.0, 1.0)
        for c, (base, gain) in enumerate(zip(POLYP_RGB, (8.0, 7.0, 6.0))):
            layer = (base + gain * bump) * dome
            rgb[:, :, c] = np.where(blob, layer, rgb[:, :, c])
        truth |= blob

    frame = RgbFrame(np.clip(rgb, 0, 255).astype(np.uint8))
    return frame, TruthMask(truth), n_polyps


def generate_dataset(
    out_dir: str | Path,
    count: int,
    seed: int,
    patients: int = 5,
    size: int = 576,
) -> Path:
    """Write frames, exact masks, and a manifest with leakage-safe splits.

    Frames rotate across `patients` synthetic patients; the first 60% of
    patients are the train split, the rest test. Returns the manifest path.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if patients < 2:
        raise ValueError("need at least 2 synthetic patients for a train/test split")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    n_train_patients = min(patients - 1, max(1, round(0.6 * patients)))
    rng = np.random.default_rng(seed)
    rows = []
    n_polyp_frames = 0
    for i in range(count):
        frame, truth, n_polyps = generate_frame(rng, size)
        n_polyp_frames += bool(n_polyps)
        frame_id = f"synth{i:04d}"
        patient_idx = i % patients
        image_rel = f"images/{frame_id}.png"
        mask_rel = f"masks/{frame_id}.png"
        write_frame(frame, out_dir / image_rel)
        write_mask(truth, out_dir / mask_rel)
        rows.append(
            {
                "frame_id": frame_id,
                "patient_id": f"synthP{patient_idx}",
                "image_path": image_rel,
                "mask_path": mask_rel,
                "split": "train" if patient_idx < n_train_patients else "test",
            }
        )
    manifest_path = out_dir / "manifest.json"
    save_manifest(rows, manifest_path)
    return manifest_path
