"""Raster types and channel/color conversions feeding segmentation and features.

All conversions are pure and deterministic. Rounding is floor(x + 0.5)
(half away from zero for the non-negative values handled here) so results
do not depend on the host's round-half-to-even behavior.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FrameFormatError

_LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # BT.601


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RgbFrame:
    """8-bit three-channel raster, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"frame must have shape (h, w, 3), got {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"frame must be uint8, got {p.dtype}")
        if p.shape[0] < 3 or p.shape[1] < 3:
            raise ValueError("frame must be at least 3x3 pixels")
        object.__setattr__(self, "pixels", _readonly(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Plane:
    """Single 8-bit channel, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"plane must be 2-D, got shape {d.shape}")
        if d.dtype != np.uint8:
            raise ValueError(f"plane must be uint8, got {d.dtype}")
        object.__setattr__(self, "data", _readonly(d))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class GradientField:
    """Non-negative gradient magnitude per pixel, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"gradient field must be 2-D, got shape {d.shape}")
        if np.any(d < 0):
            raise ValueError("gradient magnitudes must be non-negative")
        object.__setattr__(self, "data", _readonly(d))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def to_grayscale(frame: RgbFrame) -> Plane:
    """Luma plane: floor(0.299 R + 0.587 G + 0.114 B + 0.5), clamped to [0, 255]."""
    rgb = frame.pixels.astype(np.float64)
    luma = _LUMA_WEIGHTS[0] * rgb[:, :, 0] + _LUMA_WEIGHTS[1] * rgb[:, :, 1] + _LUMA_WEIGHTS[2] * rgb[:, :, 2]
    out = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return Plane(out)


def extract_channel(frame: RgbFrame, channel: str) -> Plane:
    """Project out one of the 'R', 'G', 'B' components, unmodified."""
    idx = {"R": 0, "G": 1, "B": 2}.get(channel.upper())
    if idx is None:
        raise ValueError(f"channel must be one of R, G, B, got {channel!r}")
    return Plane(frame.pixels[:, :, idx])


def to_hue(frame: RgbFrame) -> Plane:
    """HSV hue in degrees [0, 360) rescaled to integer [0, 255].

    Achromatic pixels (max == min) map to 0 by convention, so every
    source plane used for texture features shares one bounded domain.
    """
    rgb = frame.pixels.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)

    h_r = np.mod((g - b) / safe, 6.0)
    h_g = (b - r) / safe + 2.0
    h_b = (r - g) / safe + 4.0
    # priority r, g, b when the max is shared; the formulas agree on ties
    hue6 = np.select([mx == r, mx == g], [h_r, h_g], default=h_b)
    hue_deg = 60.0 * hue6
    hue_deg = np.where(delta == 0, 0.0, hue_deg)

    out = np.floor(hue_deg * 255.0 / 360.0 + 0.5)
    return Plane(np.clip(out, 0, 255).astype(np.uint8))


def gradient_magnitude(plane: Plane) -> GradientField:
    """L1 magnitude of central differences, |dI/dx| + |dI/dy|, edge-replicated."""
    padded = np.pad(plane.data.astype(np.float64), 1, mode="edge")
    gx = np.abs(padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = np.abs(padded[2:, 1:-1] - padded[:-2, 1:-1])
    return GradientField(gx + gy)


def read_frame(path: str | Path) -> RgbFrame:
    """Load an 8-bit RGB or RGBA PNG; alpha is discarded. Other formats are rejected."""
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FrameFormatError(f"cannot read {path}: {exc}") from exc
    if img.format != "PNG":
        raise FrameFormatError(f"{path}: expected PNG, got {img.format}")
    if img.mode == "RGBA":
        img = img.convert("RGB")
    if img.mode != "RGB":
        raise FrameFormatError(f"{path}: expected 8-bit RGB or RGBA, got mode {img.mode}")
    return RgbFrame(np.asarray(img, dtype=np.uint8))


def write_frame(frame: RgbFrame, path: str | Path) -> None:
    Image.fromarray(frame.pixels, mode="RGB").save(Path(path), format="PNG")
