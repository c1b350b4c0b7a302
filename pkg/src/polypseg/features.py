"""Per-superpixel feature extraction.

Each region yields a fixed-order 164-dimensional vector:

  [0..31]    32-bin histogram of rotation-invariant local binary patterns
  [32..139]  18 co-occurrence (Haralick-style) statistics for each of six
             source planes, in order: LBP codes, grayscale, R, G, B, hue
  [140..163] mean / variance / skewness / kurtosis for the same six planes

The 18 co-occurrence statistics follow the standard definitions collected in
docs/haralick_features.md (base-2 logarithms, 0*log0 == 0, zero-variance
guards return 0). Kurtosis is excess kurtosis.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateRegionError
from .imagecore import Plane, RgbFrame, extract_channel, to_grayscale, to_hue
from .slic import LabelMap

log = logging.getLogger(__name__)

N_FEATURES = 164
LBP_BINS = 32
DEFAULT_GLCM_LEVELS = 16

# (dy, dx) unit offsets accumulated symmetrically into a single matrix
GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (-1, 1))

HARALICK_NAMES = (
    "autocorrelation",
    "cluster_prominence",
    "energy",
    "cluster_shade",
    "dissimilarity",
    "contrast",
    "entropy",
    "homogeneity",
    "max_probability",
    "correlation",
    "sum_of_squares_variance",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "inverse_difference_moment",
)

MOMENT_NAMES = ("mean", "variance", "skewness", "kurtosis")

SOURCE_NAMES = ("lbp", "gray", "red", "green", "blue", "hue")

FEATURE_NAMES = tuple(
    [f"lbp_hist_{i:02d}" for i in range(LBP_BINS)]
    + [f"glcm_{src}_{name}" for src in SOURCE_NAMES for name in HARALICK_NAMES]
    + [f"mom_{src}_{name}" for src in SOURCE_NAMES for name in MOMENT_NAMES]
)
assert len(FEATURE_NAMES) == N_FEATURES


def feature_order_hash() -> str:
    return hashlib.sha256(",".join(FEATURE_NAMES).encode()).hexdigest()


def _min_rotation_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint8)
    for v in range(256):
        table[v] = min(((v >> r) | (v << (8 - r))) & 0xFF for r in range(8))
    return table


_MIN_ROT = _min_rotation_table()

# clockwise ring starting at the top-left neighbor; first neighbor is the MSB
_LBP_RING = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


@dataclass(frozen=True)
class LbpCodePlane:
    """Rotation-minimal 8-bit LBP code per pixel."""

    codes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.codes)
        if c.ndim != 2 or c.dtype != np.uint8:
            raise ValueError("codes must be a 2-D uint8 array")
        if not np.all(_MIN_ROT[c] == c):
            raise ValueError("codes must be minimal under circular bit rotation")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "codes", c)

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]


@dataclass(frozen=True)
class Glcm:
    """Normalized symmetric co-occurrence matrix over q quantization levels."""

    q: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if m.shape != (self.q, self.q):
            raise ValueError(f"matrix must be {self.q}x{self.q}, got {m.shape}")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("matrix entries must sum to 1")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("matrix must be symmetric")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SuperpixelRegion:
    """Pixel coordinates belonging to one label of a LabelMap."""

    label: int
    ys: np.ndarray
    xs: np.ndarray

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=np.intp)
        xs = np.asarray(self.xs, dtype=np.intp)
        if ys.ndim != 1 or xs.ndim != 1 or len(ys) != len(xs):
            raise ValueError("ys and xs must be 1-D arrays of equal length")
        if len(ys) == 0:
            raise ValueError("region must be non-empty")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "xs", xs)

    def __len__(self) -> int:
        return len(self.ys)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have length {N_FEATURES}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")
        hist = v[:LBP_BINS]
        if np.any(hist < 0) or abs(hist.sum() - 1.0) > 1e-9:
            raise ValueError("LBP histogram block must be a distribution")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SourcePlanes:
    """The six per-frame planes shared by every region of that frame."""

    lbp: LbpCodePlane
    gray: Plane
    red: Plane
    green: Plane
    blue: Plane
    hue: Plane

    def ordered(self) -> tuple[np.ndarray, ...]:
        return (
            self.lbp.codes,
            self.gray.data,
            self.red.data,
            self.green.data,
            self.blue.data,
            self.hue.data,
        )


def regions_from_labels(label_map: LabelMap) -> list[SuperpixelRegion]:
    """Split a label map into per-label coordinate lists, ordered by label id."""
    labels = label_map.labels
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    bounds = np.searchsorted(sorted_labels, np.arange(label_map.num_labels + 1))
    ys, xs = np.unravel_index(order, labels.shape)
    return [
        SuperpixelRegion(lab, ys[bounds[lab] : bounds[lab + 1]], xs[bounds[lab] : bounds[lab + 1]])
        for lab in range(label_map.num_labels)
    ]


def lbp_code_plane(gray: Plane) -> LbpCodePlane:
    """8-neighbor LBP with edge replication: bit set when neighbor >= center,
    pattern replaced by its minimal circular rotation."""
    if gray.height < 3 or gray.width < 3:
        raise ValueError("plane must be at least 3x3")
    arr = gray.data
    padded = np.pad(arr, 1, mode="edge")
    h, w = arr.shape
    pattern = np.zeros((h, w), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(_LBP_RING):
        neigh = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        pattern |= (neigh >= arr).astype(np.uint8) << (7 - bit)
    return LbpCodePlane(_MIN_ROT[pattern])


def lbp_histogram(codes: LbpCodePlane, region: SuperpixelRegion) -> np.ndarray:
    """Region codes binned into 32 equal-width bins over [0, 255], normalized."""
    vals = codes.codes[region.ys, region.xs]
    hist = np.bincount(vals >> 3, minlength=LBP_BINS).astype(np.float64)
    return hist / hist.sum()


def _quantize(values: np.ndarray, q: int) -> np.ndarray:
    return (values.astype(np.int64) * q) >> 8


def glcm(plane, region: SuperpixelRegion, q: int = DEFAULT_GLCM_LEVELS) -> Glcm:
    """Symmetric co-occurrence matrix over the four unit offsets, counting only
    pairs whose two pixels both belong to the region."""
    if q < 2:
        raise ValueError("q must be >= 2")
    data = plane.codes if isinstance(plane, LbpCodePlane) else plane.data
    y0, y1 = int(region.ys.min()), int(region.ys.max())
    x0, x1 = int(region.xs.min()), int(region.xs.max())
    bh, bw = y1 - y0 + 1, x1 - x0 + 1

    mask = np.zeros((bh + 2, bw + 2), dtype=bool)
    mask[region.ys - y0 + 1, region.xs - x0 + 1] = True
    quant = np.zeros((bh + 2, bw + 2), dtype=np.int64)
    quant[1:-1, 1:-1] = _quantize(data[y0 : y1 + 1, x0 : x1 + 1], q)

    counts = np.zeros(q * q, dtype=np.float64)
    core_m = mask[1:-1, 1:-1]
    core_q = quant[1:-1, 1:-1]
    for dy, dx in GLCM_OFFSETS:
        nb_m = mask[1 + dy : 1 + dy + bh, 1 + dx : 1 + dx + bw]
        nb_q = quant[1 + dy : 1 + dy + bh, 1 + dx : 1 + dx + bw]
        both = core_m & nb_m
        if not both.any():
            continue
        counts += np.bincount(core_q[both] * q + nb_q[both], minlength=q * q)
    matrix = counts.reshape(q, q)
    matrix = matrix + matrix.T
    total = matrix.sum()
    if total == 0:
        raise DegenerateRegionError(f"region {region.label}: no interior pairs")
    return Glcm(q, matrix / total)


def _xlog2x(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    nz = v > 0
    out[nz] = v[nz] * np.log2(v[nz])
    return out


def haralick18(g: Glcm) -> np.ndarray:
    """The 18 co-occurrence statistics in canonical order (see HARALICK_NAMES
    and docs/haralick_features.md for the formula sheet)."""
    p = g.matrix
    q = g.q
    idx = np.arange(q, dtype=np.float64)
    ii = idx[:, None]
    jj = idx[None, :]

    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float((idx * px).sum())
    mu_y = float((idx * py).sum())
    var_x = float(((idx - mu_x) ** 2 * px).sum())
    var_y = float(((idx - mu_y) ** 2 * py).sum())

    sum_index = (ii + jj).astype(np.intp)
    diff_index = np.abs(ii - jj).astype(np.intp)
    p_sum = np.bincount(sum_index.ravel(), weights=p.ravel(), minlength=2 * q - 1)
    p_diff = np.bincount(diff_index.ravel(), weights=p.ravel(), minlength=q)
    k_sum = np.arange(2 * q - 1, dtype=np.float64)
    k_diff = np.arange(q, dtype=np.float64)

    autocorrelation = float((ii * jj * p).sum())
    spread = ii + jj - mu_x - mu_y
    cluster_prominence = float((spread**4 * p).sum())
    energy = float((p * p).sum())
    cluster_shade = float((spread**3 * p).sum())
    dissimilarity = float((np.abs(ii - jj) * p).sum())
    contrast = float(((ii - jj) ** 2 * p).sum())
    entropy = float(-_xlog2x(p).sum())
    homogeneity = float((p / (1.0 + np.abs(ii - jj))).sum())
    max_probability = float(p.max())

    sigma = np.sqrt(var_x * var_y)
    if sigma > 1e-12:
        correlation = float((((ii - mu_x) * (jj - mu_y) * p).sum()) / sigma)
    else:
        correlation = 0.0

    sum_of_squares_variance = var_x
    sum_average = float((k_sum * p_sum).sum())
    sum_variance = float(((k_sum - sum_average) ** 2 * p_sum).sum())
    sum_entropy = float(-_xlog2x(p_sum).sum())
    diff_mean = float((k_diff * p_diff).sum())
    difference_variance = float(((k_diff - diff_mean) ** 2 * p_diff).sum())
    difference_entropy = float(-_xlog2x(p_diff).sum())

    hx = float(-_xlog2x(px).sum())
    hy = float(-_xlog2x(py).sum())
    nz = p > 0
    marg = px[:, None] * py[None, :]
    hxy1 = float(-(p[nz] * np.log2(marg[nz])).sum())
    denom = max(hx, hy)
    imc1 = (entropy - hxy1) / denom if denom > 1e-12 else 0.0

    inverse_difference_moment = float((p / (1.0 + (ii - jj) ** 2)).sum())

    return np.array(
        [
            autocorrelation,
            cluster_prominence,
            energy,
            cluster_shade,
            dissimilarity,
            contrast,
            entropy,
            homogeneity,
            max_probability,
            correlation,
            sum_of_squares_variance,
            sum_average,
            sum_variance,
            sum_entropy,
            difference_variance,
            difference_entropy,
            imc1,
            inverse_difference_moment,
        ]
    )


def moments4(plane, region: SuperpixelRegion) -> np.ndarray:
    """Population mean/variance, skewness, excess kurtosis of region pixels.
    Zero-variance regions report 0 skewness and kurtosis."""
    data = plane.codes if isinstance(plane, LbpCodePlane) else plane.data
    v = data[region.ys, region.xs].astype(np.float64)
    mean = float(v.mean())
    d = v - mean
    m2 = float((d * d).mean())
    if m2 < 1e-12:
        return np.array([mean, m2, 0.0, 0.0])
    m3 = float((d**3).mean())
    m4 = float((d**4).mean())
    return np.array([mean, m2, m3 / m2**1.5, m4 / m2**2 - 3.0])


def compute_source_planes(frame: RgbFrame) -> SourcePlanes:
    gray = to_grayscale(frame)
    return SourcePlanes(
        lbp=lbp_code_plane(gray),
        gray=gray,
        red=extract_channel(frame, "R"),
        green=extract_channel(frame, "G"),
        blue=extract_channel(frame, "B"),
        hue=to_hue(frame),
    )


def assemble(
    frame: RgbFrame,
    labels: LabelMap,
    region: SuperpixelRegion,
    q: int = DEFAULT_GLCM_LEVELS,
    planes: SourcePlanes | None = None,
) -> FeatureVector:
    """Full 164-dimensional vector for one region. Pass `planes` to share the
    per-frame source planes across regions."""
    if labels.width != frame.width or labels.height != frame.height:
        raise ValueError("label map dimensions must match the frame")
    if planes is None:
        planes = compute_source_planes(frame)

    parts = [lbp_histogram(planes.lbp, region)]
    holders = (planes.lbp, planes.gray, planes.red, planes.green, planes.blue, planes.hue)
    for holder in holders:
        parts.append(haralick18(glcm(holder, region, q)))
    for holder in holders:
        parts.append(moments4(holder, region))
    return FeatureVector(np.concatenate(parts))


def extract_frame_features(
    frame: RgbFrame,
    label_map: LabelMap,
    q: int = DEFAULT_GLCM_LEVELS,
    frame_id: str = "",
) -> tuple[list[int], np.ndarray, list[int]]:
    """Feature vectors for every region of a frame.

    Regions without any valid co-occurrence pair are dropped with a warning
    rather than zero-filled. Returns (kept_label_ids, matrix, dropped_ids).
    """
    planes = compute_source_planes(frame)
    kept: list[int] = []
    dropped: list[int] = []
    rows: list[np.ndarray] = []
    for region in regions_from_labels(label_map):
        try:
            vec = assemble(frame, label_map, region, q, planes)
        except DegenerateRegionError:
            log.warning("frame %s: dropping superpixel %d (no interior pairs)", frame_id or "?", region.label)
            dropped.append(region.label)
            continue
        kept.append(region.label)
        rows.append(vec.values)
    matrix = np.vstack(rows) if rows else np.empty((0, N_FEATURES))
    return kept, matrix, dropped


def write_features_csv(path, records, config_hash: str | None = None) -> None:
    """records: iterable of (frame_id, superpixel_id, label_str, values)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "superpixel_id", "label", *FEATURE_NAMES])
        for frame_id, sp_id, label, values in records:
            writer.writerow([frame_id, sp_id, label, *[repr(float(v)) for v in values]])


def read_features_csv(path):
    """Returns (records, config_hash); records as written by write_features_csv."""
    path = Path(path)
    config_hash = None
    records = []
    with path.open(newline="") as fh:
        first = fh.readline()
        if first.startswith("# config_hash="):
            config_hash = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        if header[3:] != list(FEATURE_NAMES):
            raise ValueError(f"{path}: unexpected feature columns")
        for row in reader:
            values = np.array([float(v) for v in row[3:]])
            records.append((row[0], int(row[1]), row[2], values))
    return records, config_hash
