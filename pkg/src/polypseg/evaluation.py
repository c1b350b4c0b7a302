"""Ground truth handling, pixel/frame metrics, the oracle-overlap experiment,
and the superpixel-count sweep.

Conventions: a superpixel counts as polyp ground truth when at least a `tau`
fraction of it overlaps the mask (default 0.5, ties in). Metrics with a zero
denominator are reported as undefined (None), never coerced to 0 or 1, and
serialize as the string "undefined" in CSV and null in JSON. Pixel-level
metrics follow the frames actually containing polyps; frame-level metrics
cover every frame with known ground truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .config import PipelineConfig
from .features import SuperpixelRegion, extract_frame_features, regions_from_labels
from .imagecore import RgbFrame
from .lssvm import NORMAL, POLYP, TrainedModel, predict_scores
from .slic import LabelMap, max_superpixels, segment

METRIC_NAMES = ("sensitivity", "specificity", "accuracy", "precision")


@dataclass(frozen=True)
class TruthMask:
    """Binary per-pixel polyp indicator."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2 or m.dtype != bool:
            raise ValueError("mask must be a 2-D boolean array")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class MetricsReport:
    sensitivity: float | None
    specificity: float | None
    accuracy: float | None
    precision: float | None
    counts: ConfusionCounts
    granularity: str
    k: int | None = None

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def metrics_from_counts(counts: ConfusionCounts, granularity: str, k: int | None = None) -> MetricsReport:
    return MetricsReport(
        sensitivity=_ratio(counts.tp, counts.tp + counts.fn),
        specificity=_ratio(counts.tn, counts.tn + counts.fp),
        accuracy=_ratio(counts.tp + counts.tn, counts.total),
        precision=_ratio(counts.tp, counts.tp + counts.fp),
        counts=counts,
        granularity=granularity,
        k=k,
    )


def region_overlap(region: SuperpixelRegion, truth: TruthMask) -> float:
    inside = int(truth.mask[region.ys, region.xs].sum())
    return inside / len(region)


def label_superpixel(region: SuperpixelRegion, truth: TruthMask, tau: float = 0.5) -> int:
    """Ground-truth label for one superpixel: POLYP iff its overlap with the
    mask is at least tau."""
    if not (0 < tau <= 1):
        raise ValueError("tau must be in (0, 1]")
    return POLYP if region_overlap(region, truth) >= tau else NORMAL


def oracle_segmentation(labels: LabelMap, truth: TruthMask, tau: float = 0.5) -> np.ndarray:
    """Best mask reconstruction by whole superpixels: the union of every
    superpixel whose truth overlap is at least tau. Measures what the
    segmentation alone could achieve, independent of any classifier."""
    if (labels.height, labels.width) != (truth.height, truth.width):
        raise ValueError("label map and truth mask dimensions differ")
    pred = np.zeros((labels.height, labels.width), dtype=bool)
    for region in regions_from_labels(labels):
        if label_superpixel(region, truth, tau) == POLYP:
            pred[region.ys, region.xs] = True
    return pred


def pixel_metrics(pred: np.ndarray, truth: TruthMask, k: int | None = None) -> MetricsReport:
    pred = np.asarray(pred, dtype=bool)
    if pred.shape != truth.mask.shape:
        raise ValueError("prediction and truth dimensions differ")
    t = truth.mask
    counts = ConfusionCounts(
        tp=int(np.sum(pred & t)),
        fp=int(np.sum(pred & ~t)),
        fn=int(np.sum(~pred & t)),
        tn=int(np.sum(~pred & ~t)),
    )
    return metrics_from_counts(counts, "pixel", k)


def frame_decision(superpixel_predictions) -> int:
    """A frame is polyp as soon as one superpixel says polyp."""
    preds = list(superpixel_predictions)
    if not preds:
        raise ValueError("no superpixel predictions for frame decision")
    return POLYP if any(p == POLYP for p in preds) else NORMAL


def frame_metrics(decisions, truths, k: int | None = None) -> MetricsReport:
    decisions = list(decisions)
    truths = list(truths)
    if not decisions or len(decisions) != len(truths):
        raise ValueError("decisions and truths must be equally sized and non-empty")
    tp = sum(1 for d, t in zip(decisions, truths) if d == POLYP and t == POLYP)
    fp = sum(1 for d, t in zip(decisions, truths) if d == POLYP and t == NORMAL)
    fn = sum(1 for d, t in zip(decisions, truths) if d == NORMAL and t == POLYP)
    tn = sum(1 for d, t in zip(decisions, truths) if d == NORMAL and t == NORMAL)
    return metrics_from_counts(ConfusionCounts(tp, fp, fn, tn), "frame", k)


def std_over_frames(reports: list[MetricsReport]) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for name in METRIC_NAMES:
        vals = [r.metric(name) for r in reports if r.metric(name) is not None]
        out[name] = float(np.std(vals)) if vals else None
    return out


@dataclass
class SweepResult:
    """Per-k outcome of the sweep: oracle segmentation quality always, plus
    classifier-based pixel and frame metrics when a model was supplied."""

    k: int
    oracle_pixel: MetricsReport | None
    oracle_pixel_std: dict[str, float | None]
    classified_pixel: MetricsReport | None = None
    classified_pixel_std: dict[str, float | None] | None = None
    classified_frame: MetricsReport | None = None


def sweep(
    frames: list[RgbFrame],
    truths: list[TruthMask | None],
    k_list,
    config: PipelineConfig | None = None,
    model: TrainedModel | None = None,
) -> list[SweepResult]:
    """Run segmentation at every k and score it.

    Oracle pixel metrics aggregate over the frames that contain polyps (the
    reconstruction question is only posed there); classifier pixel metrics do
    the same, while frame decisions cover every frame with a known mask.
    Superpixels whose features cannot be extracted are treated as normal.
    """
    if len(frames) != len(truths):
        raise ValueError("frames and truths must align")
    if not frames:
        raise ValueError("no frames to sweep")
    config = config or PipelineConfig(k_list=tuple(k_list))

    bound = min(max_superpixels(f.width, f.height, config.min_polyp_px) for f in frames)
    for k in k_list:
        if k > bound:
            raise ValueError(f"k={k} exceeds the feasible superpixel bound {bound}")

    results = []
    for k in k_list:
        oracle_reports: list[MetricsReport] = []
        classified_reports: list[MetricsReport] = []
        decisions: list[int] = []
        frame_truths: list[int] = []
        for frame, truth in zip(frames, truths):
            if truth is None:
                continue
            label_map = segment(frame, config.slic_params(k))
            has_polyp = bool(truth.mask.any())
            if has_polyp:
                pred = oracle_segmentation(label_map, truth, config.tau)
                oracle_reports.append(pixel_metrics(pred, truth, k))
            if model is not None:
                kept, matrix, _ = extract_frame_features(frame, label_map, config.glcm_levels)
                votes = {lab: NORMAL for lab in range(label_map.num_labels)}
                if kept:
                    scores = predict_scores(model, matrix)
                    for lab, score in zip(kept, scores):
                        votes[lab] = POLYP if score >= 0 else NORMAL
                if has_polyp:
                    pred_mask = np.zeros_like(truth.mask, dtype=bool)
                    for region in regions_from_labels(label_map):
                        if votes[region.label] == POLYP:
                            pred_mask[region.ys, region.xs] = True
                    classified_reports.append(pixel_metrics(pred_mask, truth, k))
                decisions.append(frame_decision(votes.values()))
                frame_truths.append(POLYP if has_polyp else NORMAL)

        oracle_counts = sum((r.counts for r in oracle_reports), ConfusionCounts(0, 0, 0, 0))
        result = SweepResult(
            k=k,
            oracle_pixel=metrics_from_counts(oracle_counts, "pixel", k) if oracle_reports else None,
            oracle_pixel_std=std_over_frames(oracle_reports),
        )
        if model is not None:
            if classified_reports:
                counts = sum((r.counts for r in classified_reports), ConfusionCounts(0, 0, 0, 0))
                result.classified_pixel = metrics_from_counts(counts, "pixel", k)
                result.classified_pixel_std = std_over_frames(classified_reports)
            if decisions:
                result.classified_frame = frame_metrics(decisions, frame_truths, k)
        results.append(result)
    return results


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def read_mask(path: str | Path) -> TruthMask:
    """8-bit grayscale PNG, 0 = normal, 255 = polyp (threshold at 128)."""
    img = Image.open(Path(path))
    if img.mode != "L":
        raise ValueError(f"{path}: expected 8-bit grayscale mask, got mode {img.mode}")
    return TruthMask(np.asarray(img) >= 128)


def write_mask(mask: TruthMask, path: str | Path) -> None:
    Image.fromarray(np.where(mask.mask, 255, 0).astype(np.uint8), mode="L").save(Path(path), format="PNG")


def _report_row(series: str, rep: MetricsReport, std: dict | None, extra: dict) -> dict:
    def fmt(v):
        return "undefined" if v is None else repr(v)

    row = {
        "k": rep.k,
        "series": series,
        "granularity": rep.granularity,
        "tp": rep.counts.tp,
        "fp": rep.counts.fp,
        "fn": rep.counts.fn,
        "tn": rep.counts.tn,
    }
    for name in METRIC_NAMES:
        row[name] = fmt(rep.metric(name))
    for name in METRIC_NAMES:
        row[f"{name}_std"] = fmt(std.get(name)) if std else ""
    row.update(extra)
    return row


def write_reports_csv(results: list[SweepResult], path: str | Path, config_hash: str = "") -> None:
    fields = ["k", "series", "granularity", "tp", "fp", "fn", "tn"]
    fields += list(METRIC_NAMES) + [f"{m}_std" for m in METRIC_NAMES] + ["config_hash"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for res in results:
            extra = {"config_hash": config_hash}
            if res.oracle_pixel is not None:
                writer.writerow(_report_row("oracle_pixel", res.oracle_pixel, res.oracle_pixel_std, extra))
            if res.classified_pixel is not None:
                writer.writerow(_report_row("classified_pixel", res.classified_pixel, res.classified_pixel_std, extra))
            if res.classified_frame is not None:
                writer.writerow(_report_row("classified_frame", res.classified_frame, None, extra))


def _report_json(rep: MetricsReport | None, std: dict | None = None):
    if rep is None:
        return None
    doc = {
        "k": rep.k,
        "granularity": rep.granularity,
        "counts": {"tp": rep.counts.tp, "fp": rep.counts.fp, "fn": rep.counts.fn, "tn": rep.counts.tn},
        "metrics": {name: rep.metric(name) for name in METRIC_NAMES},
    }
    if std is not None:
        doc["std"] = std
    return doc


def write_reports_json(
    results: list[SweepResult], path: str | Path, config_hash: str = "", notes: list[str] | None = None
) -> None:
    doc = {
        "config_hash": config_hash,
        "notes": notes or [],
        "results": [
            {
                "k": res.k,
                "oracle_pixel": _report_json(res.oracle_pixel, res.oracle_pixel_std),
                "classified_pixel": _report_json(res.classified_pixel, res.classified_pixel_std),
                "classified_frame": _report_json(res.classified_frame),
            }
            for res in results
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
