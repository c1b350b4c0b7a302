"""Batch pipeline stages behind the CLI.

Every stage stamps its artifacts with the active config hash and refuses to
combine artifacts carrying different hashes. One bad frame never aborts a
batch: it is logged and skipped, and the stage fails hard only when nothing
succeeded at all.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_hash
from .errors import ArtifactError, FrameFormatError, UsageError
from .evaluation import (
    ConfusionCounts,
    SweepResult,
    TruthMask,
    std_over_frames,
    frame_decision,
    frame_metrics,
    label_superpixel,
    metrics_from_counts,
    oracle_segmentation,
    pixel_metrics,
    read_mask,
    write_reports_csv,
    write_reports_json,
)
from .features import (
    extract_frame_features,
    feature_order_hash,
    read_features_csv,
    regions_from_labels,
    write_features_csv,
)
from .imagecore import read_frame
from .lssvm import NORMAL, POLYP, fit, grid_search, load_model, predict_scores, save_model
from .manifest import FrameEntry, Manifest, check_patient_split, load_manifest
from .slic import load_label_map, max_superpixels, save_label_map, segment
from .svgplot import write_metrics_chart
from .synth import generate_dataset

log = logging.getLogger(__name__)

METRICS = ("sensitivity", "specificity", "accuracy", "precision")


def labelmap_paths(out_dir: Path, frame_id: str, k: int) -> tuple[Path, Path]:
    base = Path(out_dir) / "labelmaps" / frame_id
    return base / f"k{k}.png", base / f"k{k}.json"


def features_csv_path(out_dir: Path, k: int) -> Path:
    return Path(out_dir) / "features" / f"features_k{k}.csv"


def model_path(out_dir: Path) -> Path:
    return Path(out_dir) / "model.json"


def reports_dir(out_dir: Path) -> Path:
    return Path(out_dir) / "reports"


def _load_manifest_or_usage(manifest_path) -> Manifest:
    manifest = load_manifest(manifest_path)
    if not manifest.frames:
        raise UsageError("no frames in manifest")
    return manifest


def _truth_for(entry: FrameEntry) -> TruthMask | None:
    return read_mask(entry.mask_path) if entry.mask_path else None


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def cmd_synth(out_dir, count: int, seed: int, patients: int = 5, size: int = 576) -> int:
    if count < 1:
        raise UsageError("count must be >= 1")
    manifest_path = generate_dataset(out_dir, count, seed, patients=patients, size=size)
    manifest = load_manifest(manifest_path)
    n_polyp = sum(1 for e in manifest.frames if read_mask(e.mask_path).mask.any())
    log.info(
        "wrote %d frames (%d with polyps) for %d patients under %s",
        count, n_polyp, patients, out_dir,
    )
    print(f"synth: {count} frames ({n_polyp} with polyps), manifest at {manifest_path}")
    return 0


def cmd_segment(manifest_path, cfg: PipelineConfig, out_dir, only_k: int | None = None, reuse: bool = True) -> int:
    manifest = _load_manifest_or_usage(manifest_path)
    chash = config_hash(cfg)
    ks = [only_k] if only_k else list(cfg.k_list)
    ok_frames = 0
    failed: list[str] = []
    for entry in manifest.frames:
        try:
            frame = read_frame(entry.image_path)
        except FrameFormatError as exc:
            log.warning("frame %s: %s", entry.frame_id, exc)
            failed.append(entry.frame_id)
            continue
        bound = max_superpixels(frame.width, frame.height, cfg.min_polyp_px)
        for k in ks:
            if k > bound:
                log.warning("frame %s: k=%d exceeds feasible bound %d, skipped", entry.frame_id, k, bound)
                continue
            png, sidecar = labelmap_paths(out_dir, entry.frame_id, k)
            if reuse and png.exists() and sidecar.exists():
                meta = json.loads(sidecar.read_text())
                if meta.get("config_hash") == chash:
                    continue
            png.parent.mkdir(parents=True, exist_ok=True)
            lm = segment(frame, cfg.slic_params(k))
            save_label_map(
                lm, png, sidecar, cfg.slic_params(k),
                extra={"frame_id": entry.frame_id, "k": k, "config_hash": chash},
            )
        ok_frames += 1
    if ok_frames == 0:
        raise ArtifactError(f"segmentation failed for every frame: {failed}")
    if failed:
        log.warning("segment finished with %d failed frame(s): %s", len(failed), failed)
    print(f"segment: {ok_frames}/{len(manifest.frames)} frames, k={ks}")
    return 0


def _load_labelmap_checked(out_dir, frame_id: str, k: int, chash: str):
    png, sidecar = labelmap_paths(out_dir, frame_id, k)
    if not png.exists() or not sidecar.exists():
        raise ArtifactError(
            f"missing label map {png} (and/or {sidecar}); run `polypseg segment` for k={k} first"
        )
    lm, meta = load_label_map(png, sidecar)
    if meta.get("config_hash") != chash:
        raise ArtifactError(
            f"{sidecar}: config hash {meta.get('config_hash')} does not match the active config {chash}"
        )
    return lm


def cmd_features(manifest_path, cfg: PipelineConfig, out_dir, only_k: int | None = None, reuse: bool = True) -> int:
    manifest = _load_manifest_or_usage(manifest_path)
    chash = config_hash(cfg)
    ks = [only_k] if only_k else list(cfg.k_list)
    for k in ks:
        csv_path = features_csv_path(out_dir, k)
        if reuse and csv_path.exists():
            try:
                _, existing_hash = read_features_csv(csv_path)
            except ValueError:
                existing_hash = None
            if existing_hash == chash:
                continue
        rows = []
        n_dropped = 0
        for entry in manifest.frames:
            lm = _load_labelmap_checked(out_dir, entry.frame_id, k, chash)
            frame = read_frame(entry.image_path)
            truth = _truth_for(entry)
            kept, matrix, dropped = extract_frame_features(frame, lm, cfg.glcm_levels, entry.frame_id)
            n_dropped += len(dropped)
            regions = {r.label: r for r in regions_from_labels(lm)}
            for lab, vec in zip(kept, matrix):
                if truth is None:
                    label_str = "unknown"
                else:
                    label_str = "1" if label_superpixel(regions[lab], truth, cfg.tau) == POLYP else "-1"
                rows.append((entry.frame_id, lab, label_str, vec))
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        write_features_csv(csv_path, rows, chash)
        print(f"features: k={k}: {len(rows)} superpixels ({n_dropped} dropped) -> {csv_path}")
    return 0


def cmd_train(manifest_path, cfg: PipelineConfig, out_dir, k: int | None = None) -> int:
    manifest = _load_manifest_or_usage(manifest_path)
    check_patient_split(manifest)
    chash = config_hash(cfg)
    k = k or cfg.train_k
    csv_path = features_csv_path(out_dir, k)
    if not csv_path.exists():
        raise ArtifactError(f"missing features {csv_path}; run `polypseg features` for k={k} first")
    records, fhash = read_features_csv(csv_path)
    if fhash != chash:
        raise ArtifactError(f"{csv_path}: config hash {fhash} does not match the active config {chash}")

    by_id = manifest.by_id()
    xs, ys, patients = [], [], []
    for frame_id, _sp, label, values in records:
        entry = by_id.get(frame_id)
        if entry is None or entry.split != "train" or label == "unknown":
            continue
        xs.append(values)
        ys.append(float(label))
        patients.append(entry.patient_id)
    if not xs:
        raise ArtifactError("no labeled training rows: check manifest splits and masks")
    x = np.vstack(xs)
    y = np.array(ys)

    train_cfg = cfg.train_config()
    if cfg.grid_search:
        train_cfg = grid_search(x, y, patients, weight_polyp=cfg.weight_polyp)
        log.info("grid search selected gamma=%g sigma=%g", train_cfg.gamma, train_cfg.sigma)
    model = fit(x, y, train_cfg)
    path = model_path(out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path, config_hash=chash)
    n_pos = int(np.sum(y > 0))
    print(
        f"train: {len(y)} rows ({n_pos} polyp / {len(y) - n_pos} normal) from "
        f"{len(set(patients))} patients, gamma={train_cfg.gamma:g} sigma={train_cfg.sigma:g}, "
        f"residual={model.residual:.2e} -> {path}"
    )
    return 0


def _votes_for_frame(model, frame_records, num_labels: int) -> dict[int, int]:
    """Per-superpixel polyp/normal votes; superpixels without a feature row
    (dropped as degenerate) count as normal."""
    votes = {lab: NORMAL for lab in range(num_labels)}
    if frame_records:
        matrix = np.vstack([values for _, values in frame_records])
        scores = predict_scores(model, matrix)
        for (sp_id, _), score in zip(frame_records, scores):
            votes[sp_id] = POLYP if score >= 0 else NORMAL
    return votes


def _classified_for_k(entries, out_dir, k, cfg, chash, model, grouped_records):
    pixel_reports = []
    decisions, truths = [], []
    for entry in entries:
        truth = _truth_for(entry)
        if truth is None:
            log.warning("frame %s: no mask, excluded from evaluation", entry.frame_id)
            continue
        lm = _load_labelmap_checked(out_dir, entry.frame_id, k, chash)
        votes = _votes_for_frame(model, grouped_records.get(entry.frame_id, []), lm.num_labels)
        has_polyp = bool(truth.mask.any())
        if has_polyp:
            pred = np.zeros_like(truth.mask, dtype=bool)
            for region in regions_from_labels(lm):
                if votes[region.label] == POLYP:
                    pred[region.ys, region.xs] = True
            pixel_reports.append(pixel_metrics(pred, truth, k))
        decisions.append(frame_decision(votes.values()))
        truths.append(POLYP if has_polyp else NORMAL)

    pixel = None
    pixel_std = None
    if pixel_reports:
        counts = sum((r.counts for r in pixel_reports), ConfusionCounts(0, 0, 0, 0))
        pixel = metrics_from_counts(counts, "pixel", k)
        pixel_std = std_over_frames(pixel_reports)
    frame_rep = frame_metrics(decisions, truths, k) if decisions else None
    return pixel, pixel_std, frame_rep


def _oracle_for_k(entries, out_dir, k, cfg, chash):
    reports = []
    for entry in entries:
        truth = _truth_for(entry)
        if truth is None or not truth.mask.any():
            continue
        lm = _load_labelmap_checked(out_dir, entry.frame_id, k, chash)
        pred = oracle_segmentation(lm, truth, cfg.tau)
        reports.append(pixel_metrics(pred, truth, k))
    if not reports:
        return None, {}
    counts = sum((r.counts for r in reports), ConfusionCounts(0, 0, 0, 0))
    return metrics_from_counts(counts, "pixel", k), std_over_frames(reports)


def _grouped_records(out_dir, k: int, chash: str) -> dict[str, list]:
    csv_path = features_csv_path(out_dir, k)
    if not csv_path.exists():
        raise ArtifactError(f"missing features {csv_path}; run `polypseg features` for k={k} first")
    records, fhash = read_features_csv(csv_path)
    if fhash != chash:
        raise ArtifactError(f"{csv_path}: config hash {fhash} does not match the active config {chash}")
    grouped: dict[str, list] = {}
    for frame_id, sp_id, _label, values in records:
        grouped.setdefault(frame_id, []).append((sp_id, values))
    return grouped


def _emit_reports(results: list[SweepResult], out_dir, chash: str, notes: list[str]) -> None:
    rdir = reports_dir(out_dir)
    rdir.mkdir(parents=True, exist_ok=True)
    write_reports_csv(results, rdir / "metrics.csv", chash)
    write_reports_json(results, rdir / "metrics.json", chash, notes=notes)
    ks = [r.k for r in results]

    def chart(attr, std_attr, path, title):
        if not any(getattr(r, attr) for r in results):
            return
        series = {}
        errors = {}
        for m in METRICS:
            series[m] = [getattr(r, attr).metric(m) if getattr(r, attr) else None for r in results]
            if std_attr:
                errors[m] = [
                    (getattr(r, std_attr) or {}).get(m) if getattr(r, std_attr) else None for r in results
                ]
        write_metrics_chart(rdir / path, ks, series, errors if std_attr else None, title)

    chart("oracle_pixel", "oracle_pixel_std", "oracle_pixel.svg", "oracle segmentation, pixel metrics")
    chart("classified_pixel", "classified_pixel_std", "classified_pixel.svg", "classified superpixels, pixel metrics")
    chart("classified_frame", None, "classified_frame.svg", "classified superpixels, frame metrics")


def _load_model_checked(model_file, out_dir, chash):
    path = Path(model_file) if model_file else model_path(out_dir)
    if not path.exists():
        raise ArtifactError(f"missing model {path}; run `polypseg train` first")
    model, doc = load_model(path, expect_feature_hash=feature_order_hash())
    if doc.get("config_hash") != chash:
        raise ArtifactError(
            f"{path}: config hash {doc.get('config_hash')} does not match the active config {chash}"
        )
    return model


def cmd_evaluate(manifest_path, cfg: PipelineConfig, out_dir, model_file=None) -> int:
    manifest = _load_manifest_or_usage(manifest_path)
    chash = config_hash(cfg)
    model = _load_model_checked(model_file, out_dir, chash)
    entries = manifest.split("test")
    if not entries:
        raise UsageError("manifest has no test frames")

    results = []
    notes = []
    for k in cfg.k_list:
        try:
            grouped = _grouped_records(out_dir, k, chash)
            pixel, pixel_std, frame_rep = _classified_for_k(entries, out_dir, k, cfg, chash, model, grouped)
        except ArtifactError as exc:
            log.warning("k=%d: %s", k, exc)
            notes.append(f"k={k}: {exc}")
            continue
        if pixel is None:
            notes.append(f"k={k}: pixel report skipped (no test frames with polyp masks)")
        results.append(
            SweepResult(
                k=k,
                oracle_pixel=None,
                oracle_pixel_std={},
                classified_pixel=pixel,
                classified_pixel_std=pixel_std,
                classified_frame=frame_rep,
            )
        )
    if not results:
        raise ArtifactError("evaluation produced no results for any k")
    _emit_reports(results, out_dir, chash, notes)
    for res in results:
        fr = res.classified_frame
        if fr:
            print(
                f"evaluate: k={res.k}: frame sensitivity="
                f"{'undefined' if fr.sensitivity is None else f'{fr.sensitivity:.4f}'} "
                f"specificity={'undefined' if fr.specificity is None else f'{fr.specificity:.4f}'}"
            )
    print(f"evaluate: reports under {reports_dir(out_dir)}")
    return 0


def cmd_sweep(manifest_path, cfg: PipelineConfig, out_dir, model_file=None) -> int:
    """segment -> features -> oracle (and classified, when a model is given)
    metrics for every k in the config."""
    cmd_segment(manifest_path, cfg, out_dir, reuse=True)
    cmd_features(manifest_path, cfg, out_dir, reuse=True)
    manifest = _load_manifest_or_usage(manifest_path)
    chash = config_hash(cfg)
    model = _load_model_checked(model_file, out_dir, chash) if model_file else None
    test_entries = manifest.split("test")

    results = []
    notes = []
    for k in cfg.k_list:
        oracle, oracle_std = _oracle_for_k(manifest.frames, out_dir, k, cfg, chash)
        res = SweepResult(k=k, oracle_pixel=oracle, oracle_pixel_std=oracle_std)
        if model is not None and test_entries:
            grouped = _grouped_records(out_dir, k, chash)
            res.classified_pixel, res.classified_pixel_std, res.classified_frame = _classified_for_k(
                test_entries, out_dir, k, cfg, chash, model, grouped
            )
        results.append(res)
    _emit_reports(results, out_dir, chash, notes)
    print(f"sweep: {len(results)} k values, reports under {reports_dir(out_dir)}")
    return 0
