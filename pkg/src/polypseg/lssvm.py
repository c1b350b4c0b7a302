"""Least-squares SVM with a Gaussian RBF kernel.

Training solves one dense linear system

    [[0, 1^T], [1, K + W/gamma]] [b; alpha] = [0; y]

with K_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)) and W a diagonal of optional
per-class weights (identity by default). Features are min-max normalized to
[0, 1] with bounds fitted on training data only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SingleClassError, SingularSystemError
from .features import N_FEATURES, feature_order_hash

RESIDUAL_TOL = 1e-8
DEFAULT_SIGMA = math.sqrt(N_FEATURES / 2)

POLYP = 1
NORMAL = -1


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min/max captured from the training rows."""

    min_: np.ndarray
    max_: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_, dtype=np.float64)
        hi = np.asarray(self.max_, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("min/max must be 1-D arrays of equal length")
        object.__setattr__(self, "min_", lo)
        object.__setattr__(self, "max_", hi)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(x - min) / (max - min), clamped to [0, 1]; flat features map to 0."""
        x = np.asarray(x, dtype=np.float64)
        span = self.max_ - self.min_
        safe = np.where(span > 0, span, 1.0)
        out = (x - self.min_) / safe
        out = np.where(span > 0, out, 0.0)
        return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 10.0
    sigma: float = DEFAULT_SIGMA
    weight_polyp: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0 or self.sigma <= 0:
            raise ValueError("gamma and sigma must be positive")
        if self.weight_polyp <= 0:
            raise ValueError("weight_polyp must be positive")


@dataclass
class TrainedModel:
    support: np.ndarray  # normalized training vectors, one row each
    alphas: np.ndarray
    bias: float
    sigma: float
    gamma: float
    normalizer: Normalizer
    residual: float
    feature_hash: str = field(default_factory=feature_order_hash)


def fit_normalizer(train: np.ndarray) -> Normalizer:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 1:
        raise ValueError("training matrix must have at least one row")
    return Normalizer(train.min(axis=0), train.max(axis=0))


def kernel_matrix(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    if a is b:
        # keep the Gram matrix exactly symmetric with an exact unit diagonal
        sq = 0.5 * (sq + sq.T)
        np.fill_diagonal(sq, 0.0)
    return np.exp(-sq / (2.0 * sigma * sigma))


def train(
    x_norm: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    normalizer: Normalizer,
) -> TrainedModel:
    """Solve the dual system by dense direct solve with partial pivoting.

    Raises SingleClassError unless both labels are present, and
    SingularSystemError (with a condition diagnostic) when the solve fails
    or leaves a residual above RESIDUAL_TOL * ||y||_inf.
    """
    x = np.asarray(x_norm, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two training rows")
    if y.shape != (n,):
        raise ValueError("labels must be a vector matching the training rows")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassError("training data must contain both classes")

    k = kernel_matrix(x, x, cfg.sigma)
    weights = np.where(y > 0, cfg.weight_polyp, 1.0)
    a = np.zeros((n + 1, n + 1))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    a[1:, 1:] = k + np.diag(1.0 / (cfg.gamma * weights))
    rhs = np.concatenate([[0.0], y])

    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"dual system is singular (cond={np.linalg.cond(a):.3e})") from exc

    residual = float(np.max(np.abs(a @ sol - rhs)))
    bound = RESIDUAL_TOL * float(np.max(np.abs(y)))
    if residual > bound:
        raise SingularSystemError(
            f"solver residual {residual:.3e} exceeds {bound:.3e} (cond={np.linalg.cond(a):.3e})"
        )
    return TrainedModel(
        support=x.copy(),
        alphas=sol[1:].copy(),
        bias=float(sol[0]),
        sigma=cfg.sigma,
        gamma=cfg.gamma,
        normalizer=normalizer,
        residual=residual,
    )


def fit(x_raw: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> TrainedModel:
    """Convenience wrapper: fit the normalizer on x_raw, then train."""
    cfg = cfg or TrainConfig()
    norm = fit_normalizer(x_raw)
    return train(norm.apply(x_raw), np.asarray(y), cfg, norm)


def predict_scores(model: TrainedModel, x_raw: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x_raw, dtype=np.float64))
    if x.shape[1] != model.support.shape[1]:
        raise ValueError(f"expected {model.support.shape[1]} features, got {x.shape[1]}")
    xn = model.normalizer.apply(x)
    k = kernel_matrix(xn, model.support, model.sigma)
    return k @ model.alphas + model.bias


def predict_score(model: TrainedModel, x_raw: np.ndarray) -> float:
    return float(predict_scores(model, x_raw)[0])


def predict_label(model: TrainedModel, x_raw: np.ndarray) -> int:
    """POLYP when the score is >= 0 (ties count as polyp), else NORMAL."""
    return POLYP if predict_score(model, x_raw) >= 0 else NORMAL


def predict_labels(model: TrainedModel, x_raw: np.ndarray) -> np.ndarray:
    scores = predict_scores(model, x_raw)
    return np.where(scores >= 0, POLYP, NORMAL)


def grid_search(
    x_raw: np.ndarray,
    y: np.ndarray,
    patients: list[str],
    gammas=(0.1, 1.0, 10.0, 100.0),
    sigma_scales=(0.25, 0.5, 1.0, 2.0),
    weight_polyp: float = 1.0,
) -> TrainConfig:
    """Pick (gamma, sigma) by leave-one-patient-out accuracy on the training
    patients. Ties keep the earliest grid entry."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    y = np.asarray(y)
    patients = np.asarray(patients)
    unique_patients = sorted(set(patients.tolist()))
    if len(unique_patients) < 2:
        raise ValueError("grid search needs at least two patients")

    best = None
    for gamma in gammas:
        for scale in sigma_scales:
            cfg = TrainConfig(gamma=gamma, sigma=DEFAULT_SIGMA * scale, weight_polyp=weight_polyp)
            correct = total = 0
            for held in unique_patients:
                mask = patients == held
                if mask.all() or not mask.any():
                    continue
                y_tr = y[~mask]
                if not (np.any(y_tr > 0) and np.any(y_tr < 0)):
                    continue
                model = fit(x_raw[~mask], y_tr, cfg)
                pred = predict_labels(model, x_raw[mask])
                correct += int(np.sum(pred == y[mask]))
                total += int(mask.sum())
            score = correct / total if total else -1.0
            if best is None or score > best[0]:
                best = (score, cfg)
    return best[1]


def save_model(model: TrainedModel, path: str | Path, config_hash: str | None = None) -> None:
    doc = {
        "sigma": model.sigma,
        "gamma": model.gamma,
        "bias": model.bias,
        "alphas": model.alphas.tolist(),
        "training_vectors": model.support.tolist(),
        "normalizer": {"min": model.normalizer.min_.tolist(), "max": model.normalizer.max_.tolist()},
        "feature_order_hash": model.feature_hash,
        "residual": model.residual,
    }
    if config_hash is not None:
        doc["config_hash"] = config_hash
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path: str | Path, expect_feature_hash: str | None = None) -> tuple[TrainedModel, dict]:
    doc = json.loads(Path(path).read_text())
    fhash = doc["feature_order_hash"]
    if expect_feature_hash is not None and fhash != expect_feature_hash:
        raise ValueError(f"{path}: model was built for a different feature layout")
    model = TrainedModel(
        support=np.array(doc["training_vectors"], dtype=np.float64),
        alphas=np.array(doc["alphas"], dtype=np.float64),
        bias=float(doc["bias"]),
        sigma=float(doc["sigma"]),
        gamma=float(doc["gamma"]),
        normalizer=Normalizer(np.array(doc["normalizer"]["min"]), np.array(doc["normalizer"]["max"])),
        residual=float(doc.get("residual", 0.0)),
        feature_hash=fhash,
    )
    return model, doc
