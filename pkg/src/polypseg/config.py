"""Pipeline configuration: one JSON-serializable object holding every numeric
knob, plus the hash that stamps all derived artifacts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .lssvm import DEFAULT_SIGMA, TrainConfig
from .slic import SlicParams

DEFAULT_K_LIST = (25, 50, 100, 200, 400, 800)


@dataclass(frozen=True)
class PipelineConfig:
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    compactness: float = 10.0
    max_iters: int = 10
    min_region_frac: float = 0.25
    glcm_levels: int = 16
    tau: float = 0.5
    gamma: float = 10.0
    sigma: float = DEFAULT_SIGMA
    weight_polyp: float = 1.0
    grid_search: bool = False
    train_k: int = 100
    min_polyp_px: int = 150
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k_list", tuple(int(k) for k in self.k_list))
        if not self.k_list:
            raise ValueError("k_list must not be empty")
        if not (0 < self.tau <= 1):
            raise ValueError("tau must be in (0, 1]")
        if self.glcm_levels < 2:
            raise ValueError("glcm_levels must be >= 2")
        if self.min_polyp_px < 1:
            raise ValueError("min_polyp_px must be >= 1")
        # delegate range checks to the component types
        self.slic_params(self.k_list[0])
        self.train_config()

    def slic_params(self, k: int) -> SlicParams:
        return SlicParams(
            k=k,
            compactness=self.compactness,
            max_iters=self.max_iters,
            min_region_frac=self.min_region_frac,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(gamma=self.gamma, sigma=self.sigma, weight_polyp=self.weight_polyp)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_list"] = list(self.k_list)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_config(path: str | Path) -> PipelineConfig:
    return PipelineConfig.from_dict(json.loads(Path(path).read_text()))


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
