"""Dataset manifests: which frames exist, which patient they came from, and
their train/test assignment. Paths are stored relative to the manifest file
so a dataset directory can be moved wholesale."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError, PatientLeakageError

SPLITS = ("train", "test", "unassigned")


@dataclass(frozen=True)
class FrameEntry:
    frame_id: str
    patient_id: str
    image_path: Path
    mask_path: Path | None
    split: str


@dataclass(frozen=True)
class Manifest:
    frames: tuple[FrameEntry, ...]

    def split(self, name: str) -> list[FrameEntry]:
        return [f for f in self.frames if f.split == name]

    def by_id(self) -> dict[str, FrameEntry]:
        return {f.frame_id: f for f in self.frames}

    def patients(self, split: str | None = None) -> set[str]:
        return {f.patient_id for f in self.frames if split is None or f.split == split}


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    entries = []
    seen = set()
    for raw in doc.get("frames", []):
        fid = raw.get("frame_id")
        if not fid or fid in seen:
            raise ManifestError(f"{path}: missing or duplicate frame_id {fid!r}")
        seen.add(fid)
        split = raw.get("split", "unassigned")
        if split not in SPLITS:
            raise ManifestError(f"{path}: frame {fid}: unknown split {split!r}")
        image_path = base / raw["image_path"]
        if not image_path.exists():
            raise ManifestError(f"{path}: frame {fid}: image {image_path} does not exist")
        mask_path = None
        if raw.get("mask_path"):
            mask_path = base / raw["mask_path"]
            if not mask_path.exists():
                raise ManifestError(f"{path}: frame {fid}: mask {mask_path} does not exist")
        entries.append(
            FrameEntry(
                frame_id=fid,
                patient_id=str(raw.get("patient_id", fid)),
                image_path=image_path,
                mask_path=mask_path,
                split=split,
            )
        )
    return Manifest(tuple(entries))


def save_manifest(rows: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"frames": rows}, indent=2) + "\n")


def check_patient_split(manifest: Manifest) -> None:
    """Hard guard against the same patient feeding both splits."""
    overlap = manifest.patients("train") & manifest.patients("test")
    if overlap:
        raise PatientLeakageError(f"patient leakage: {sorted(overlap)} present in both train and test splits")
