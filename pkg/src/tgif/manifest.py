"""Dataset manifests: one JSON record per line, one line per rendered scene.

Record fields (in this order): ``scene_id``, ``paths`` (mixture, dry_target,
reverberant_target, enrollment, and pseudo_target once distilled), ``K``,
``sir_db`` (null for K == 1), ``snr_db``, ``reverb_on_target``, ``group_id``,
``measured_input_sdr_db``, ``split``, plus ``target_speaker`` so losses with
a speaker-classification term can recover the class label without a side
table. ``paths`` are POSIX-relative to the manifest's own directory, which
keeps rebuilt datasets byte-comparable across output locations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import BadInputError

SPLITS = ("train", "val", "test", "adapt")
STEM_KEYS = ("mixture", "dry_target", "reverberant_target", "enrollment")


@dataclass
class ManifestRecord:
    scene_id: str
    paths: dict[str, str]
    K: int
    sir_db: float | None
    snr_db: float
    reverb_on_target: bool
    group_id: int | None
    measured_input_sdr_db: float
    split: str
    target_speaker: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise BadInputError(f"unknown split {self.split!r}")
        missing = [k for k in STEM_KEYS if k not in self.paths]
        if missing:
            raise BadInputError(f"record {self.scene_id}: missing paths {missing}")

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "paths": dict(self.paths),
            "K": self.K,
            "sir_db": self.sir_db,
            "snr_db": self.snr_db,
            "reverb_on_target": self.reverb_on_target,
            "group_id": self.group_id,
            "measured_input_sdr_db": self.measured_input_sdr_db,
            "split": self.split,
            "target_speaker": self.target_speaker,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        return cls(
            scene_id=d["scene_id"],
            paths=dict(d["paths"]),
            K=int(d["K"]),
            sir_db=None if d["sir_db"] is None else float(d["sir_db"]),
            snr_db=float(d["snr_db"]),
            reverb_on_target=bool(d["reverb_on_target"]),
            group_id=None if d["group_id"] is None else int(d["group_id"]),
            measured_input_sdr_db=float(d["measured_input_sdr_db"]),
            split=d["split"],
            target_speaker=d.get("target_speaker", ""),
        )

    def resolve(self, manifest_path: str | Path, key: str) -> Path:
        """Absolute path of one referenced stem."""
        if key not in self.paths:
            raise BadInputError(f"record {self.scene_id}: no {key!r} path")
        return (Path(manifest_path).parent / self.paths[key]).resolve()


def write_manifest(records: list[ManifestRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r.to_dict()) for r in records]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    path = Path(path)
    records = []
    for line in path.read_text().splitlines():
        if line.strip():
            records.append(ManifestRecord.from_dict(json.loads(line)))
    return records


def split_records(records: list[ManifestRecord], split: str | None) -> list[ManifestRecord]:
    if split is None:
        return list(records)
    return [r for r in records if r.split == split]
