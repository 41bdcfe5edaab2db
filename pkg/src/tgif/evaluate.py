"""Model evaluation over manifests: one SI-SDR record per scene.

Infinite per-example values are stored clamped to +/-60 dB so the means
downstream stay finite; ``si_sdri_db`` is always the difference of the two
clamped fields. Per-item failures become error rows instead of aborting the
run.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import torch
from torch import nn

from .audio import AudioClip, clamp_db, input_sdr, si_sdr
from .errors import TgifError
from .manifest import read_manifest, split_records
from .models import LoadedCheckpoint, load_checkpoint
from .models.inference import model_fn
from .wavio import read_wav

ModelLike = "nn.Module | LoadedCheckpoint | str | Path | Callable[[AudioClip, AudioClip], AudioClip]"


@dataclass
class EvalRecord:
    scene_id: str
    model_id: str
    K: int
    group_id: int | None
    input_si_sdr_db: float
    input_sdr_db: float
    output_si_sdr_db: float
    si_sdri_db: float
    error: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        return cls(**d)


def resolve_model(model) -> Callable[[AudioClip, AudioClip], AudioClip]:
    """Accept a checkpoint path, a loaded checkpoint, a module, or a plain
    (mixture, enrollment) -> estimate callable."""
    if isinstance(model, (str, Path)):
        model = load_checkpoint(model)
    if isinstance(model, LoadedCheckpoint):
        model = model.model
    if isinstance(model, nn.Module):
        return model_fn(model)
    if callable(model):
        return model
    raise TgifError(f"cannot evaluate object of type {type(model)!r}")


def identity_model(mixture: AudioClip, enrollment: AudioClip) -> AudioClip:
    """Pass-through baseline: output == mixture, SI-SDRi == 0 by definition."""
    return mixture


def evaluate(
    model,
    manifest_path: str | Path,
    split: str | None = "test",
    model_id: str = "model",
) -> list[EvalRecord]:
    """One EvalRecord per manifest item in the split (manifest order)."""
    manifest_path = Path(manifest_path)
    fn = resolve_model(model)
    records = split_records(read_manifest(manifest_path), split)
    out: list[EvalRecord] = []
    for rec in records:
        try:
            mix = read_wav(rec.resolve(manifest_path, "mixture"))
            dry = read_wav(rec.resolve(manifest_path, "dry_target"))
            enr = read_wav(rec.resolve(manifest_path, "enrollment"))
            with torch.no_grad():
                est = fn(mix, enr)
            in_si = clamp_db(si_sdr(mix, dry))
            out_si = clamp_db(si_sdr(est, dry))
            out.append(
                EvalRecord(
                    scene_id=rec.scene_id,
                    model_id=model_id,
                    K=rec.K,
                    group_id=rec.group_id,
                    input_si_sdr_db=in_si,
                    input_sdr_db=clamp_db(input_sdr(mix, dry)),
                    output_si_sdr_db=out_si,
                    si_sdri_db=out_si - in_si,
                    error=None,
                )
            )
        except TgifError as exc:
            out.append(
                EvalRecord(
                    scene_id=rec.scene_id,
                    model_id=model_id,
                    K=rec.K,
                    group_id=rec.group_id,
                    input_si_sdr_db=math.nan,
                    input_sdr_db=math.nan,
                    output_si_sdr_db=math.nan,
                    si_sdri_db=math.nan,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return out


def mean_si_sdri(records: list[EvalRecord], min_k: int | None = None) -> float:
    """Mean SI-SDRi over good rows, optionally restricted to K >= min_k."""
    vals = [
        r.si_sdri_db
        for r in records
        if r.error is None and (min_k is None or r.K >= min_k)
    ]
    if not vals:
        return math.nan
    return float(sum(vals) / len(vals))


def write_records(records: list[EvalRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r.to_dict()) for r in records) + "\n")
    return path


def read_records(path: str | Path) -> list[EvalRecord]:
    return [
        EvalRecord.from_dict(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
