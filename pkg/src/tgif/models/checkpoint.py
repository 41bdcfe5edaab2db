"""Checkpoint persistence.

A checkpoint is a torch blob (weights, architecture config, RNG states) plus
a human-readable JSON sidecar carrying provenance: the config hash that must
match the architecture loading it, the role, training position, and lineage
("pretrain" for generalists, "adapted-from:<parent hash>" for specialists).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import BadInputError, RoleMismatchError
from .student import StudentConfig, StudentExtractor
from .teacher import TeacherConfig, TeacherExtractor

ROLES = ("teacher", "student")


def build_model(role: str, config: StudentConfig | TeacherConfig) -> nn.Module:
    if role == "student":
        if not isinstance(config, StudentConfig):
            raise BadInputError("student role needs a StudentConfig")
        return StudentExtractor(config)
    if role == "teacher":
        if not isinstance(config, TeacherConfig):
            raise BadInputError("teacher role needs a TeacherConfig")
        return TeacherExtractor(config)
    raise BadInputError(f"unknown role {role!r}")


def config_from_dict(role: str, d: dict) -> StudentConfig | TeacherConfig:
    if role == "student":
        return StudentConfig(**d)
    if role == "teacher":
        cfg = dict(d)
        cfg["encoder_kernels"] = tuple(cfg["encoder_kernels"])
        return TeacherConfig(**cfg)
    raise BadInputError(f"unknown role {role!r}")


def config_hash(role: str, config: StudentConfig | TeacherConfig) -> str:
    payload = json.dumps(
        {"role": role, "config": dataclasses.asdict(config)}, sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


@dataclass
class CheckpointMeta:
    role: str
    config_hash: str
    epoch: int
    best_val_loss: float | None
    lineage: str
    group_id: int | None
    inventory: list[str]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class LoadedCheckpoint:
    path: Path
    model: nn.Module
    config: StudentConfig | TeacherConfig
    meta: CheckpointMeta


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def save_checkpoint(
    path: str | Path,
    model: nn.Module,
    role: str,
    config: StudentConfig | TeacherConfig,
    epoch: int,
    best_val_loss: float | None = None,
    lineage: str = "pretrain",
    group_id: int | None = None,
    inventory: list[str] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = CheckpointMeta(
        role=role,
        config_hash=config_hash(role, config),
        epoch=int(epoch),
        best_val_loss=None if best_val_loss is None else float(best_val_loss),
        lineage=lineage,
        group_id=group_id,
        inventory=list(inventory or []),
    )
    blob = {
        "state_dict": model.state_dict(),
        "config": dataclasses.asdict(config),
        "meta": meta.to_dict(),
        "rng": {
            "torch": torch.get_rng_state(),
            "numpy": np.random.get_state()[1].tolist(),
        },
    }
    torch.save(blob, path)
    sidecar_path(path).write_text(json.dumps(meta.to_dict(), indent=2) + "\n")
    return path


def load_checkpoint(path: str | Path, expected_role: str | None = None) -> LoadedCheckpoint:
    path = Path(path)
    blob = torch.load(path, map_location="cpu", weights_only=True)
    meta = CheckpointMeta(**blob["meta"])
    if expected_role is not None and meta.role != expected_role:
        raise RoleMismatchError(f"{path}: role {meta.role!r}, expected {expected_role!r}")
    config = config_from_dict(meta.role, blob["config"])
    if config_hash(meta.role, config) != meta.config_hash:
        raise BadInputError(f"{path}: config hash mismatch, checkpoint corrupt")
    model = build_model(meta.role, config)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return LoadedCheckpoint(path=path, model=model, config=config, meta=meta)
