"""Teacher and student target-speaker extractors plus checkpointing."""

from .checkpoint import (
    CheckpointMeta,
    LoadedCheckpoint,
    build_model,
    config_from_dict,
    config_hash,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
    sidecar_path,
)
from .student import StudentConfig, StudentExtractor
from .teacher import TeacherConfig, TeacherExtractor

__all__ = [
    "CheckpointMeta",
    "LoadedCheckpoint",
    "StudentConfig",
    "StudentExtractor",
    "TeacherConfig",
    "TeacherExtractor",
    "build_model",
    "config_from_dict",
    "config_hash",
    "load_checkpoint",
    "parameter_count",
    "save_checkpoint",
    "sidecar_path",
]
