"""One declarative configuration file for the whole pipeline.

INI section tables, for example::

    [run]
    seed = 7
    out_dir = runs/demo

    [synth]
    sample_rate = 16000
    duration_s = 10.0
    k_range = 1, 5
    sir_range_db = -5, 25
    snr_range_db = -5, 25
    splits = train:10, val:1

    [synth.group]
    snr_range_db = -15, 15
    splits = adapt:2, val:1, test:2

Unknown sections or keys are errors. Every key can be overridden from the
environment as ``TGIF_<SECTION>_<KEY>`` (dots become underscores, e.g.
``TGIF_SYNTH_GROUP_HOURS=0.1``); overrides are resolved against the schema,
longest section name first. Each command writes the resolved configuration
snapshot next to its outputs.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .assets import AssetGenConfig
from .adapt import AdaptConfig
from .errors import ConfigError
from .losses import LossConfig
from .models import StudentConfig, TeacherConfig
from .seeding import mix_seed
from .synth import SynthConfig
from .training import TrainConfig


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_pair(cast):
    def parse(text: str):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"expected two comma-separated values, got {text!r}")
        return (cast(parts[0]), cast(parts[1]))

    return parse


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_weights(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"expected name:weight entries, got {text!r}")
        name, weight = part.split(":", 1)
        out[name.strip()] = float(weight)
    if not out:
        raise ConfigError(f"empty weight map: {text!r}")
    return out


_SYNTH_KEYS = {
    "sample_rate": int,
    "duration_s": float,
    "k_range": _parse_pair(int),
    "sir_range_db": _parse_pair(float),
    "snr_range_db": _parse_pair(float),
    "reverb_prob": float,
    "enrollment_duration_s": float,
    "hours": float,
    "splits": _parse_weights,
    "seed": int,
    "clip_k_to_group": _parse_bool,
}

SCHEMA: dict[str, dict] = {
    "run": {"seed": int, "out_dir": str},
    "assets": {
        "dir": str,
        "generate": _parse_bool,
        "sample_rate": int,
        "utterance_s": float,
        "utterances_per_speaker": int,
        "generic_speakers": int,
        "group_speakers": int,
        "generic_rooms": int,
        "group_rooms": int,
        "rirs_per_room": int,
        "noise_clips_per_domain": int,
        "noise_s": float,
        "n_groups": int,
        "group_size": int,
        "seed": int,
    },
    "synth": dict(_SYNTH_KEYS),
    "synth.group": dict(_SYNTH_KEYS),
    "model.student": {
        "encoder_filters": int,
        "encoder_kernel": int,
        "masker_blocks": int,
        "fusion_index": int,
        "hidden_size": int,
        "embed_dim": int,
        "stack_size": int,
    },
    "model.teacher": {
        "encoder_kernels": _parse_int_tuple,
        "encoder_filters": int,
        "separator_blocks": int,
        "stack_size": int,
        "hidden_size": int,
        "speaker_encoder_depth": int,
        "embed_dim": int,
        "shared_twin_encoders": _parse_bool,
    },
    "train": {
        "max_epochs": int,
        "batch_size_teacher": int,
        "batch_size_student": int,
        "lr0": float,
        "lr_patience": int,
        "lr_factor": float,
        "early_stop_patience": int,
        "crop_s": float,
        "seed": int,
        "gamma_teacher": float,
        "gamma_student": float,
    },
    "adapt": {
        "lr": float,
        "epochs": int,
        "gamma": float,
        "segment_s": float,
        "batch_size": int,
        "seed": int,
        "log_group_val": _parse_bool,
    },
    "eval": {"split": str},
    "report": {"bin_width_db": float, "baseline": str},
}

ENV_PREFIX = "TGIF_"

#: keys shared by generic and group synthesis unless [synth.group] overrides;
#: the group flavor gets its own defaults for the remaining keys
_SYNTH_SHARED = (
    "sample_rate",
    "duration_s",
    "k_range",
    "sir_range_db",
    "reverb_prob",
    "enrollment_duration_s",
    "seed",
    "clip_k_to_group",
)


def _env_overrides(environ) -> list[tuple[str, str, str]]:
    """(section, key, raw value) triples from TGIF_* variables."""
    # longest normalized section name first so SYNTH_GROUP beats SYNTH
    sections = sorted(SCHEMA, key=lambda s: -len(s))
    out = []
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        body = name[len(ENV_PREFIX):].lower()
        for section in sections:
            prefix = section.replace(".", "_") + "_"
            if body.startswith(prefix):
                key = body[len(prefix):]
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{name}: unknown key {key!r} in [{section}]")
                out.append((section, key, raw))
                break
        else:
            raise ConfigError(f"{name}: no section matches")
    return out


@dataclass
class RunConfig:
    """Typed view over the parsed (and env-overridden) configuration."""

    values: dict[str, dict] = field(default_factory=dict)
    source_path: Path | None = None

    @classmethod
    def load(cls, path: str | Path | None, environ=None) -> "RunConfig":
        environ = os.environ if environ is None else environ
        values: dict[str, dict] = {}
        raw: dict[str, dict[str, str]] = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file {path} not found")
            parser = configparser.ConfigParser()
            parser.optionxform = str  # keep key case as written
            parser.read(path)
            for section in parser.sections():
                if section not in SCHEMA:
                    raise ConfigError(f"unknown config section [{section}]")
                for key, text in parser.items(section):
                    if key not in SCHEMA[section]:
                        raise ConfigError(f"unknown key {key!r} in [{section}]")
                    raw.setdefault(section, {})[key] = text
        for section, key, text in _env_overrides(environ):
            raw.setdefault(section, {})[key] = text
        for section, entries in raw.items():
            for key, text in entries.items():
                parse = SCHEMA[section][key]
                try:
                    values.setdefault(section, {})[key] = parse(text)
                except ConfigError:
                    raise
                except Exception as exc:
                    raise ConfigError(f"[{section}] {key} = {text!r}: {exc}") from exc
        return cls(values=values, source_path=path if path else None)

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def section(self, name: str) -> dict:
        return dict(self.values.get(name, {}))

    # -- typed accessors ---------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed", 0))

    @property
    def out_dir(self) -> Path:
        return Path(self.get("run", "out_dir", "runs/tgif"))

    @property
    def assets_dir(self) -> Path:
        configured = self.get("assets", "dir")
        return Path(configured) if configured else self.out_dir / "assets"

    @property
    def generate_assets(self) -> bool:
        return bool(self.get("assets", "generate", True))

    def asset_gen_config(self) -> AssetGenConfig:
        entries = {k: v for k, v in self.section("assets").items() if k not in ("dir", "generate")}
        entries.setdefault("seed", self.seed)
        entries.setdefault("sample_rate", self.get("synth", "sample_rate", 16000))
        return AssetGenConfig(**entries)

    def synth_config(self, role: str, group_id: int | None = None) -> SynthConfig:
        base = self.section("synth")
        base.setdefault("seed", self.seed)
        if role == "generic":
            return SynthConfig(**base)
        if role != "group":
            raise ConfigError(f"unknown synth role {role!r}")
        entries = {k: v for k, v in base.items() if k in _SYNTH_SHARED}
        entries.update(self.section("synth.group"))
        cfg = SynthConfig.group_default(**entries)
        if group_id is not None:
            # distinct, reproducible stream per group
            cfg = dataclasses.replace(cfg, seed=mix_seed(cfg.seed, "group", group_id))
        return cfg

    def student_config(self, inventory_size: int = 16) -> StudentConfig:
        return StudentConfig(inventory_size=inventory_size, **self.section("model.student"))

    def teacher_config(self, inventory_size: int = 16) -> TeacherConfig:
        return TeacherConfig(inventory_size=inventory_size, **self.section("model.teacher"))

    def train_config(self, role: str) -> TrainConfig:
        section = self.section("train")
        batch = section.pop(f"batch_size_{role}", None)
        section.pop("batch_size_teacher", None)
        section.pop("batch_size_student", None)
        section.pop("gamma_teacher", None)
        section.pop("gamma_student", None)
        section.setdefault("seed", self.seed)
        return TrainConfig(batch_size=batch, **section)

    def loss_config(self, role: str) -> LossConfig:
        gamma = self.get("train", f"gamma_{role}")
        return LossConfig.for_role(role, gamma=gamma)

    def adapt_config(self, mode: str, group_id: int | None = None) -> AdaptConfig:
        section = self.section("adapt")
        section.setdefault("seed", self.seed)
        return AdaptConfig(mode=mode, group_id=group_id, **section)

    # -- snapshot ------------------------------------------------------------

    def snapshot_text(self) -> str:
        lines = ["# resolved configuration (file + environment overrides)"]
        for section in SCHEMA:
            entries = self.values.get(section)
            if not entries:
                continue
            lines.append(f"[{section}]")
            for key, value in entries.items():
                lines.append(f"{key} = {_render_value(value)}")
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"

    def write_snapshot(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.snapshot_text())
        return path


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    if isinstance(value, dict):
        return ", ".join(f"{k}:{v}" for k, v in value.items())
    return str(value)
