"""Test-time familiarization to a talker group.

``distill_targets`` runs the frozen teacher over a group's mixtures once and
caches the estimates on disk as pseudo targets. ``adapt`` then fine-tunes a
pretrained student generalist for an exact number of epochs against either
those pseudo targets (kd mode) or the ground-truth dry targets (oracle
mode); the target substitution is the only difference between the two code
paths. There is no early stopping: the per-epoch group-val SI-SDRi is logged
for analysis only and never influences training.
"""

from __future__ import annotations

import copy
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, RoleMismatchError
from .evaluate import evaluate, mean_si_sdri, resolve_model
from .losses import LossConfig
from .manifest import read_manifest, write_manifest
from .models import LoadedCheckpoint, load_checkpoint, save_checkpoint
from .seeding import mix_seed
from .training import (
    ManifestAudioDataset,
    TrainLog,
    _mtl_terms,
    dataset_si_sdri,
)
from .wavio import read_wav, write_wav

MODES = ("kd", "oracle")


@dataclass
class AdaptConfig:
    mode: str = "kd"
    lr: float = 1e-5
    epochs: int = 120
    gamma: float = 0.0          # student adaptation is reconstruction-only
    segment_s: float = 10.0     # documented segment length; clips are used whole
    batch_size: int = 8
    seed: int = 0
    group_id: int | None = None
    log_group_val: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 0 or self.lr < 0 or self.gamma < 0:
            raise ConfigError("bad adaptation hyperparameters")


def _pseudo_rel_path(mixture_rel: str) -> str:
    # stems/<scene>.mixture.wav -> stems/<scene>.pseudo_target.wav
    if mixture_rel.endswith(".mixture.wav"):
        return mixture_rel[: -len(".mixture.wav")] + ".pseudo_target.wav"
    return mixture_rel + ".pseudo_target.wav"


def distill_targets(
    teacher,
    manifest_path: str | Path,
    splits: tuple[str, ...] = ("adapt", "val"),
) -> int:
    """Write the teacher's estimate for every record in the given splits and
    register it as the record's ``pseudo_target``. Idempotent for a fixed
    checkpoint. Returns the number of records updated."""
    manifest_path = Path(manifest_path)
    if isinstance(teacher, (str, Path)):
        teacher = load_checkpoint(teacher, expected_role="teacher")
    if isinstance(teacher, LoadedCheckpoint) and teacher.meta.role != "teacher":
        raise RoleMismatchError(f"{teacher.path}: not a teacher checkpoint")
    fn = resolve_model(teacher)

    records = read_manifest(manifest_path)
    updated = 0
    for rec in records:
        if rec.split not in splits:
            continue
        mix = read_wav(rec.resolve(manifest_path, "mixture"))
        enr = read_wav(rec.resolve(manifest_path, "enrollment"))
        with torch.no_grad():
            est = fn(mix, enr)
        if len(est) != len(mix):
            raise ConfigError(
                f"teacher produced {len(est)} samples for a {len(mix)}-sample mixture"
            )
        rel = _pseudo_rel_path(rec.paths["mixture"])
        write_wav(manifest_path.parent / rel, est)
        rec.paths["pseudo_target"] = rel
        updated += 1
    write_manifest(records, manifest_path)
    return updated


@dataclass
class AdaptResult:
    checkpoint_path: Path
    log_path: Path
    mode: str
    group_id: int | None
    epochs_run: int
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    val_si_sdri: list[float] = field(default_factory=list)  # analysis only


_VAL_CACHE: dict[tuple, ManifestAudioDataset] = {}


def _val_dataset(manifest: Path, split: str, seed: int) -> ManifestAudioDataset:
    key = (str(manifest), manifest.stat().st_mtime_ns, split, seed)
    if key not in _VAL_CACHE:
        _VAL_CACHE[key] = ManifestAudioDataset(manifest, split, crop_s=None, seed=seed)
    return _VAL_CACHE[key]


def adapt(
    student_init,
    group_manifest: str | Path,
    cfg: AdaptConfig,
    out_dir: str | Path,
    adapt_split: str = "adapt",
    val_split: str = "val",
) -> AdaptResult:
    """Fine-tune a student generalist on one group for exactly cfg.epochs
    and return the final-epoch specialist checkpoint."""
    group_manifest = Path(group_manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(student_init, (str, Path)):
        student_init = load_checkpoint(student_init, expected_role="student")
    if student_init.meta.role != "student":
        raise RoleMismatchError("adaptation fine-tunes student checkpoints only")

    target_key = "pseudo_target" if cfg.mode == "kd" else "dry_target"
    dataset = ManifestAudioDataset(
        group_manifest,
        adapt_split,
        target_key=target_key,
        inventory=student_init.meta.inventory,
        crop_s=None,  # group segments are used whole
        seed=cfg.seed,
    )
    group_id = cfg.group_id
    if group_id is None:
        group_id = dataset.records[0].group_id

    # adapt a copy so the caller's generalist stays pristine
    model = copy.deepcopy(student_init.model)
    torch.manual_seed(mix_seed(cfg.seed, "adapt", group_id or 0))
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_cfg = LossConfig(gamma=cfg.gamma)
    log = TrainLog(out_dir / f"adapt_log_{cfg.mode}.jsonl")

    result = AdaptResult(
        checkpoint_path=out_dir / f"specialist_{cfg.mode}.pt",
        log_path=log.path,
        mode=cfg.mode,
        group_id=group_id,
        epochs_run=0,
    )
    started = time.monotonic()
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        recons, ces = [], []
        for batch in dataset.epoch_batches(epoch, cfg.batch_size, shuffle=True):
            tensor_total, recon, ce = _mtl_terms(model, batch, cfg.gamma, loss_cfg)
            optimizer.zero_grad()
            tensor_total.backward()
            optimizer.step()
            recons.append(recon)
            ces.append(ce)
            result.step_losses.append(recon + cfg.gamma * ce)
        epoch_recon = float(np.mean(recons))
        epoch_ce = float(np.mean(ces))
        epoch_loss = epoch_recon + cfg.gamma * epoch_ce
        result.epoch_losses.append(epoch_loss)
        result.epochs_run = epoch
        wall = round(time.monotonic() - started, 3)
        log.write(
            epoch=epoch, split="adapt", loss=epoch_loss, si_sdr_term=epoch_recon,
            ce_term=epoch_ce, lr=cfg.lr, wall_s=wall,
            group_id=group_id, mode=cfg.mode,
        )
        if cfg.log_group_val:
            try:
                val_ds = _val_dataset(group_manifest, val_split, cfg.seed)
                score = dataset_si_sdri(model, val_ds)
            except ConfigError:
                score = math.nan  # no val split; keep adapting
            result.val_si_sdri.append(score)
            log.write(
                epoch=epoch, split="group_val", si_sdri_db=score,
                lr=cfg.lr, wall_s=wall, group_id=group_id, mode=cfg.mode,
            )

    save_checkpoint(
        result.checkpoint_path,
        model,
        "student",
        student_init.config,
        epoch=cfg.epochs,
        best_val_loss=None,
        lineage=f"adapted-from:{student_init.meta.config_hash}",
        group_id=group_id,
        inventory=student_init.meta.inventory,
    )
    return result


@dataclass
class GroupSummary:
    group_id: int
    status: str                       # "ok" | "error"
    n_test: int = 0
    si_sdri_generalist: float = math.nan
    si_sdri_kd: float = math.nan
    si_sdri_oracle: float = math.nan
    kd_checkpoint: str | None = None
    oracle_checkpoint: str | None = None
    error: str | None = None


def _suite_worker(args) -> GroupSummary:
    (group_id, manifest, teacher_path, student_path, cfg_dict, out_dir, include_oracle) = args
    try:
        distill_targets(teacher_path, manifest)
        group_dir = Path(out_dir) / f"group{group_id}"
        kd_cfg = AdaptConfig(mode="kd", group_id=group_id, **cfg_dict)
        kd = adapt(student_path, manifest, kd_cfg, group_dir)
        oracle = None
        if include_oracle:
            oracle_cfg = AdaptConfig(mode="oracle", group_id=group_id, **cfg_dict)
            oracle = adapt(student_path, manifest, oracle_cfg, group_dir)
        test_generalist = evaluate(student_path, manifest, "test", model_id="generalist")
        test_kd = evaluate(kd.checkpoint_path, manifest, "test", model_id="kd")
        summary = GroupSummary(
            group_id=group_id,
            status="ok",
            n_test=len(test_generalist),
            si_sdri_generalist=mean_si_sdri(test_generalist),
            si_sdri_kd=mean_si_sdri(test_kd),
            kd_checkpoint=str(kd.checkpoint_path),
        )
        if oracle is not None:
            test_oracle = evaluate(oracle.checkpoint_path, manifest, "test", model_id="oracle")
            summary.si_sdri_oracle = mean_si_sdri(test_oracle)
            summary.oracle_checkpoint = str(oracle.checkpoint_path)
        return summary
    except Exception as exc:  # one group's failure must not abort the others
        return GroupSummary(
            group_id=group_id, status="error", error=f"{type(exc).__name__}: {exc}"
        )


def run_group_suite(
    teacher,
    student_init,
    group_manifests: dict[int, str | Path],
    cfg: AdaptConfig | None = None,
    out_dir: str | Path = "groups",
    include_oracle: bool = True,
    jobs: int = 1,
) -> list[GroupSummary]:
    """Independent adaptation per group (parallelizable via ``jobs``);
    returns one generalist-vs-specialist summary row per group."""
    cfg = cfg or AdaptConfig()
    cfg_dict = {
        "lr": cfg.lr, "epochs": cfg.epochs, "gamma": cfg.gamma,
        "segment_s": cfg.segment_s, "batch_size": cfg.batch_size,
        "seed": cfg.seed, "log_group_val": cfg.log_group_val,
    }
    teacher_path = str(teacher.path if isinstance(teacher, LoadedCheckpoint) else teacher)
    student_path = str(
        student_init.path if isinstance(student_init, LoadedCheckpoint) else student_init
    )
    tasks = [
        (gid, str(group_manifests[gid]), teacher_path, student_path, cfg_dict,
         str(out_dir), include_oracle)
        for gid in sorted(group_manifests)
    ]
    if jobs <= 1:
        return [_suite_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_suite_worker, tasks))
