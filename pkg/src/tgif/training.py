"""Generalist pretraining: datasets, the plateau schedule, and the epoch loop.

Scheduling semantics (validation 1 initializes the best loss):

* the learning rate halves once ``lr_patience`` consecutive validations pass
  without improvement, so with a stagnant stream the first halving lands
  exactly on validation ``lr_patience + 1``;
* training stops once ``early_stop_patience`` consecutive validations pass
  without improvement.

All shuffling and cropping is keyed by ``mix_seed(seed, ...)``, so a rerun
with the same seed reproduces the same batch stream.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audio import AudioClip, clamp_db, si_sdr
from .errors import AssetNotFoundError, ConfigError, DivergedError
from .losses import LossConfig, loss_ce, loss_si_sdr
from .manifest import read_manifest, split_records
from .models import save_checkpoint
from .models.checkpoint import build_model
from .models.student import StudentConfig
from .models.teacher import TeacherConfig
from .seeding import make_rng, mix_seed
from .synth import fit_length
from .wavio import read_wav

#: paper-order batch defaults: 8 for the teacher, 16 for the student
DEFAULT_BATCH = {"teacher": 8, "student": 16}


@dataclass
class TrainConfig:
    max_epochs: int = 1000
    batch_size: int | None = None  # per-role default when None
    lr0: float = 1e-3
    lr_patience: int = 20
    lr_factor: float = 0.5
    early_stop_patience: int = 120
    crop_s: float | None = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.lr0 <= 0 or not 0 < self.lr_factor < 1:
            raise ConfigError("bad training hyperparameters")
        if self.lr_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be >= 1")

    def resolved_batch(self, role: str) -> int:
        return self.batch_size if self.batch_size is not None else DEFAULT_BATCH[role]


@dataclass
class ScheduleEvent:
    index: int          # 1-based validation index
    loss: float
    improved: bool
    lr: float           # in effect after this validation
    halved: bool
    should_stop: bool
    bad_count: int      # consecutive non-improving validations


class PlateauController:
    """Tracks validation losses; halves the lr on plateaus, stops on longer ones."""

    def __init__(
        self,
        lr0: float,
        factor: float = 0.5,
        lr_patience: int = 20,
        stop_patience: int = 120,
    ):
        self.lr = lr0
        self.factor = factor
        self.lr_patience = lr_patience
        self.stop_patience = stop_patience
        self.best = math.inf
        self.best_index = 0
        self.index = 0
        self._bad = 0
        self._lr_bad = 0
        self.events: list[ScheduleEvent] = []

    def observe(self, loss: float) -> ScheduleEvent:
        self.index += 1
        improved = loss < self.best
        halved = False
        if improved:
            self.best = loss
            self.best_index = self.index
            self._bad = 0
            self._lr_bad = 0
        else:
            self._bad += 1
            self._lr_bad += 1
        should_stop = self._bad >= self.stop_patience
        if not should_stop and not improved and self._lr_bad >= self.lr_patience:
            self.lr *= self.factor
            self._lr_bad = 0
            halved = True
        event = ScheduleEvent(
            index=self.index,
            loss=float(loss),
            improved=improved,
            lr=self.lr,
            halved=halved,
            should_stop=should_stop,
            bad_count=self._bad,
        )
        self.events.append(event)
        return event


class ManifestAudioDataset:
    """In-memory dataset over one manifest split.

    Loads mixture/target/enrollment stems once (float32), hands out
    deterministic per-epoch batches. Mixture and target share the crop
    offset so the pair stays sample-aligned.
    """

    def __init__(
        self,
        manifest_path: str | Path,
        split: str | None,
        target_key: str = "dry_target",
        inventory: list[str] | None = None,
        crop_s: float | None = None,
        seed: int = 0,
    ):
        self.manifest_path = Path(manifest_path)
        self.records = split_records(read_manifest(self.manifest_path), split)
        if not self.records:
            raise ConfigError(f"{manifest_path}: no records in split {split!r}")
        self.target_key = target_key
        self.seed = seed
        inv_index = {s: i for i, s in enumerate(inventory)} if inventory else {}
        self.items = []
        self.sample_rate: int | None = None
        for rec in self.records:
            if target_key not in rec.paths:
                raise AssetNotFoundError(
                    f"record {rec.scene_id} has no {target_key!r} stem "
                    "(distill pseudo targets first?)"
                )
            mix = read_wav(rec.resolve(self.manifest_path, "mixture"))
            tgt = read_wav(rec.resolve(self.manifest_path, target_key))
            enr = read_wav(rec.resolve(self.manifest_path, "enrollment"))
            if self.sample_rate is None:
                self.sample_rate = mix.sample_rate
            self.items.append(
                {
                    "record": rec,
                    "mixture": mix.samples.astype(np.float32),
                    "target": tgt.samples.astype(np.float32),
                    "enrollment": enr.samples.astype(np.float32),
                    "label": inv_index.get(rec.target_speaker, -1),
                }
            )
        self.crop = None if crop_s is None else int(round(crop_s * self.sample_rate))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def speakers(self) -> list[str]:
        return sorted({r.target_speaker for r in self.records})

    def _view(self, item: dict, epoch: int, idx: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mix, tgt, enr = item["mixture"], item["target"], item["enrollment"]
        if self.crop is None:
            return mix, tgt, enr
        n = self.crop
        rng = make_rng(self.seed, "crop", epoch, idx)
        if len(mix) > n:
            off = int(rng.integers(0, len(mix) - n + 1))
            mix, tgt = mix[off : off + n], tgt[off : off + n]
        elif len(mix) < n:
            phase = int(rng.integers(0, len(mix)))
            sel = (phase + np.arange(n)) % len(mix)
            mix, tgt = mix[sel], tgt[sel]
        enr = fit_length(enr, n, rng).astype(np.float32)
        return mix, tgt, enr

    def epoch_batches(self, epoch: int, batch_size: int, shuffle: bool = True):
        order = np.arange(len(self.items))
        if shuffle:
            order = make_rng(self.seed, "perm", epoch).permutation(order)
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            mixes, tgts, enrs, labels = [], [], [], []
            for idx in chunk:
                m, t, e = self._view(self.items[idx], epoch, int(idx))
                mixes.append(m)
                tgts.append(t)
                enrs.append(e)
                labels.append(self.items[idx]["label"])
            yield {
                "mixture": torch.from_numpy(np.stack(mixes)),
                "target": torch.from_numpy(np.stack(tgts)),
                "enrollment": torch.from_numpy(np.stack(enrs)),
                "label": torch.tensor(labels, dtype=torch.long),
            }


class TrainLog:
    """Append-only JSONL training log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, **fields) -> None:
        with self.path.open("a") as f:
            f.write(json.dumps(fields) + "\n")


@dataclass
class TrainResult:
    best_checkpoint: Path
    last_checkpoint: Path
    log_path: Path
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    lr_events: list[int] = field(default_factory=list)   # validation indices of halvings
    trajectory: list[dict] = field(default_factory=list)  # per-epoch train/val summaries


def _mtl_terms(model, batch, gamma: float, loss_cfg: LossConfig):
    """One forward pass; returns (backprop tensor, recon item, ce item)."""
    est, logits = model(batch["mixture"], batch["enrollment"])
    recon = loss_si_sdr(
        est, batch["target"], eps=loss_cfg.sisdr_eps, clamp_db=loss_cfg.clamp_db
    )
    ce_value = 0.0
    total = recon
    if gamma > 0.0:
        mask = batch["label"] >= 0
        if bool(mask.any()):
            ce = loss_ce(logits[mask], batch["label"][mask])
            total = recon + gamma * ce
            ce_value = float(ce.item())
    return total, float(recon.item()), ce_value


def _epoch_pass(model, dataset, epoch, batch_size, gamma, loss_cfg, optimizer=None):
    """Mean (total, recon, ce) over one epoch; trains when optimizer given."""
    totals, recons, ces = [], [], []
    shuffle = optimizer is not None
    for batch in dataset.epoch_batches(epoch, batch_size, shuffle=shuffle):
        if optimizer is None:
            with torch.no_grad():
                tensor_total, recon, ce = _mtl_terms(model, batch, gamma, loss_cfg)
        else:
            tensor_total, recon, ce = _mtl_terms(model, batch, gamma, loss_cfg)
            if not math.isfinite(float(tensor_total.item())):
                raise DivergedError("non-finite training loss")
            optimizer.zero_grad()
            tensor_total.backward()
            optimizer.step()
        # compose in float64 so the logged decomposition is exact
        totals.append(recon + gamma * ce)
        recons.append(recon)
        ces.append(ce)
    return float(np.mean(totals)), float(np.mean(recons)), float(np.mean(ces))


def pretrain(
    role: str,
    model_cfg: StudentConfig | TeacherConfig,
    train_manifest: str | Path,
    val_manifest: str | Path,
    out_dir: str | Path,
    train_cfg: TrainConfig | None = None,
    loss_cfg: LossConfig | None = None,
    train_split: str = "train",
    val_split: str = "val",
    inventory: list[str] | None = None,
) -> TrainResult:
    """Train a generalist and return the best-validation checkpoint."""
    train_cfg = train_cfg or TrainConfig()
    loss_cfg = loss_cfg or LossConfig.for_role(role)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_set = ManifestAudioDataset(
        train_manifest, train_split, crop_s=train_cfg.crop_s, seed=train_cfg.seed
    )
    if inventory is None:
        inventory = train_set.speakers
    inv_index = {s: i for i, s in enumerate(inventory)}
    for item in train_set.items:
        item["label"] = inv_index.get(item["record"].target_speaker, -1)
    val_set = ManifestAudioDataset(
        val_manifest,
        val_split,
        inventory=inventory,
        crop_s=train_cfg.crop_s,
        seed=mix_seed(train_cfg.seed, "val"),
    )
    if model_cfg.inventory_size != len(inventory):
        model_cfg = dataclasses.replace(model_cfg, inventory_size=len(inventory))

    torch.manual_seed(mix_seed(train_cfg.seed, "init", role))
    model = build_model(role, model_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr0)
    controller = PlateauController(
        train_cfg.lr0,
        factor=train_cfg.lr_factor,
        lr_patience=train_cfg.lr_patience,
        stop_patience=train_cfg.early_stop_patience,
    )
    log = TrainLog(out_dir / "train_log.jsonl")
    batch_size = train_cfg.resolved_batch(role)
    best_path = out_dir / "best.pt"
    last_path = out_dir / "last.pt"
    gamma = loss_cfg.gamma

    result = TrainResult(
        best_checkpoint=best_path,
        last_checkpoint=last_path,
        log_path=log.path,
        best_epoch=0,
        best_val_loss=math.inf,
        epochs_run=0,
    )
    started = time.monotonic()
    have_best = False
    for epoch in range(1, train_cfg.max_epochs + 1):
        model.train()
        try:
            tr_total, tr_recon, tr_ce = _epoch_pass(
                model, train_set, epoch, batch_size, gamma, loss_cfg, optimizer
            )
        except DivergedError as exc:
            raise DivergedError(
                f"diverged at epoch {epoch}",
                last_good=str(best_path) if have_best else None,
            ) from exc
        model.eval()
        va_total, va_recon, va_ce = _epoch_pass(
            model, val_set, 0, batch_size, gamma, loss_cfg, optimizer=None
        )
        if not math.isfinite(va_total):
            raise DivergedError(
                f"non-finite validation loss at epoch {epoch}",
                last_good=str(best_path) if have_best else None,
            )
        wall = time.monotonic() - started
        lr_before = controller.lr
        event = controller.observe(va_total)
        if event.halved:
            for group in optimizer.param_groups:
                group["lr"] = event.lr
            result.lr_events.append(event.index)
        log.write(
            epoch=epoch, split="train", loss=tr_total, si_sdr_term=tr_recon,
            ce_term=tr_ce, lr=lr_before, wall_s=round(wall, 3),
        )
        log.write(
            epoch=epoch, split="val", loss=va_total, si_sdr_term=va_recon,
            ce_term=va_ce, lr=event.lr, wall_s=round(wall, 3),
        )
        result.trajectory.append(
            {"epoch": epoch, "train_loss": tr_total, "val_loss": va_total, "lr": event.lr}
        )
        result.epochs_run = epoch
        if event.improved:
            result.best_epoch = epoch
            result.best_val_loss = va_total
            save_checkpoint(
                best_path, model, role, model_cfg,
                epoch=epoch, best_val_loss=va_total,
                lineage="pretrain", inventory=inventory,
            )
            have_best = True
        if event.should_stop:
            break
    save_checkpoint(
        last_path, model, role, model_cfg,
        epoch=result.epochs_run, best_val_loss=result.best_val_loss,
        lineage="pretrain", inventory=inventory,
    )
    if not have_best:
        raise DivergedError("no finite validation loss was ever recorded")
    return result


def dataset_si_sdri(model, dataset: ManifestAudioDataset) -> float:
    """Mean clamped SI-SDR improvement of the model over a dataset's own
    items (full-length, no crops); double precision."""
    model.eval()
    values = []
    with torch.no_grad():
        for item in dataset.items:
            mix = torch.from_numpy(item["mixture"]).unsqueeze(0)
            enr = torch.from_numpy(item["enrollment"]).unsqueeze(0)
            est, _ = model(mix, enr)
            sr = dataset.sample_rate
            est_clip = AudioClip(est.squeeze(0).numpy().astype(np.float64), sr)
            mix_clip = AudioClip(item["mixture"].astype(np.float64), sr)
            dry = read_wav(item["record"].resolve(dataset.manifest_path, "dry_target"))
            out_db = clamp_db(si_sdr(est_clip, dry))
            in_db = clamp_db(si_sdr(mix_clip, dry))
            values.append(out_db - in_db)
    return float(np.mean(values))


@dataclass
class ProbeResult:
    reached: bool
    best_si_sdri_db: float
    threshold_db: float
    n_items: int
    epochs_run: int
    curve: list[tuple[int, float]]
    checkpoint_path: Path | None


def _probe_dataset(out_dir: Path, n_items: int, sample_rate: int, duration_s: float, seed: int) -> Path:
    from .assets import AssetGenConfig, AssetLibrary, generate_assets
    from .synth import SynthConfig, build_manifest

    assets_dir = out_dir / "assets"
    if not (assets_dir / "groups.json").is_file():
        generate_assets(
            assets_dir,
            AssetGenConfig(
                sample_rate=sample_rate,
                utterance_s=max(2.0, duration_s),
                utterances_per_speaker=2,
                generic_speakers=6,
                group_speakers=2,
                generic_rooms=1,
                group_rooms=1,
                rirs_per_room=2,
                noise_clips_per_domain=2,
                noise_s=max(2.0, duration_s),
                n_groups=1,
                group_size=2,
                seed=seed,
            ),
        )
    library = AssetLibrary(assets_dir, sample_rate)
    cfg = SynthConfig(
        sample_rate=sample_rate,
        duration_s=duration_s,
        k_range=(1, 2),
        hours=(n_items - 0.5) * duration_s / 3600.0,
        splits={"train": 1.0},
        seed=seed,
    )
    return build_manifest(cfg, library, out_dir / "data")


def overfit_probe(
    role: str = "student",
    n_items: int = 1,
    out_dir: str | Path = "probe",
    model_cfg: StudentConfig | TeacherConfig | None = None,
    threshold_db: float | None = None,
    budget_epochs: int | None = None,
    eval_every: int = 5,
    lr: float = 2e-3,
    freeze: bool = False,
    sample_rate: int = 8000,
    duration_s: float = 1.0,
    seed: int = 0,
) -> ProbeResult:
    """Sanity harness: train on a fixed tiny manifest until the train-set
    SI-SDR improvement crosses a threshold or the budget runs out.

    Running out of budget is reported (``reached=False``), not raised.
    """
    if n_items > 64:
        raise ConfigError("probe is meant for tiny manifests (n_items <= 64)")
    out_dir = Path(out_dir)
    manifest = _probe_dataset(out_dir, n_items, sample_rate, duration_s, seed)
    if threshold_db is None:
        threshold_db = 10.0 if n_items == 1 else 5.0
    if budget_epochs is None:
        budget_epochs = 600 if n_items == 1 else 300

    dataset = ManifestAudioDataset(manifest, "train", crop_s=None, seed=seed)
    inventory = dataset.speakers
    inv_index = {s: i for i, s in enumerate(inventory)}
    for item in dataset.items:
        item["label"] = inv_index.get(item["record"].target_speaker, -1)

    if model_cfg is None:
        model_cfg = StudentConfig() if role == "student" else TeacherConfig()
    model_cfg = dataclasses.replace(model_cfg, inventory_size=len(inventory))
    torch.manual_seed(mix_seed(seed, "probe", role))
    model = build_model(role, model_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=0.0 if freeze else lr)
    loss_cfg = LossConfig.for_role(role)
    batch_size = min(8, n_items)

    curve: list[tuple[int, float]] = []
    best = -math.inf
    epochs_run = 0
    for epoch in range(1, budget_epochs + 1):
        model.train()
        _epoch_pass(model, dataset, epoch, batch_size, loss_cfg.gamma, loss_cfg, optimizer)
        epochs_run = epoch
        if epoch % eval_every == 0 or epoch == budget_epochs:
            score = dataset_si_sdri(model, dataset)
            curve.append((epoch, score))
            best = max(best, score)
            if best >= threshold_db and not freeze:
                break
    ckpt = save_checkpoint(
        out_dir / "probe.pt", model, role, model_cfg,
        epoch=epochs_run, best_val_loss=None,
        lineage="pretrain", inventory=inventory,
    )
    return ProbeResult(
        reached=best >= threshold_db,
        best_si_sdri_db=best,
        threshold_db=threshold_db,
        n_items=n_items,
        epochs_run=epochs_run,
        curve=curve,
        checkpoint_path=ckpt,
    )
