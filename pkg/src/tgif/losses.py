"""Differentiable training losses.

``loss_si_sdr`` is the negative of the same projection-form SI-SDR the
metric oracle computes, with two numerical guards: a small epsilon inside
the log ratio and a clamp of the loss value to [-60, +60] so perfect
reconstructions cannot emit infinite gradients. ``loss_ce`` is natural-log
cross-entropy over the speaker inventory. The multi-task loss is their
gamma-weighted sum; gamma defaults to 0 for students and 0.5 for teachers.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import BadInputError, BadLabelError, ConfigError, SilentSourceError

STUDENT_GAMMA = 0.0
TEACHER_GAMMA = 0.5


@dataclass
class LossConfig:
    gamma: float = STUDENT_GAMMA
    sisdr_eps: float = 1e-8
    clamp_db: float = 60.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")

    @classmethod
    def for_role(cls, role: str, gamma: float | None = None, **kw) -> "LossConfig":
        if gamma is None:
            gamma = TEACHER_GAMMA if role == "teacher" else STUDENT_GAMMA
        return cls(gamma=gamma, **kw)


def loss_si_sdr(
    estimate: torch.Tensor,
    target: torch.Tensor,
    eps: float = 1e-8,
    clamp_db: float = 60.0,
    reduction: str = "mean",
) -> torch.Tensor:
    """Negative SI-SDR of estimate vs target ([T] or [B, T])."""
    if estimate.shape != target.shape:
        raise BadInputError(
            f"shape mismatch {tuple(estimate.shape)} vs {tuple(target.shape)}"
        )
    if estimate.dim() == 1:
        estimate = estimate.unsqueeze(0)
        target = target.unsqueeze(0)
    ref_energy = (target * target).sum(dim=-1)
    if torch.any(ref_energy == 0):
        raise SilentSourceError("silent target in batch")
    alpha = (estimate * target).sum(dim=-1) / ref_energy
    projected = alpha.unsqueeze(-1) * target
    num = (projected * projected).sum(dim=-1)
    den = ((projected - estimate) ** 2).sum(dim=-1)
    sisdr = 10.0 * torch.log10((num + eps) / (den + eps))
    loss = torch.clamp(-sisdr, min=-clamp_db, max=clamp_db)
    if reduction == "mean":
        return loss.mean()
    if reduction == "none":
        return loss
    raise ConfigError(f"unknown reduction {reduction!r}")


def loss_ce(logits: torch.Tensor, target_class: int | torch.Tensor) -> torch.Tensor:
    """Natural-log cross-entropy against an integer class index."""
    if logits.dim() == 1:
        logits = logits.unsqueeze(0)
    n_classes = logits.shape[-1]
    if isinstance(target_class, int):
        target_class = torch.tensor([target_class] * logits.shape[0])
    if torch.any(target_class < 0) or torch.any(target_class >= n_classes):
        raise BadLabelError(
            f"class outside 0..{n_classes - 1}: {target_class.tolist()}"
        )
    return F.cross_entropy(logits, target_class.long())


def loss_mtl(
    estimate: torch.Tensor,
    target: torch.Tensor,
    logits: torch.Tensor,
    target_class: int | torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    """Reconstruction loss plus gamma-weighted speaker classification."""
    recon = loss_si_sdr(estimate, target, eps=cfg.sisdr_eps, clamp_db=cfg.clamp_db)
    if cfg.gamma == 0.0:
        return recon
    return recon + cfg.gamma * loss_ce(logits, target_class)
