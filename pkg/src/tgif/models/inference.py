"""Clip-level inference wrappers around the tensor models."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..audio import AudioClip

#: a model function maps (mixture, enrollment) clips to an estimate clip
ModelFn = "Callable[[AudioClip, AudioClip], AudioClip]"


def extract(
    model: nn.Module, mixture: AudioClip, enrollment: AudioClip
) -> tuple[AudioClip, np.ndarray]:
    """Run one extraction in inference mode; metrics stay in float64 outside."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            mix = torch.from_numpy(mixture.samples).to(torch.float32).unsqueeze(0)
            enr = torch.from_numpy(enrollment.samples).to(torch.float32).unsqueeze(0)
            est, logits = model(mix, enr)
    finally:
        model.train(was_training)
    clip = AudioClip(
        est.squeeze(0).numpy().astype(np.float64),
        mixture.sample_rate,
        f"{mixture.source_id}|extracted",
    )
    return clip, logits.squeeze(0).numpy()


def model_fn(model: nn.Module):
    """Adapt an extractor module to the (mixture, enrollment) -> estimate
    callable used by evaluation and distillation."""

    def fn(mixture: AudioClip, enrollment: AudioClip) -> AudioClip:
        return extract(model, mixture, enrollment)[0]

    return fn


def speaker_embedding(model: nn.Module, enrollment: AudioClip) -> np.ndarray:
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            enr = torch.from_numpy(enrollment.samples).to(torch.float32).unsqueeze(0)
            emb = model.embed(enr)
    finally:
        model.train(was_training)
    return emb.squeeze(0).numpy()
