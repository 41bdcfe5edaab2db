"""The high-capacity teacher extractor.

Mixture and enrollment pass through the same multi-scale conv encoders (the
twin encoders literally share parameter storage). A residual conv stack over
the enrollment encoding yields the speaker embedding, which is injected into
every separator stack via an affine (scale-and-shift) transform. One mask
and decoder exist per encoder scale; training and distillation consume the
finest-scale estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import BadInputError, ConfigError
from .blocks import ResBlock, dilated_blocks, gln, pad_to_frames


@dataclass
class TeacherConfig:
    encoder_kernels: tuple[int, int, int] = (20, 80, 160)  # multi-scale, samples
    encoder_filters: int = 96
    separator_blocks: int = 12
    stack_size: int = 4
    hidden_size: int = 128
    speaker_encoder_depth: int = 2
    embed_dim: int = 128
    inventory_size: int = 16
    shared_twin_encoders: bool = True

    def __post_init__(self):
        k = tuple(self.encoder_kernels)
        if not (len(k) == 3 and k[0] < k[1] < k[2]):
            raise ConfigError(f"encoder_kernels must be three increasing sizes, got {k}")
        if self.separator_blocks % self.stack_size:
            raise ConfigError("separator_blocks must be a multiple of stack_size")
        self.encoder_kernels = k

    @property
    def stride(self) -> int:
        return self.encoder_kernels[0] // 2


class TeacherExtractor(nn.Module):
    role = "teacher"

    def __init__(self, cfg: TeacherConfig):
        super().__init__()
        self.cfg = cfg
        n, h = cfg.encoder_filters, cfg.hidden_size
        total = n * len(cfg.encoder_kernels)
        self.encoders = nn.ModuleList(
            nn.Conv1d(1, n, k, stride=cfg.stride, bias=False) for k in cfg.encoder_kernels
        )
        # the enrollment side reuses self.encoders unless sharing is disabled
        if cfg.shared_twin_encoders:
            self.enroll_encoders = self.encoders
        else:
            self.enroll_encoders = nn.ModuleList(
                nn.Conv1d(1, n, k, stride=cfg.stride, bias=False)
                for k in cfg.encoder_kernels
            )
        self.encoder_act = nn.ReLU()
        self.sep_norm = gln(total)
        self.bottleneck = nn.Conv1d(total, h, 1)
        self.blocks = dilated_blocks(cfg.separator_blocks, h, h, cfg.stack_size)
        n_stacks = cfg.separator_blocks // cfg.stack_size
        self.film_scale = nn.ModuleList(nn.Linear(cfg.embed_dim, h) for _ in range(n_stacks))
        self.film_shift = nn.ModuleList(nn.Linear(cfg.embed_dim, h) for _ in range(n_stacks))
        self.mask_heads = nn.ModuleList(
            nn.Sequential(nn.PReLU(), nn.Conv1d(h, n, 1), nn.Sigmoid())
            for _ in cfg.encoder_kernels
        )
        self.decoders = nn.ModuleList(
            nn.ConvTranspose1d(n, 1, k, stride=cfg.stride, bias=False)
            for k in cfg.encoder_kernels
        )
        self.spk_norm = gln(total)
        self.spk_in = nn.Conv1d(total, h, 1)
        self.spk_blocks = nn.Sequential(*(ResBlock(h) for _ in range(cfg.speaker_encoder_depth)))
        self.spk_proj = nn.Linear(h, cfg.embed_dim)
        self.classifier = nn.Linear(cfg.embed_dim, cfg.inventory_size)

    def _check(self, x: torch.Tensor, name: str) -> torch.Tensor:
        if x.dim() == 1:
            x = x.unsqueeze(0)
        if x.dim() != 2:
            raise BadInputError(f"{name}: expected [T] or [B, T], got {tuple(x.shape)}")
        if x.shape[-1] < self.cfg.encoder_kernels[-1]:
            raise BadInputError(
                f"{name}: length {x.shape[-1]} shorter than the largest encoder kernel"
            )
        return x

    def _frames(self, t: int) -> int:
        k0, s = self.cfg.encoder_kernels[0], self.cfg.stride
        if t <= k0:
            return 1
        return -(-(t - k0) // s) + 1  # ceil division

    def encode_multiscale(
        self, x: torch.Tensor, encoders: nn.ModuleList
    ) -> list[torch.Tensor]:
        frames = self._frames(x.shape[-1])
        outs = []
        for conv, k in zip(encoders, self.cfg.encoder_kernels):
            needed = (frames - 1) * self.cfg.stride + k
            pad = needed - x.shape[-1]
            xi = nn.functional.pad(x, (0, pad)) if pad > 0 else x
            xi = pad_to_frames(xi, k, self.cfg.stride)
            outs.append(self.encoder_act(conv(xi.unsqueeze(1)))[..., :frames])
        return outs

    def embed(self, enrollment: torch.Tensor) -> torch.Tensor:
        enc = torch.cat(
            self.encode_multiscale(self._check(enrollment, "enrollment"), self.enroll_encoders),
            dim=1,
        )
        h = self.spk_blocks(self.spk_in(self.spk_norm(enc)))
        return self.spk_proj(h.mean(dim=-1))

    def _separate(self, feats: torch.Tensor, embedding: torch.Tensor) -> torch.Tensor:
        y = self.bottleneck(self.sep_norm(feats))
        for i, block in enumerate(self.blocks):
            if i % self.cfg.stack_size == 0:
                stack = i // self.cfg.stack_size
                scale = self.film_scale[stack](embedding).unsqueeze(-1)
                shift = self.film_shift[stack](embedding).unsqueeze(-1)
                y = y * (1.0 + scale) + shift
            y = block(y)
        return y

    def forward_all_scales(
        self, mixture: torch.Tensor, enrollment: torch.Tensor
    ) -> tuple[list[torch.Tensor], torch.Tensor]:
        mixture = self._check(mixture, "mixture")
        t = mixture.shape[-1]
        embedding = self.embed(enrollment)
        scales = self.encode_multiscale(mixture, self.encoders)
        y = self._separate(torch.cat(scales, dim=1), embedding)
        estimates = []
        for enc, head, dec in zip(scales, self.mask_heads, self.decoders):
            est = dec(enc * head(y)).squeeze(1)
            if est.shape[-1] < t:
                est = nn.functional.pad(est, (0, t - est.shape[-1]))
            estimates.append(est[..., :t])
        return estimates, self.classifier(embedding)

    def forward(
        self, mixture: torch.Tensor, enrollment: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        estimates, logits = self.forward_all_scales(mixture, enrollment)
        return estimates[0], logits
