"""The compact student extractor.

Encoder-masker-decoder over the raw waveform. The enrollment is encoded with
the same front end, summarized by a small conv stack and mean pooling into a
speaker embedding, and multiplied elementwise into the masker activations at
one configurable block (default: the 7th of 8). A linear head over the
embedding classifies the speaker against the pretraining inventory.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import BadInputError, ConfigError
from .blocks import TcnBlock, dilated_blocks, gln, pad_to_frames


@dataclass
class StudentConfig:
    encoder_filters: int = 64      # N
    encoder_kernel: int = 32       # L, samples; stride is L/2
    masker_blocks: int = 8         # B
    fusion_index: int = 7          # j, 1-based
    hidden_size: int = 64          # h; 128/256 reproduce the full-size variants
    embed_dim: int = 64
    inventory_size: int = 16       # C, speakers in the pretraining inventory
    stack_size: int = 4            # dilation cycle length

    def __post_init__(self):
        if self.encoder_kernel % 2:
            raise ConfigError("encoder_kernel must be even (stride = kernel / 2)")
        if not 1 <= self.fusion_index <= self.masker_blocks:
            raise ConfigError(
                f"fusion_index {self.fusion_index} outside 1..{self.masker_blocks}"
            )

    @property
    def stride(self) -> int:
        return self.encoder_kernel // 2


class StudentExtractor(nn.Module):
    role = "student"

    def __init__(self, cfg: StudentConfig):
        super().__init__()
        self.cfg = cfg
        n, h = cfg.encoder_filters, cfg.hidden_size
        self.encoder = nn.Conv1d(1, n, cfg.encoder_kernel, stride=cfg.stride, bias=False)
        self.encoder_act = nn.ReLU()
        self.masker_norm = gln(n)
        self.blocks = dilated_blocks(cfg.masker_blocks, n, h, cfg.stack_size)
        self.fusion = nn.Linear(cfg.embed_dim, n)
        self.mask_head = nn.Sequential(nn.PReLU(), nn.Conv1d(n, n, 1), nn.Sigmoid())
        self.decoder = nn.ConvTranspose1d(n, 1, cfg.encoder_kernel, stride=cfg.stride, bias=False)
        self.spk_stack = nn.Sequential(TcnBlock(n, h), TcnBlock(n, h))
        self.spk_proj = nn.Linear(n, cfg.embed_dim)
        self.classifier = nn.Linear(cfg.embed_dim, cfg.inventory_size)

    def _check(self, x: torch.Tensor, name: str) -> torch.Tensor:
        if x.dim() == 1:
            x = x.unsqueeze(0)
        if x.dim() != 2:
            raise BadInputError(f"{name}: expected [T] or [B, T], got {tuple(x.shape)}")
        if x.shape[-1] < self.cfg.encoder_kernel:
            raise BadInputError(
                f"{name}: length {x.shape[-1]} shorter than one encoder kernel"
            )
        return x

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        padded = pad_to_frames(x, self.cfg.encoder_kernel, self.cfg.stride)
        return self.encoder_act(self.encoder(padded.unsqueeze(1)))

    def embed(self, enrollment: torch.Tensor) -> torch.Tensor:
        enc = self.encode(self._check(enrollment, "enrollment"))
        pooled = self.spk_stack(enc).mean(dim=-1)
        return self.spk_proj(pooled)

    def masker(self, feats: torch.Tensor, embedding: torch.Tensor) -> torch.Tensor:
        gate = self.fusion(embedding).unsqueeze(-1)
        y = self.masker_norm(feats)
        for i, block in enumerate(self.blocks):
            if i == self.cfg.fusion_index - 1:
                y = y * gate
            y = block(y)
        return self.mask_head(y)

    def forward(
        self, mixture: torch.Tensor, enrollment: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        mixture = self._check(mixture, "mixture")
        t = mixture.shape[-1]
        embedding = self.embed(enrollment)
        feats = self.encode(mixture)
        mask = self.masker(feats, embedding)
        estimate = self.decoder(feats * mask).squeeze(1)[..., :t]
        return estimate, self.classifier(embedding)
