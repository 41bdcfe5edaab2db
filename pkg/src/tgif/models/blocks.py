"""Shared network building blocks (time-domain conv stacks)."""

from __future__ import annotations

import torch
from torch import nn


def gln(channels: int) -> nn.GroupNorm:
    """Global layer norm over (channels, time); batch-size independent, so
    inference results do not depend on how items are batched."""
    return nn.GroupNorm(1, channels, eps=1e-8)


class TcnBlock(nn.Module):
    """Residual depthwise-separable conv block with dilation."""

    def __init__(self, channels: int, hidden: int, kernel: int = 3, dilation: int = 1):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv1d(channels, hidden, 1),
            nn.PReLU(),
            gln(hidden),
            nn.Conv1d(
                hidden,
                hidden,
                kernel,
                padding=dilation * (kernel - 1) // 2,
                dilation=dilation,
                groups=hidden,
            ),
            nn.PReLU(),
            gln(hidden),
            nn.Conv1d(hidden, channels, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.net(x)


class ResBlock(nn.Module):
    """Plain residual conv block (speaker-encoder stack)."""

    def __init__(self, channels: int, kernel: int = 3):
        super().__init__()
        pad = (kernel - 1) // 2
        self.net = nn.Sequential(
            nn.Conv1d(channels, channels, kernel, padding=pad),
            nn.PReLU(),
            gln(channels),
            nn.Conv1d(channels, channels, kernel, padding=pad),
            gln(channels),
        )
        self.act = nn.PReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(x + self.net(x))


def dilated_blocks(count: int, channels: int, hidden: int, stack_size: int) -> nn.ModuleList:
    """``count`` TcnBlocks with dilations 1, 2, 4, ... cycling every
    ``stack_size`` blocks."""
    return nn.ModuleList(
        TcnBlock(channels, hidden, dilation=2 ** (i % stack_size))
        for i in range(count)
    )


def pad_to_frames(x: torch.Tensor, kernel: int, stride: int) -> torch.Tensor:
    """Right-pad [B, T] so a kernel/stride conv covers it exactly."""
    t = x.shape[-1]
    if t < kernel:
        return nn.functional.pad(x, (0, kernel - t))
    rem = (t - kernel) % stride
    if rem:
        return nn.functional.pad(x, (0, stride - rem))
    return x
