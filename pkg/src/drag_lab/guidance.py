"""Convolutional encoder mapping conditioning maps to 1/8-resolution latents.

Four blocks of two convolutions and a SiLU each; the first block preserves
resolution and the remaining three halve it, so the output is exactly 1/8 of
the (padded) input. The final projection is zero-initialized so guidance
starts as a no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F


def zero_module(module: nn.Module) -> nn.Module:
    for p in module.parameters():
        nn.init.zeros_(p)
    return module


@dataclass
class GuidanceLatent:
    values: torch.Tensor  # (B, c_g, L, H/8, W/8)
    input_hw: tuple[int, int]
    padded_hw: tuple[int, int]

    @property
    def was_padded(self) -> bool:
        return self.input_hw != self.padded_hw


class GuidanceEncoder(nn.Module):
    """Per-frame spatial encoder; no temporal mixing."""

    DOWNSAMPLE_FACTOR = 8

    def __init__(self, in_channels: int, out_channels: int,
                 hidden: tuple[int, ...] = (16, 32, 64, 64)):
        super().__init__()
        if len(hidden) != 4:
            raise ValueError(f"expected four block widths, got {hidden}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        blocks = []
        prev = in_channels
        for i, width in enumerate(hidden):
            stride = 1 if i == 0 else 2
            blocks.append(nn.Sequential(
                nn.Conv2d(prev, width, 3, stride=stride, padding=1),
                nn.SiLU(),
                nn.Conv2d(width, width, 3, padding=1),
            ))
            prev = width
        self.blocks = nn.ModuleList(blocks)
        self.out_proj = zero_module(nn.Conv2d(prev, out_channels, 1))

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        """(B, C_in, L, H, W) -> (B, c_g, L, ceil(H/8), ceil(W/8))."""
        if seq.dim() != 5:
            raise ValueError(f"expected (B, C, L, H, W), got {tuple(seq.shape)}")
        if seq.shape[1] != self.in_channels:
            raise ValueError(
                f"input has {seq.shape[1]} channels, encoder expects {self.in_channels}")
        b, c, length, h, w = seq.shape
        x = seq.permute(0, 2, 1, 3, 4).reshape(b * length, c, h, w)
        x = _pad_to_multiple(x, self.DOWNSAMPLE_FACTOR)
        for block in self.blocks:
            x = block(x)
        x = self.out_proj(x)
        h8, w8 = x.shape[-2:]
        return x.reshape(b, length, self.out_channels, h8, w8).permute(0, 2, 1, 3, 4)


def _pad_to_multiple(x: torch.Tensor, factor: int) -> torch.Tensor:
    h, w = x.shape[-2:]
    pad_h = (-h) % factor
    pad_w = (-w) % factor
    if pad_h or pad_w:
        x = F.pad(x, (0, pad_w, 0, pad_h))
    return x


def encode_guidance(encoder: GuidanceEncoder, seq: torch.Tensor) -> GuidanceLatent:
    """Run the encoder and record whether the input was padded to a multiple of 8."""
    h, w = seq.shape[-2:]
    factor = encoder.DOWNSAMPLE_FACTOR
    padded = (math.ceil(h / factor) * factor, math.ceil(w / factor) * factor)
    return GuidanceLatent(values=encoder(seq), input_hw=(h, w), padded_hw=padded)


def combine_guidance(entity_lat, gauss_lat, noise_lat) -> torch.Tensor:
    """Elementwise sum of the two encoded representations and the latent noise."""
    tensors = [lat.values if isinstance(lat, GuidanceLatent) else lat
               for lat in (entity_lat, gauss_lat, noise_lat)]
    shape = tensors[0].shape
    for name, t in zip(("entity", "gaussian", "noise"), tensors):
        if t.shape != shape:
            raise ValueError(f"{name} latent shape {tuple(t.shape)} != {tuple(shape)}")
    return tensors[0] + tensors[1] + tensors[2]
