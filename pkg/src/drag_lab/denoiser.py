"""Spatiotemporal U-Net noise predictor with additive multi-resolution guidance.

The network consumes pixel-space videos but works internally at 1/8 of pixel
resolution: a lossless space-to-depth stem folds 8x8 patches into channels, so
the encoder stages sit at 1/8, 1/16, 1/32 of pixel resolution plus a
bottleneck. Guidance features are injected additively at those four stages
through zero-initialized 1x1 convolutions.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import torch
from torch import nn

from .guidance import zero_module


@dataclass(frozen=True)
class DenoiserConfig:
    base_channels: int = 32
    channel_multipliers: tuple[int, ...] = (1, 2, 4)
    temporal_kernel_size: int = 3
    time_embed_dim: int = 128
    feature_channels: int = 16
    patch_size: int = 8
    norm_groups: int = 8
    injection_site: str = "encoder"  # where pyramid features are added

    def __post_init__(self):
        if len(self.channel_multipliers) < 2:
            raise ValueError("need at least two resolution levels")
        if any(m < 1 for m in self.channel_multipliers):
            raise ValueError(f"channel multipliers must be >= 1, got "
                             f"{self.channel_multipliers}")
        if self.temporal_kernel_size % 2 != 1:
            raise ValueError("temporal kernel size must be odd")
        if self.injection_site not in ("encoder", "decoder"):
            raise ValueError(f"unknown injection site {self.injection_site!r}")
        object.__setattr__(self, "channel_multipliers",
                           tuple(self.channel_multipliers))

    @property
    def levels(self) -> int:
        return len(self.channel_multipliers)

    @property
    def stage_channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels * m for m in self.channel_multipliers)


def space_to_depth(x: torch.Tensor, p: int) -> torch.Tensor:
    """(B, C, L, H, W) -> (B, C*p*p, L, H/p, W/p), losslessly."""
    b, c, length, h, w = x.shape
    if h % p or w % p:
        raise ValueError(f"spatial dims ({h}, {w}) not divisible by patch size {p}")
    x = x.reshape(b, c, length, h // p, p, w // p, p)
    x = x.permute(0, 1, 4, 6, 2, 3, 5)
    return x.reshape(b, c * p * p, length, h // p, w // p)


def depth_to_space(x: torch.Tensor, p: int) -> torch.Tensor:
    """Inverse of :func:`space_to_depth`."""
    b, cpp, length, h, w = x.shape
    c = cpp // (p * p)
    x = x.reshape(b, c, p, p, length, h, w)
    x = x.permute(0, 1, 4, 5, 2, 6, 3)
    return x.reshape(b, c, length, h * p, w * p)


def concatenate_first_frame(x_t: torch.Tensor, first_frame: torch.Tensor) -> torch.Tensor:
    """Append the conditioning frame, broadcast over time, as extra channels.

    ``x_t`` is (B, c, L, H, W); ``first_frame`` is (B, 3, H, W).
    """
    if first_frame.dim() != 4:
        raise ValueError(f"first_frame must be (B, C, H, W), got "
                         f"{tuple(first_frame.shape)}")
    if first_frame.shape[0] != x_t.shape[0] or first_frame.shape[-2:] != x_t.shape[-2:]:
        raise ValueError("first_frame batch or spatial dims do not match x_t")
    cond = first_frame.unsqueeze(2).expand(-1, -1, x_t.shape[2], -1, -1)
    return torch.cat([x_t, cond], dim=1)


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        torch.arange(half, dtype=t.dtype, device=t.device)
        * (-math.log(10000.0) / max(half - 1, 1)))
    args = t[:, None] * freqs[None, :]
    return torch.cat([args.sin(), args.cos()], dim=-1)


class FrameGroupNorm(nn.GroupNorm):
    """GroupNorm with statistics computed per frame, so normalization never
    mixes information across time."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, length, h, w = x.shape
        flat = x.permute(0, 2, 1, 3, 4).reshape(b * length, c, h, w)
        out = super().forward(flat)
        return out.reshape(b, length, c, h, w).permute(0, 2, 1, 3, 4)


class SpatioTemporalBlock(nn.Module):
    """Residual block with factorized spatial (1,3,3) + temporal (k,1,1) convs
    and multiplicative (scale/shift) timestep conditioning."""

    def __init__(self, in_channels: int, out_channels: int, time_dim: int,
                 temporal_kernel: int = 3, norm_groups: int = 8):
        super().__init__()
        tk = temporal_kernel
        self.norm1 = FrameGroupNorm(norm_groups, in_channels)
        self.conv_s1 = nn.Conv3d(in_channels, out_channels, (1, 3, 3),
                                 padding=(0, 1, 1))
        self.conv_t1 = nn.Conv3d(out_channels, out_channels, (tk, 1, 1),
                                 padding=(tk // 2, 0, 0))
        self.time_proj = nn.Linear(time_dim, 2 * out_channels)
        self.norm2 = FrameGroupNorm(norm_groups, out_channels)
        self.conv_s2 = nn.Conv3d(out_channels, out_channels, (1, 3, 3),
                                 padding=(0, 1, 1))
        self.conv_t2 = nn.Conv3d(out_channels, out_channels, (tk, 1, 1),
                                 padding=(tk // 2, 0, 0))
        self.skip = (nn.Conv3d(in_channels, out_channels, 1)
                     if in_channels != out_channels else nn.Identity())
        self.act = nn.SiLU()

    def forward(self, x: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        h = self.conv_t1(self.conv_s1(self.act(self.norm1(x))))
        scale, shift = self.time_proj(self.act(emb)).chunk(2, dim=-1)
        h = self.norm2(h) * (1.0 + scale[:, :, None, None, None]) \
            + shift[:, :, None, None, None]
        h = self.conv_t2(self.conv_s2(self.act(h)))
        return h + self.skip(x)


class VideoDenoiser(nn.Module):
    """Noise predictor over (B, 3, L, H, W) videos, first-frame conditioned."""

    def __init__(self, config: DenoiserConfig, in_channels: int = 3,
                 cond_channels: int = 3):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        self.cond_channels = cond_channels
        p = config.patch_size
        chans = config.stage_channels
        block = lambda cin, cout: SpatioTemporalBlock(
            cin, cout, config.time_embed_dim, config.temporal_kernel_size,
            config.norm_groups)

        self.stem = nn.Conv3d((in_channels + cond_channels) * p * p, chans[0], 1)
        # Shallow full-resolution pathway: pixel detail (the noise to be
        # predicted lives at full resolution) must not squeeze through the
        # 1/8-resolution bottleneck.
        f = config.feature_channels
        self.fullres_stem = nn.Conv3d(in_channels + cond_channels, f, (1, 3, 3),
                                      padding=(0, 1, 1))
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_embed_dim, config.time_embed_dim),
            nn.SiLU(),
            nn.Linear(config.time_embed_dim, config.time_embed_dim))
        self.enc_blocks = nn.ModuleList([block(c, c) for c in chans])
        self.downs = nn.ModuleList([
            nn.Conv3d(chans[i], chans[i + 1], (1, 3, 3), stride=(1, 2, 2),
                      padding=(0, 1, 1))
            for i in range(len(chans) - 1)])
        self.mid = block(chans[-1], chans[-1])
        self.ups = nn.ModuleList([
            nn.Sequential(
                nn.Upsample(scale_factor=(1, 2, 2), mode="nearest"),
                nn.Conv3d(chans[i + 1], chans[i], (1, 3, 3), padding=(0, 1, 1)))
            for i in reversed(range(len(chans) - 1))])
        self.dec_blocks = nn.ModuleList([
            block(2 * chans[i], chans[i]) for i in reversed(range(len(chans) - 1))])
        self.feature_norm = FrameGroupNorm(config.norm_groups, chans[0])
        self.feature_conv = nn.Conv3d(chans[0], config.feature_channels * p * p, 1)
        # Final decoder stage: fuse the unpatchified low-resolution stream with
        # the full-resolution pathway (spatial only: temporal kernel 1).
        self.fuse = SpatioTemporalBlock(2 * f, f, config.time_embed_dim,
                                        temporal_kernel=1,
                                        norm_groups=config.norm_groups)
        self.out_conv = nn.Conv3d(config.feature_channels, in_channels, (1, 3, 3),
                                  padding=(0, 1, 1))
        inject_channels = list(chans) + [chans[-1]]
        self.injections = nn.ModuleList(
            [zero_module(nn.Conv3d(c, c, 1)) for c in inject_channels])
        self.act = nn.SiLU()

    @property
    def pyramid_channels(self) -> tuple[int, ...]:
        chans = self.config.stage_channels
        return tuple(list(chans) + [chans[-1]])

    def embed_time(self, t, batch: int, dtype, device) -> torch.Tensor:
        if not isinstance(t, torch.Tensor):
            t = torch.full((batch,), float(t), dtype=dtype, device=device)
        return self.time_mlp(sinusoidal_embedding(t.to(dtype), self.config.time_embed_dim))

    def encode_latent(self, x_t: torch.Tensor, first_frame: torch.Tensor) -> torch.Tensor:
        """The stem output: the denoiser-native latent of the (noisy) video."""
        x = concatenate_first_frame(x_t, first_frame)
        return self.stem(space_to_depth(x, self.config.patch_size))

    def _validate_pyramid(self, pyramid, shape):
        b, _, length, h8, w8 = shape
        expected = []
        for i, c in enumerate(self.pyramid_channels):
            scale = 2 ** min(i, self.config.levels - 1)
            expected.append((b, c, length, max(1, h8 // scale), max(1, w8 // scale)))
        if len(pyramid) != len(expected):
            raise ValueError(f"pyramid has {len(pyramid)} features, expected "
                             f"{len(expected)}")
        for i, (feat, want) in enumerate(zip(pyramid, expected)):
            if tuple(feat.shape) != want:
                raise ValueError(f"pyramid level {i} has shape "
                                 f"{tuple(feat.shape)}, expected {want}")

    def forward(self, x_t: torch.Tensor, t, first_frame: torch.Tensor,
                pyramid=None, return_features: bool = False):
        if x_t.dim() != 5 or x_t.shape[1] != self.in_channels:
            raise ValueError(f"x_t must be (B, {self.in_channels}, L, H, W), "
                             f"got {tuple(x_t.shape)}")
        divisor = self.config.patch_size * 2 ** (self.config.levels - 1)
        if x_t.shape[-2] % divisor or x_t.shape[-1] % divisor:
            raise ValueError(f"spatial dims {tuple(x_t.shape[-2:])} must be "
                             f"divisible by {divisor} (patch size x 2^(levels-1))")
        site = self.config.injection_site
        levels = self.config.levels
        x = concatenate_first_frame(x_t, first_frame)
        u = self.fullres_stem(x)
        h = self.stem(space_to_depth(x, self.config.patch_size))
        if pyramid is not None:
            self._validate_pyramid(pyramid, h.shape)
        emb = self.embed_time(t, x_t.shape[0], h.dtype, h.device)

        skips = []
        for i, block in enumerate(self.enc_blocks):
            h = block(h, emb)
            if pyramid is not None and site == "encoder":
                h = h + self.injections[i](pyramid[i])
            skips.append(h)
            if i < len(self.downs):
                h = self.downs[i](h)
        if pyramid is not None and site == "decoder":
            h = h + self.injections[levels - 1](pyramid[levels - 1])
        h = self.mid(h, emb)
        if pyramid is not None:
            h = h + self.injections[levels](pyramid[levels])
        for j, (up, dec) in enumerate(zip(self.ups, self.dec_blocks)):
            i = levels - 2 - j
            skip = skips[i]
            if pyramid is not None and site == "decoder":
                skip = skip + self.injections[i](pyramid[i])
            h = dec(torch.cat([up(h), skip], dim=1), emb)
        low = depth_to_space(
            self.feature_conv(self.act(self.feature_norm(h))),
            self.config.patch_size)
        feats = self.fuse(torch.cat([low, u], dim=1), emb)
        eps = self.out_conv(feats)
        if return_features:
            return eps, feats
        return eps

    def features(self, x_t: torch.Tensor, t, first_frame: torch.Tensor) -> torch.Tensor:
        """Full-resolution feature map from the final decoder stage."""
        _, feats = self(x_t, t, first_frame, return_features=True)
        return feats


class ControlBranch(nn.Module):
    """Trainable copy of the denoiser's encoder stages; turns the combined
    guidance latent into the four injection features."""

    def __init__(self, denoiser: VideoDenoiser):
        super().__init__()
        self.config = denoiser.config
        self.enc_blocks = copy.deepcopy(denoiser.enc_blocks)
        self.downs = copy.deepcopy(denoiser.downs)
        self.mid = copy.deepcopy(denoiser.mid)

    def forward(self, r: torch.Tensor, emb: torch.Tensor) -> list[torch.Tensor]:
        if r.dim() != 5 or r.shape[1] != self.config.stage_channels[0]:
            raise ValueError(f"combined guidance must be (B, {self.config.stage_channels[0]}, "
                             f"L, H/8, W/8), got {tuple(r.shape)}")
        feats = []
        h = r
        for i, block in enumerate(self.enc_blocks):
            h = block(h, emb)
            feats.append(h)
            if i < len(self.downs):
                h = self.downs[i](h)
        feats.append(self.mid(h, emb))
        return feats
