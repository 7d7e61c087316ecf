"""DDPM noise schedule and the forward (noising) process."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

BETA_START = 1e-4
BETA_END = 2e-2


@dataclass(frozen=True)
class NoiseSchedule:
    """Fixed Markov-chain noising coefficients, 1-indexed in t.

    ``alpha_bar[t - 1]`` is the cumulative product after t steps; zero steps
    correspond to alpha_bar = 1.
    """

    betas: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def alpha_bar_at(self, t: int) -> float:
        """Cumulative alpha after t steps; t = 0 yields 1.0."""
        if not 0 <= t <= self.num_steps:
            raise ValueError(f"t={t} outside [0, {self.num_steps}]")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])


def make_schedule(num_steps: int, kind: str = "linear") -> NoiseSchedule:
    if num_steps < 1:
        raise ValueError(f"schedule needs at least one step, got {num_steps}")
    if kind != "linear":
        raise ValueError(f"unknown schedule kind {kind!r}")
    betas = np.linspace(BETA_START, BETA_END, num_steps, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bar=np.cumprod(alphas))


def forward_noise(x0: torch.Tensor, t, noise: torch.Tensor,
                  schedule: NoiseSchedule) -> torch.Tensor:
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise.

    ``t`` is an int in [1, T], or a 1-D tensor of per-batch-element steps with
    x0 shaped (B, ...).
    """
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {tuple(noise.shape)} != x0 shape {tuple(x0.shape)}")
    if isinstance(t, torch.Tensor):
        steps = t.long()
        if steps.dim() != 1 or steps.shape[0] != x0.shape[0]:
            raise ValueError("tensor t must be 1-D with one step per batch element")
        if (steps < 1).any() or (steps > schedule.num_steps).any():
            raise ValueError(f"t outside [1, {schedule.num_steps}]")
        ab = torch.as_tensor(schedule.alpha_bar, dtype=x0.dtype,
                             device=x0.device)[steps - 1]
        ab = ab.reshape(-1, *([1] * (x0.dim() - 1)))
    else:
        if not 1 <= int(t) <= schedule.num_steps:
            raise ValueError(f"t={t} outside [1, {schedule.num_steps}]")
        ab = torch.tensor(schedule.alpha_bar_at(int(t)), dtype=x0.dtype,
                          device=x0.device)
    return ab.sqrt() * x0 + (1.0 - ab).sqrt() * noise
