"""Variance-preserving noise schedules and the forward diffusion map.

A schedule is the pair of coefficient tables (alpha[t], sigma[t]) for
t = 0..T-1 with alpha[t]^2 + sigma[t]^2 = 1, defining the forward marginal

    x_t = alpha[t] * x0 + sigma[t] * eps,    eps ~ N(0, I).

Tables are built in float64 so the variance-preserving identity holds to
1e-12 or better at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import UnsupportedScheduleError

SCHEDULE_KINDS = ("linear", "cosine")

_LINEAR_BETA_START = 1e-4
_LINEAR_BETA_END = 2e-2
_COSINE_S = 0.008


@dataclass(frozen=True)
class NoiseSchedule:
    """Coefficient tables of a discrete variance-preserving schedule."""

    T: int
    alpha: torch.Tensor  # [T], float64, non-increasing, in (0, 1]
    sigma: torch.Tensor  # [T], float64, non-decreasing, in [0, 1)
    kind: str = "cosine"

    def alpha_sigma(self, t, dtype=None):
        """(alpha[t], sigma[t]) cast to dtype, t scalar or tensor of indices."""
        t = torch.as_tensor(t, dtype=torch.long)
        a, s = self.alpha[t], self.sigma[t]
        if dtype is not None:
            a, s = a.to(dtype), s.to(dtype)
        return a, s

    def snr_weight(self, t) -> torch.Tensor:
        """Default distillation weighting w(t) = sigma[t]^2."""
        t = torch.as_tensor(t, dtype=torch.long)
        return self.sigma[t] ** 2


def cosine_alpha_bar(u: float, s: float = _COSINE_S) -> float:
    """Squared signal level of the cosine schedule at continuous time u in [0, 1]."""
    return math.cos((u + s) / (1.0 + s) * math.pi / 2.0) ** 2 / math.cos(
        s / (1.0 + s) * math.pi / 2.0
    ) ** 2


def make_schedule(T: int, kind: str = "cosine") -> NoiseSchedule:
    """Build the (alpha, sigma) tables for the given family.

    linear: beta ramp 1e-4 -> 2e-2 with alpha_bar as the cumulative product.
    cosine: squared-cosine alpha_bar with the usual 0.008 offset.
    """
    if T < 2:
        raise ValueError(f"schedule needs T >= 2, got {T}")
    if kind == "linear":
        betas = np.linspace(_LINEAR_BETA_START, _LINEAR_BETA_END, T, dtype=np.float64)
        alpha_bar = np.cumprod(1.0 - betas)
    elif kind == "cosine":
        u = np.arange(T, dtype=np.float64) / T
        alpha_bar = np.array([cosine_alpha_bar(float(ui)) for ui in u])
        # keep alpha_bar strictly positive and non-increasing at the tail
        alpha_bar = np.clip(alpha_bar, 1e-9, 1.0)
    else:
        raise UnsupportedScheduleError(f"unknown schedule kind {kind!r}")
    alpha = torch.from_numpy(np.sqrt(alpha_bar))
    sigma = torch.from_numpy(np.sqrt(1.0 - alpha_bar))
    return NoiseSchedule(T=T, alpha=alpha, sigma=sigma, kind=kind)


def forward_diffuse(x0: torch.Tensor, t, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """x_t = alpha[t] * x0 + sigma[t] * eps, elementwise.

    t may be a scalar step or a batch of steps ([B] against x0 of shape
    [B, ...]); coefficient dims broadcast from the left.
    """
    if x0.shape != eps.shape:
        raise ValueError(f"x0 shape {tuple(x0.shape)} != eps shape {tuple(eps.shape)}")
    t = torch.as_tensor(t, dtype=torch.long)
    if (t < 0).any() or (t >= sched.T).any():
        raise ValueError(f"t out of range [0, {sched.T})")
    a, s = sched.alpha_sigma(t, dtype=x0.dtype)
    while a.dim() < x0.dim():
        a = a.unsqueeze(-1)
        s = s.unsqueeze(-1)
    return a * x0 + s * eps
