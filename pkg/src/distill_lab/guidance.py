"""Classifier-free guidance and ancestral sampling."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
import torch

from .conditioning import Condition
from .errors import SamplingDivergedError
from .rng import generator
from .schedule import NoiseSchedule

log = logging.getLogger(__name__)

OMEGA_SANE_RANGE = (0.0, 100.0)
DEFAULT_OMEGA = 10.0  # typical image-generation setting sits in [7.5, 12.5]


def cfg_predict(d, x_t: torch.Tensor, y: Optional[Condition], t, omega: float,
                extra_emb=None) -> torch.Tensor:
    """eps(x_t; y, t) + omega * [eps(x_t; y, t) - eps(x_t; t)].

    omega is unrestricted; values outside the sane range are only logged.
    With y absent the guided estimate reduces to the unconditional one.
    """
    if not (OMEGA_SANE_RANGE[0] <= omega <= OMEGA_SANE_RANGE[1]):
        log.warning("guidance scale omega=%s outside %s", omega, OMEGA_SANE_RANGE)
    if y is None or y.is_none:
        return d.predict(x_t, None, t, extra_emb=extra_emb)
    eps_c = d.predict(x_t, y, t, extra_emb=extra_emb)
    eps_u = d.predict(x_t, None, t, extra_emb=extra_emb)
    return eps_c + omega * (eps_c - eps_u)


def sample_timesteps(T: int, steps: int) -> list:
    """Evenly spaced descending timesteps from T-1 to 0 inclusive."""
    if steps > T:
        raise ValueError(f"steps {steps} exceeds schedule length {T}")
    return [int(round(v)) for v in np.linspace(T - 1, 0, steps)]


def sample(d, y: Optional[Condition], omega: float, steps: int, seed: int,
           sched: NoiseSchedule, shape=None, clamp01: bool = False) -> torch.Tensor:
    """Ancestral reverse-process sample with CFG applied at each step.

    Deterministic given the seed. Uses the DDPM posterior between
    consecutive entries of the (possibly strided) timestep ladder.
    """
    shape = tuple(shape) if shape is not None else d.input_shape
    g = generator(seed)
    x = torch.randn(shape, generator=g)
    ts = sample_timesteps(sched.T, steps)
    alpha_bar = (sched.alpha**2).float()
    for i, t in enumerate(ts):
        with torch.no_grad():
            eps_hat = cfg_predict(d, x[None], y, torch.tensor([t]), omega)[0]
        ab_t = alpha_bar[t]
        x0_pred = (x - torch.sqrt(1 - ab_t) * eps_hat) / torch.sqrt(ab_t)
        if i + 1 < len(ts):
            t_prev = ts[i + 1]
            ab_prev = alpha_bar[t_prev]
            a_step = ab_t / ab_prev
            beta = 1.0 - a_step
            coef_x0 = torch.sqrt(ab_prev) * beta / (1.0 - ab_t)
            coef_xt = torch.sqrt(a_step) * (1.0 - ab_prev) / (1.0 - ab_t)
            mean = coef_x0 * x0_pred + coef_xt * x
            var = beta * (1.0 - ab_prev) / (1.0 - ab_t)
            noise = torch.randn(shape, generator=g)
            x = mean + torch.sqrt(var.clamp(min=0.0)) * noise
        else:
            x = x0_pred
        if not torch.isfinite(x).all():
            raise SamplingDivergedError(f"non-finite state at t={t}")
    if clamp01:
        x = x.clamp(0.0, 1.0)
    return x
