"""Closed-form denoisers for analytic data distributions.

These are the oracles the trained networks are checked against. Each class
implements the same predict(x_t, cond, t) protocol as a trained Denoiser
but evaluates the exact posterior-mean noise estimate.
"""

from __future__ import annotations

import torch

from .conditioning import Condition
from .schedule import NoiseSchedule


class PointMassDenoiser:
    """Optimal noise predictor for a dataset of one constant sample c."""

    def __init__(self, c: torch.Tensor, sched: NoiseSchedule):
        self.c = torch.as_tensor(c, dtype=torch.float64)
        self.sched = sched
        self.cond_kind = "none"

    def predict(self, x_t, cond, t, extra_emb=None):
        x_t = torch.as_tensor(x_t, dtype=torch.float64)
        a, s = self.sched.alpha_sigma(t)
        return (x_t - a * self.c) / s


class GaussianDenoiser:
    """Exact posterior-mean noise estimate for x0 ~ N(mu, s2).

    E[eps | x_t] = sigma_t (x_t - alpha_t mu) / (alpha_t^2 s2 + sigma_t^2).
    """

    def __init__(self, mu: float, s2: float, sched: NoiseSchedule):
        self.mu = float(mu)
        self.s2 = float(s2)
        self.sched = sched
        self.cond_kind = "none"

    def predict(self, x_t, cond, t, extra_emb=None):
        x_t = torch.as_tensor(x_t, dtype=torch.float64)
        a, s = self.sched.alpha_sigma(t)
        return s * (x_t - a * self.mu) / (a * a * self.s2 + s * s)


class MixtureDenoiser:
    """Two-class 1-D Gaussian mixture with exact conditional/unconditional modes.

    Conditioned on class k the data is N(m_k, s2); unconditioned it is the
    equal-weight mixture, so the unconditional estimate mixes per-class
    posterior means with the usual Gaussian responsibilities.
    """

    def __init__(self, means, s2: float, sched: NoiseSchedule):
        self.means = torch.as_tensor(means, dtype=torch.float64)
        self.s2 = float(s2)
        self.sched = sched
        self.cond_kind = "class_label"

    def _component_eps(self, x_t, a, s, mean):
        return s * (x_t - a * mean) / (a * a * self.s2 + s * s)

    def predict(self, x_t, cond: Condition, t, extra_emb=None):
        x_t = torch.as_tensor(x_t, dtype=torch.float64)
        a, s = self.sched.alpha_sigma(t)
        if cond is not None and not cond.is_none:
            k = int(cond.label.reshape(-1)[0])
            return self._component_eps(x_t, a, s, float(self.means[k]))
        var = a * a * self.s2 + s * s
        log_r = torch.stack(
            [-0.5 * (x_t - a * m) ** 2 / var for m in self.means], dim=0
        )
        r = torch.softmax(log_r, dim=0)
        post_x0 = torch.stack(
            [
                m + a * self.s2 * (x_t - a * m) / var
                for m in self.means
            ],
            dim=0,
        )
        ex0 = (r * post_x0).sum(dim=0)
        return (x_t - a * ex0) / s
