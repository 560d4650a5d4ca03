"""Denoiser training: the noise-prediction MSE objective with condition dropout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from .conditioning import Condition
from .denoiser import Denoiser
from .errors import TrainingDivergedError
from .rng import derive_seed, generator
from .schedule import NoiseSchedule, forward_diffuse


class TensorDataset:
    """In-memory samples with optional per-sample class labels."""

    def __init__(self, samples: torch.Tensor, labels: Optional[torch.Tensor] = None):
        if samples.shape[0] == 0:
            raise ValueError("dataset is empty")
        self.samples = samples.float()
        self.labels = None if labels is None else torch.as_tensor(labels, dtype=torch.long)

    def __len__(self):
        return self.samples.shape[0]

    def sample_batch(self, g: torch.Generator, batch: int):
        idx = torch.randint(0, len(self), (batch,), generator=g)
        x0 = self.samples[idx]
        if self.labels is None:
            return x0, None
        return x0, Condition(kind="class_label", label=self.labels[idx])


def train_denoiser(dataset, model: Denoiser, sched: NoiseSchedule,
                   dropout_p: float = 0.1, budget: int = 2000,
                   seed: int = 0, lr: float = 2e-3, batch: int = 32,
                   lr_decay: bool = True) -> Denoiser:
    """Minimize E ||eps_hat(alpha_t x0 + sigma_t eps; y, t) - eps||^2.

    The condition is replaced by the unconditional mode with probability
    dropout_p per step; timesteps are uniform over [0, T). The model's
    loss history is appended in place and the trained model returned.
    """
    if not (0.0 <= dropout_p <= 1.0):
        raise ValueError(f"dropout_p must be in [0, 1], got {dropout_p}")
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    sched_lr = (
        torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=budget, eta_min=lr * 0.05)
        if lr_decay
        else None
    )
    for _ in range(budget):
        g = generator(derive_seed(seed, "train", model.step_count))
        x0, cond = dataset.sample_batch(g, batch)
        t = torch.randint(0, sched.T, (x0.shape[0],), generator=g)
        eps = torch.randn(x0.shape, generator=g)
        if cond is not None and torch.rand((), generator=g) < dropout_p:
            cond = None
        x_t = forward_diffuse(x0, t, eps, sched)
        pred = model.predict(x_t, cond, t)
        loss = torch.mean((pred - eps) ** 2)
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at step {model.step_count}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if sched_lr is not None:
            sched_lr.step()
        model.loss_history.append(loss.item())
        model.step_count += 1
    return model


@dataclass
class EvalGrid:
    """Helper grid of (x_t, t) pairs for denoiser-vs-oracle comparisons."""

    x_values: torch.Tensor
    t_values: torch.Tensor

    def mean_abs_error(self, model, oracle, cond=None) -> float:
        errs = []
        for t in self.t_values.tolist():
            xs = self.x_values[:, None].float()
            with torch.no_grad():
                pred = model.predict(xs, cond, torch.full((xs.shape[0],), int(t)))
            want = oracle.predict(self.x_values, cond, int(t))
            errs.append((pred.double().squeeze(-1) - want).abs().mean())
        return float(torch.stack(errs).mean())
