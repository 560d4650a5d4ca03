"""Noise-prediction networks.

Two families cover the whole lab: a fully connected predictor for low-dim
analytic data and a small convolutional U-Net (well under 1M parameters)
for image-shaped data. Conditions enter as learned embeddings added to the
timestep embedding; every network owns a learned null embedding so the same
weights serve both conditional and unconditional modes.
"""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .conditioning import KIND_CLASS, KIND_NONE, KIND_VIEW, Condition

POSE_FEATURE_DIM = 5


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10_000.0) -> torch.Tensor:
    """Sinusoidal features of integer timesteps, shape [B, dim]."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float32) / half
    )
    args = t.float()[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class Denoiser(nn.Module):
    """Base class: eps_hat = predict(x_t, condition, t).

    Subclasses implement _forward(x_t, emb) where emb already mixes the
    timestep embedding with the condition embedding (or the null embedding
    for unconditional evaluation). `extra_emb` is an additive hook used by
    low-rank adapters to inject extra conditioning without touching base
    weights.
    """

    def __init__(self, input_shape, cond_kind: str, emb_dim: int):
        super().__init__()
        self.input_shape = tuple(input_shape)
        self.cond_kind = cond_kind
        self.emb_dim = emb_dim
        self.step_count = 0
        self.loss_history: list = []
        self.time_mlp = nn.Sequential(
            nn.Linear(emb_dim, emb_dim * 2), nn.SiLU(), nn.Linear(emb_dim * 2, emb_dim)
        )
        self.null_emb = nn.Parameter(torch.zeros(emb_dim))

    def condition_embedding(self, cond: Optional[Condition], batch: int) -> torch.Tensor:
        """Null-mode embedding plus a learned per-condition offset.

        The offset path is zero-initialized, so a condition the training run
        never observed evaluates bit-identically to the unconditional mode.
        """
        if cond is None or cond.is_none:
            return self.null_emb.expand(batch, -1)
        if cond.kind != self.cond_kind:
            raise ValueError(
                f"denoiser conditioned on {self.cond_kind!r} got {cond.kind!r}"
            )
        return self.null_emb + self._embed_condition(cond, batch)

    def _embed_condition(self, cond: Condition, batch: int) -> torch.Tensor:
        raise NotImplementedError

    def _forward(self, x_t: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def predict(self, x_t: torch.Tensor, cond: Optional[Condition], t,
                extra_emb: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Noise estimate for a batch x_t at integer steps t."""
        squeeze = x_t.dim() == len(self.input_shape)
        if squeeze:
            x_t = x_t[None]
        b = x_t.shape[0]
        t = torch.as_tensor(t, dtype=torch.long).reshape(-1)
        if t.numel() == 1:
            t = t.expand(b)
        emb = self.time_mlp(timestep_embedding(t, self.emb_dim))
        emb = emb + self.condition_embedding(cond, b)
        if extra_emb is not None:
            emb = emb + extra_emb
        out = self._forward(x_t.float(), emb)
        return out[0] if squeeze else out

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class MLPDenoiser(Denoiser):
    """Fully connected predictor for vector-shaped data."""

    def __init__(self, dim: int, hidden: int = 96, depth: int = 3,
                 emb_dim: int = 32, num_classes: Optional[int] = None):
        cond_kind = KIND_CLASS if num_classes else KIND_NONE
        super().__init__((dim,), cond_kind, emb_dim)
        self.dim = dim
        self.num_classes = num_classes
        if num_classes:
            # zero-init so an unobserved condition equals the null embedding
            self.class_emb = nn.Embedding(num_classes, emb_dim)
            nn.init.zeros_(self.class_emb.weight)
        self.inp = nn.Linear(dim + emb_dim, hidden)
        self.blocks = nn.ModuleList(
            [nn.Sequential(nn.SiLU(), nn.Linear(hidden, hidden)) for _ in range(depth)]
        )
        self.out = nn.Linear(hidden, dim)

    def _embed_condition(self, cond: Condition, batch: int) -> torch.Tensor:
        label = cond.label.reshape(-1)
        if label.numel() == 1:
            label = label.expand(batch)
        return self.class_emb(label)

    def _forward(self, x_t: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        h = self.inp(torch.cat([x_t, emb], dim=-1))
        for blk in self.blocks:
            h = h + blk(h)
        return self.out(F.silu(h))


class _ConvBlock(nn.Module):
    def __init__(self, cin, cout, emb_dim):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.emb_proj = nn.Linear(emb_dim, cout)
        self.norm = nn.GroupNorm(4, cout)

    def forward(self, x, emb):
        h = F.silu(self.conv1(x))
        h = h + self.emb_proj(emb)[:, :, None, None]
        return F.silu(self.norm(self.conv2(h)))


class ConvDenoiser(Denoiser):
    """Small U-Net for HxW images in channel-first layout [B, C, H, W]."""

    def __init__(self, channels: int = 3, resolution: int = 32, base: int = 24,
                 emb_dim: int = 48, cond_kind: str = KIND_NONE,
                 num_classes: Optional[int] = None, ref_embed_dim: int = 16):
        super().__init__((channels, resolution, resolution), cond_kind, emb_dim)
        self.resolution = resolution
        self.num_classes = num_classes
        if cond_kind == KIND_CLASS:
            assert num_classes, "class conditioning needs num_classes"
            self.class_emb = nn.Embedding(num_classes, emb_dim)
            nn.init.zeros_(self.class_emb.weight)
        elif cond_kind == KIND_VIEW:
            self.ref_proj = nn.Linear(ref_embed_dim, emb_dim)
            self.pose_mlp = nn.Sequential(
                nn.Linear(POSE_FEATURE_DIM, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
            )
            # zero-init the injection layers: an untrained view condition is
            # indistinguishable from the unconditional mode
            nn.init.zeros_(self.ref_proj.weight)
            nn.init.zeros_(self.ref_proj.bias)
            nn.init.zeros_(self.pose_mlp[-1].weight)
            nn.init.zeros_(self.pose_mlp[-1].bias)
        self.ref_embed_dim = ref_embed_dim
        self.down1 = _ConvBlock(channels, base, emb_dim)
        self.down2 = _ConvBlock(base, base * 2, emb_dim)
        self.mid = _ConvBlock(base * 2, base * 2, emb_dim)
        self.up1 = _ConvBlock(base * 4, base, emb_dim)
        self.up2 = _ConvBlock(base * 2, base, emb_dim)
        self.out = nn.Conv2d(base, channels, 1)

    def _embed_condition(self, cond: Condition, batch: int) -> torch.Tensor:
        if self.cond_kind == KIND_CLASS:
            label = cond.label.reshape(-1)
            if label.numel() == 1:
                label = label.expand(batch)
            return self.class_emb(label)
        ref = cond.ref_embedding
        if ref.dim() == 1:
            ref = ref[None].expand(batch, -1)
        pose = cond.rel_pose
        if pose.dim() == 1:
            pose = pose[None].expand(batch, -1)
        return self.ref_proj(ref.float()) + self.pose_mlp(pose.float())

    def _forward(self, x_t: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        d1 = self.down1(x_t, emb)
        d2 = self.down2(F.avg_pool2d(d1, 2), emb)
        m = self.mid(F.avg_pool2d(d2, 2), emb)
        u1 = F.interpolate(m, scale_factor=2, mode="nearest")
        u1 = self.up1(torch.cat([u1, d2], dim=1), emb)
        u2 = F.interpolate(u1, scale_factor=2, mode="nearest")
        u2 = self.up2(torch.cat([u2, d1], dim=1), emb)
        return self.out(u2)


class ReferenceEncoder(nn.Module):
    """Learned low-dimensional encoding of a downsampled reference image."""

    def __init__(self, channels: int = 3, embed_dim: int = 16, pooled: int = 8):
        super().__init__()
        self.pooled = pooled
        self.conv = nn.Conv2d(channels, 8, 3, padding=1)
        self.fc = nn.Linear(8 * pooled * pooled, embed_dim)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        squeeze = image.dim() == 3
        if squeeze:
            image = image[None]
        h = F.adaptive_avg_pool2d(image.float(), self.pooled)
        h = F.silu(self.conv(h))
        out = self.fc(h.flatten(1))
        return out[0] if squeeze else out
