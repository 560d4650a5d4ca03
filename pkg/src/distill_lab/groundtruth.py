"""Exact ground-truth rendering of analytic scenes by sphere tracing.

Shading is a fixed directional Lambertian light with an ambient floor so the
ground truth stays closed-form. Normals are reported in the camera frame,
background pixels carry the mid-gray background color, zero depth and zero
normals.
"""

from __future__ import annotations

import math

import torch

from .bundles import BACKGROUND_GRAY, ViewBundle
from .cameras import CameraPose, pixel_rays, world_to_camera_matrix
from .errors import RenderQualityError
from .rng import generator
from .scenes import Scene

LIGHT_DIR = (0.45, 0.75, 0.55)  # world frame, normalized at use
AMBIENT = 0.25

_MAX_STEPS = 192
_HIT_EPS = 5e-5
_T_FAR = 6.0


def _light(dtype):
    l = torch.tensor(LIGHT_DIR, dtype=dtype)
    return l / l.norm()


def shade(albedo: torch.Tensor, normal_world: torch.Tensor) -> torch.Tensor:
    """Lambertian with ambient floor; inputs/outputs in [0,1]."""
    l = _light(albedo.dtype)
    lam = (normal_world @ l).clamp(min=0.0)
    return (albedo * (AMBIENT + (1.0 - AMBIENT) * lam)[..., None]).clamp(0.0, 1.0)


def sphere_trace(scene: Scene, origins: torch.Tensor, dirs: torch.Tensor,
                 max_steps: int = _MAX_STEPS, hit_eps: float = _HIT_EPS):
    """March rays against the scene SDF.

    Returns (t [N], hit [N] bool, stalled [N] bool); stalled rays neither
    converged nor escaped within the step budget.
    """
    n = origins.shape[0]
    t = torch.zeros(n, dtype=origins.dtype)
    active = torch.ones(n, dtype=torch.bool)
    hit = torch.zeros(n, dtype=torch.bool)
    for _ in range(max_steps):
        if not active.any():
            break
        p = origins[active] + t[active, None] * dirs[active]
        d = scene.sdf(p)
        t_active = t[active] + d
        newly_hit = d.abs() < hit_eps
        escaped = t_active > _T_FAR
        t[active] = t_active
        idx = active.nonzero(as_tuple=True)[0]
        hit[idx[newly_hit]] = True
        active[idx[newly_hit | escaped]] = False
    stalled = active
    return t, hit, stalled


def render_ground_truth(scene: Scene, pose: CameraPose, resolution: int,
                        dtype=torch.float64) -> ViewBundle:
    """Exact rgb/normal/depth/mask via sphere tracing the analytic SDF."""
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    H = W = int(resolution)
    origins, dirs = pixel_rays(pose, H, W, dtype=dtype)
    o = origins.reshape(-1, 3)
    d = dirs.reshape(-1, 3)
    t, hit, stalled = sphere_trace(scene, o, d)
    n_bad = int(stalled.sum())
    n_fg = int(hit.sum()) + n_bad
    if n_fg > 0 and n_bad / n_fg > 0.01:
        raise RenderQualityError(
            f"sphere tracing stalled on {n_bad}/{n_fg} foreground rays"
        )

    rgb = torch.full((H * W, 3), BACKGROUND_GRAY, dtype=dtype)
    normal_cam = torch.zeros(H * W, 3, dtype=dtype)
    depth = torch.zeros(H * W, dtype=dtype)
    mask = torch.zeros(H * W, dtype=dtype)

    if hit.any():
        p_hit = o[hit] + t[hit, None] * d[hit]
        g = scene.sdf_gradient(p_hit)
        n_world = g / g.norm(dim=-1, keepdim=True).clamp(min=1e-12)
        albedo = scene.albedo(p_hit)
        rgb[hit] = shade(albedo, n_world)
        R = world_to_camera_matrix(pose, dtype=dtype)
        normal_cam[hit] = n_world @ R.T
        depth[hit] = t[hit]
        mask[hit] = 1.0

    return ViewBundle(
        rgb=rgb.reshape(H, W, 3),
        normal=normal_cam.reshape(H, W, 3),
        depth=depth.reshape(H, W),
        mask=mask.reshape(H, W),
        pose=pose,
        stats={"stalled_rays": n_bad},
    )


def make_reference(scene: Scene, pose: CameraPose, resolution: int,
                   noise_level: float = 0.0, seed: int = 0) -> ViewBundle:
    """Ground truth with estimator-style Gaussian noise on normal and depth.

    Plays the role of an off-the-shelf normal/depth estimator: the rgb and
    mask channels are exact, the geometry channels carry independent
    per-pixel perturbations (normals re-normalized afterwards).
    """
    bundle = render_ground_truth(scene, pose, resolution)
    if noise_level == 0.0:
        return bundle
    g = generator(seed)
    fg = bundle.mask > 0.5
    normal = bundle.normal.clone()
    noise_n = torch.randn(normal.shape, generator=g, dtype=normal.dtype)
    normal[fg] = normal[fg] + noise_level * noise_n[fg]
    normal[fg] = normal[fg] / normal[fg].norm(dim=-1, keepdim=True).clamp(min=1e-12)
    depth = bundle.depth.clone()
    noise_d = torch.randn(depth.shape, generator=g, dtype=depth.dtype)
    depth[fg] = (depth[fg] + noise_level * noise_d[fg]).clamp(min=1e-6)
    return ViewBundle(rgb=bundle.rgb, normal=normal, depth=depth,
                      mask=bundle.mask, pose=pose, stats=dict(bundle.stats))


def expected_angular_error_deg(noise_level: float, n: int = 200_000, seed: int = 7) -> float:
    """Monte-Carlo calibration of mean angular error for make_reference noise."""
    g = generator(seed)
    base = torch.tensor([0.0, 0.0, 1.0], dtype=torch.float64)
    noisy = base + noise_level * torch.randn(n, 3, generator=g, dtype=torch.float64)
    noisy = noisy / noisy.norm(dim=-1, keepdim=True)
    cos = noisy @ base
    return float(torch.rad2deg(torch.acos(cos.clamp(-1, 1))).mean())
