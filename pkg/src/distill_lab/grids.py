"""Dense-grid interpolation and ray/box utilities.

Grids are vertex-centered: value [i, j, k] sits at
bbox_lo + (i, j, k) * h with h = (hi - lo) / (R - 1). Interpolation is
plain trilinear, differentiable with respect to both the grid values and
the query points; the spatial gradient of the interpolant is available in
closed form (it is a linear function of the same eight corner values).

GridSampler amortizes the corner indexing and weight products across
several grids sampled at the same points (density + color share one).
"""

from __future__ import annotations

import torch

GRID_BBOX = (-1.1, 1.1)  # default representation bounds, slightly padded

_CORNER_CACHE: dict = {}


def _corner_offsets(R: int) -> torch.Tensor:
    if R not in _CORNER_CACHE:
        offs = [dx * R * R + dy * R + dz for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)]
        _CORNER_CACHE[R] = torch.tensor(offs, dtype=torch.long)
    return _CORNER_CACHE[R]


class GridSampler:
    """Trilinear sampling of one point set against any same-shape grid."""

    def __init__(self, pts: torch.Tensor, R: int, lo: float, hi: float):
        self.R = R
        h = (hi - lo) / (R - 1)
        self.h = h
        u = (pts - lo) / h
        u = u.clamp(0.0, R - 1 - 1e-6)
        i0 = u.floor().detach()
        f = u - i0
        i0 = i0.long()
        self.idx = (i0[:, 0] * (R * R) + i0[:, 1] * R + i0[:, 2])[:, None] + \
            _corner_offsets(R)[None, :]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        wx = torch.stack([1 - fx, fx], dim=1)
        wy = torch.stack([1 - fy, fy], dim=1)
        wz = torch.stack([1 - fz, fz], dim=1)
        self._w = (
            wx[:, :, None, None] * wy[:, None, :, None] * wz[:, None, None, :]
        ).reshape(-1, 1, 8)
        self._parts = (wx, wy, wz)

    def values(self, grid: torch.Tensor) -> torch.Tensor:
        """Interpolate grid [R,R,R] or [R,R,R,C]; returns [N] or [N,C]."""
        scalar = grid.dim() == 3
        C = 1 if scalar else grid.shape[3]
        flat = grid.reshape(self.R**3, C)
        corners = flat[self.idx.reshape(-1)].reshape(-1, 8, C)
        vals = torch.einsum("nk,nkc->nc", self._w[:, 0, :], corners)
        return vals[:, 0] if scalar else vals

    def values_packed(self, scalar_grid: torch.Tensor, color_grid: torch.Tensor):
        """(scalar values [N], color values [N,3]) from one fused gather."""
        packed = torch.cat([scalar_grid[..., None], color_grid], dim=-1)
        flat = packed.reshape(self.R**3, 4)
        corners = flat[self.idx.reshape(-1)].reshape(-1, 8, 4)
        vals = torch.einsum("nk,nkc->nc", self._w[:, 0, :], corners)
        return vals[:, 0], vals[:, 1:4]

    def _weight_stack(self) -> torch.Tensor:
        """[N, 4, 8]: interpolation weights and their three spatial derivatives."""
        wx, wy, wz = self._parts
        ones = torch.ones_like(wx[:, 0])
        dw = torch.stack([-ones, ones], dim=1)
        def outer(a, b, c):
            return (a[:, :, None, None] * b[:, None, :, None] * c[:, None, None, :]).reshape(-1, 8)
        return torch.stack(
            [outer(wx, wy, wz), outer(dw, wy, wz) / self.h,
             outer(wx, dw, wz) / self.h, outer(wx, wy, dw) / self.h],
            dim=1,
        )

    def values_and_grad(self, grid: torch.Tensor):
        """(values [N], spatial gradient [N,3]) for a scalar grid."""
        assert grid.dim() == 3
        flat = grid.reshape(-1)
        corners = flat[self.idx.reshape(-1)].reshape(-1, 8, 1)
        out = torch.bmm(self._weight_stack(), corners)[..., 0]
        return out[:, 0], out[:, 1:4]


def trilinear(grid: torch.Tensor, pts: torch.Tensor, lo: float = GRID_BBOX[0],
              hi: float = GRID_BBOX[1]) -> torch.Tensor:
    return GridSampler(pts, grid.shape[0], lo, hi).values(grid)


def trilinear_with_grad(grid: torch.Tensor, pts: torch.Tensor,
                        lo: float = GRID_BBOX[0], hi: float = GRID_BBOX[1]):
    return GridSampler(pts, grid.shape[0], lo, hi).values_and_grad(grid)


def ray_box_range(origins: torch.Tensor, dirs: torch.Tensor,
                  lo: float = GRID_BBOX[0], hi: float = GRID_BBOX[1]):
    """Slab-method entry/exit distances; (t_near, t_far, hit mask)."""
    inv = 1.0 / torch.where(dirs.abs() < 1e-12, torch.full_like(dirs, 1e-12), dirs)
    t0 = (lo - origins) * inv
    t1 = (hi - origins) * inv
    tmin = torch.minimum(t0, t1).max(dim=-1).values
    tmax = torch.maximum(t0, t1).min(dim=-1).values
    tmin = tmin.clamp(min=0.0)
    hit = tmax > tmin
    return tmin, tmax, hit
