"""Learnable grid-backed representations: radiance, SDF surface, texture.

Dense grids stand in for hash-encoded fields: the optimization behavior is
the same class while every quantity stays directly inspectable. The SDF
grid carries a progressive resolution band in place of a progressive hash
band: locked bands see a pooled-and-upsampled (low-pass) version of the
grid, so high-frequency detail unlocks gradually during training.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .grids import GRID_BBOX, GridSampler, trilinear


class RadianceGrid(nn.Module):
    """Density + color grids; activated density = softplus, color = sigmoid."""

    def __init__(self, resolution: int = 32, bbox=GRID_BBOX,
                 density_bias: float = -1.0, dtype=torch.float32):
        super().__init__()
        self.resolution = resolution
        self.bbox = tuple(bbox)
        R = resolution
        self.density_raw = nn.Parameter(
            torch.full((R, R, R), float(density_bias), dtype=dtype)
        )
        self.color_raw = nn.Parameter(torch.zeros(R, R, R, 3, dtype=dtype))

    @property
    def dtype(self):
        return self.density_raw.dtype

    def sampler(self, pts: torch.Tensor) -> GridSampler:
        return GridSampler(pts, self.resolution, *self.bbox)

    def density(self, pts: torch.Tensor) -> torch.Tensor:
        return F.softplus(trilinear(self.density_raw, pts, *self.bbox))

    def density_and_color(self, sampler: GridSampler):
        raw, col = sampler.values_packed(self.density_raw, self.color_raw)
        return F.softplus(raw), torch.sigmoid(col)

    def normal_dir(self, pts: torch.Tensor) -> torch.Tensor:
        """Unnormalized outward normal direction at pts.

        softplus is monotone, so -grad(raw) points along -grad(density).
        """
        _, grad = self.sampler(pts).values_and_grad(self.density_raw)
        return -grad

    def color(self, pts_or_sampler) -> torch.Tensor:
        if isinstance(pts_or_sampler, GridSampler):
            return torch.sigmoid(pts_or_sampler.values(self.color_raw))
        return torch.sigmoid(trilinear(self.color_raw, pts_or_sampler, *self.bbox))

    def geometry_parameters(self):
        return {"density_raw": self.density_raw}

    def appearance_parameters(self):
        return {"color_raw": self.color_raw}


class SDFGrid(nn.Module):
    """Signed-distance grid with logistic surface density and a progressive band.

    Rendering density is s * sigmoid(-s * sdf): solid interiors, and the
    surface transition tightens monotonically as the sharpness s grows.
    """

    def __init__(self, resolution: int = 32, bbox=GRID_BBOX, base_resolution: int = 8,
                 sharpness: float = 48.0, dtype=torch.float32, init_radius: float = 0.5):
        super().__init__()
        if resolution % base_resolution:
            raise ValueError("resolution must be a multiple of base_resolution")
        self.resolution = resolution
        self.bbox = tuple(bbox)
        self.base_resolution = base_resolution
        self.max_band = int(round(math.log2(resolution / base_resolution)))
        self.band_level = self.max_band
        R = resolution
        lin = torch.linspace(bbox[0], bbox[1], R, dtype=dtype)
        gx, gy, gz = torch.meshgrid(lin, lin, lin, indexing="ij")
        init = torch.sqrt(gx**2 + gy**2 + gz**2) - init_radius
        self.sdf = nn.Parameter(init)
        self.color_raw = nn.Parameter(torch.zeros(R, R, R, 3, dtype=dtype))
        self.log_sharpness = nn.Parameter(torch.tensor(math.log(sharpness), dtype=dtype))

    @property
    def dtype(self):
        return self.sdf.dtype

    @property
    def sharpness(self) -> torch.Tensor:
        return self.log_sharpness.exp()

    def set_band_level(self, level: int):
        if not (0 <= level <= self.max_band):
            raise ValueError(f"band_level {level} outside [0, {self.max_band}]")
        self.band_level = int(level)

    def effective_sdf_grid(self) -> torch.Tensor:
        """Grid with bands above band_level low-passed away."""
        if self.band_level >= self.max_band:
            return self.sdf
        k = 2 ** (self.max_band - self.band_level)
        g = self.sdf[None, None]
        pooled = F.avg_pool3d(g, kernel_size=k)
        return F.interpolate(pooled, size=self.sdf.shape, mode="trilinear",
                             align_corners=False)[0, 0]

    def sampler(self, pts: torch.Tensor) -> GridSampler:
        return GridSampler(pts, self.resolution, *self.bbox)

    def sdf_at(self, pts: torch.Tensor) -> torch.Tensor:
        return trilinear(self.effective_sdf_grid(), pts, *self.bbox)

    def sdf_and_color(self, sampler: GridSampler, eff: torch.Tensor | None = None):
        if eff is None:
            eff = self.effective_sdf_grid()
        vals, col = sampler.values_packed(eff, self.color_raw)
        return vals, torch.sigmoid(col)

    def sdf_with_grad(self, pts_or_sampler, eff: torch.Tensor | None = None):
        if not isinstance(pts_or_sampler, GridSampler):
            pts_or_sampler = self.sampler(pts_or_sampler)
        if eff is None:
            eff = self.effective_sdf_grid()
        return pts_or_sampler.values_and_grad(eff)

    def density_at(self, sdf_vals: torch.Tensor) -> torch.Tensor:
        s = self.sharpness
        return s * torch.sigmoid(-s * sdf_vals)

    def color(self, pts_or_sampler) -> torch.Tensor:
        if isinstance(pts_or_sampler, GridSampler):
            return torch.sigmoid(pts_or_sampler.values(self.color_raw))
        return torch.sigmoid(trilinear(self.color_raw, pts_or_sampler, *self.bbox))

    def geometry_parameters(self):
        return {"sdf": self.sdf, "log_sharpness": self.log_sharpness}

    def appearance_parameters(self):
        return {"color_raw": self.color_raw}


class TextureField(nn.Module):
    """Color grid queried at surface points; activated color in [0,1]^3."""

    def __init__(self, resolution: int = 32, bbox=GRID_BBOX, dtype=torch.float32,
                 init_raw: float = 0.0):
        super().__init__()
        self.resolution = resolution
        self.bbox = tuple(bbox)
        R = resolution
        self.color_raw = nn.Parameter(torch.full((R, R, R, 3), float(init_raw), dtype=dtype))

    @property
    def dtype(self):
        return self.color_raw.dtype

    def query(self, pts: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(trilinear(self.color_raw, pts, *self.bbox))

    def appearance_parameters(self):
        return {"color_raw": self.color_raw}

    @staticmethod
    def from_color_grid(color_raw: torch.Tensor, bbox=GRID_BBOX) -> "TextureField":
        tex = TextureField(resolution=color_raw.shape[0], bbox=bbox,
                           dtype=color_raw.dtype)
        with torch.no_grad():
            tex.color_raw.copy_(color_raw)
        return tex
