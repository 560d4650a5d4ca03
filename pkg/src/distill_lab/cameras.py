"""Camera model shared by every renderer.

World frame is y-up. A pose orbits the origin: the eye sits at

    eye = radius * (cos(el) sin(az), sin(el), cos(el) cos(az))

looking at the origin. The camera frame is (right, up, back) with the
camera looking down its -z axis, so a surface facing the camera has
normal (0, 0, 1) in camera coordinates. Depth maps store Euclidean
distance along the ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import torch

FOV_MIN_DEG = 5.0
FOV_MAX_DEG = 120.0


@dataclass(frozen=True)
class CameraPose:
    """Orbit pose: angles in degrees, radius in scene units, vertical fov."""

    elevation: float
    azimuth: float
    radius: float
    fov: float = 45.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not (FOV_MIN_DEG <= self.fov <= FOV_MAX_DEG):
            raise ValueError(f"fov {self.fov} outside [{FOV_MIN_DEG}, {FOV_MAX_DEG}]")

    def with_fov(self, fov: float) -> "CameraPose":
        return replace(self, fov=fov)


@dataclass(frozen=True)
class PoseDelta:
    """Relative pose of a novel view against a reference view."""

    d_elevation: float
    d_azimuth: float
    d_radius: float
    fov: float

    def features(self, dtype=torch.float32) -> torch.Tensor:
        """5-dim conditioning features: (d_el, sin d_az, cos d_az, d_r, fov)."""
        daz = math.radians(self.d_azimuth)
        return torch.tensor(
            [
                math.radians(self.d_elevation),
                math.sin(daz),
                math.cos(daz),
                self.d_radius,
                math.radians(self.fov),
            ],
            dtype=dtype,
        )


def relative_pose(ref: CameraPose, novel: CameraPose) -> PoseDelta:
    d_az = (novel.azimuth - ref.azimuth + 180.0) % 360.0 - 180.0
    return PoseDelta(
        d_elevation=novel.elevation - ref.elevation,
        d_azimuth=d_az,
        d_radius=novel.radius - ref.radius,
        fov=novel.fov,
    )


def camera_basis(pose: CameraPose, dtype=torch.float64):
    """(eye, right, up, back) world-frame vectors for the pose."""
    el = math.radians(pose.elevation)
    az = math.radians(pose.azimuth)
    eye = torch.tensor(
        [
            pose.radius * math.cos(el) * math.sin(az),
            pose.radius * math.sin(el),
            pose.radius * math.cos(el) * math.cos(az),
        ],
        dtype=dtype,
    )
    forward = -eye / eye.norm()
    world_up = torch.tensor([0.0, 1.0, 0.0], dtype=dtype)
    if abs(float(forward[1])) > 0.999:  # looking straight up/down
        world_up = torch.tensor([0.0, 0.0, 1.0], dtype=dtype)
    right = torch.linalg.cross(forward, world_up)
    right = right / right.norm()
    up = torch.linalg.cross(right, forward)
    back = -forward
    return eye, right, up, back


def world_to_camera_matrix(pose: CameraPose, dtype=torch.float64) -> torch.Tensor:
    """Rows (right, up, back): applies to world vectors, v_cam = R @ v_world."""
    _, right, up, back = camera_basis(pose, dtype)
    return torch.stack([right, up, back], dim=0)


def pixel_rays(pose: CameraPose, height: int, width: int, dtype=torch.float64):
    """Per-pixel ray origins and unit directions, row 0 at the top.

    Returns (origins [H,W,3], dirs [H,W,3]).
    """
    eye, right, up, back = camera_basis(pose, dtype)
    forward = -back
    tan_half = math.tan(math.radians(pose.fov) / 2.0)
    aspect = width / height
    jj = (torch.arange(width, dtype=dtype) + 0.5) / width * 2.0 - 1.0
    ii = (torch.arange(height, dtype=dtype) + 0.5) / height * 2.0 - 1.0
    uy, ux = torch.meshgrid(ii, jj, indexing="ij")
    dirs = (
        ux[..., None] * (tan_half * aspect) * right
        + (-uy[..., None]) * tan_half * up
        + forward
    )
    dirs = dirs / dirs.norm(dim=-1, keepdim=True)
    origins = eye.expand(height, width, 3)
    return origins, dirs


def project_points(points: torch.Tensor, pose: CameraPose, height: int, width: int):
    """Project world points to (pixel xy, camera depth along -z).

    Returns (px [N], py [N], zc [N]) with zc positive in front of the camera;
    px/py are continuous pixel-center coordinates matching pixel_rays.
    """
    eye, right, up, back = camera_basis(pose, dtype=points.dtype)
    rel = points - eye
    xc = rel @ right
    yc = rel @ up
    zc = rel @ (-back)  # positive in front
    tan_half = math.tan(math.radians(pose.fov) / 2.0)
    aspect = width / height
    xs = xc / zc.clamp(min=1e-9) / (tan_half * aspect)
    ys = yc / zc.clamp(min=1e-9) / tan_half
    px = (xs + 1.0) / 2.0 * width - 0.5
    py = (1.0 - ys) / 2.0 * height - 0.5
    return px, py, zc
