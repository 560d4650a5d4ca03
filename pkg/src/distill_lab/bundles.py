"""ViewBundle: a rendered or ground-truth view with its camera pose."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .cameras import CameraPose

BACKGROUND_GRAY = 0.5


@dataclass
class ViewBundle:
    """rgb [H,W,3] in [0,1], normal [H,W,3] camera-frame unit vectors inside
    the mask, depth [H,W] ray distance (positive inside the mask), mask [H,W]
    in [0,1], and the pose that produced the view."""

    rgb: torch.Tensor
    normal: torch.Tensor
    depth: torch.Tensor
    mask: torch.Tensor
    pose: CameraPose
    stats: dict = field(default_factory=dict)

    @property
    def resolution(self):
        return tuple(self.mask.shape)

    def detach(self) -> "ViewBundle":
        return ViewBundle(
            rgb=self.rgb.detach(),
            normal=self.normal.detach(),
            depth=self.depth.detach(),
            mask=self.mask.detach(),
            pose=self.pose,
            stats=dict(self.stats),
        )

    def validate(self, tol: float = 1e-4):
        """Assert the bundle invariants; raises AssertionError on violation."""
        fg = self.mask > 0.5
        if fg.any():
            norms = self.normal[fg].norm(dim=-1)
            assert torch.all((norms - 1.0).abs() <= tol), "non-unit foreground normal"
            assert torch.all(self.depth[fg] > 0), "non-positive foreground depth"
        assert torch.isfinite(self.rgb).all()
        assert torch.isfinite(self.depth).all()
        return self
