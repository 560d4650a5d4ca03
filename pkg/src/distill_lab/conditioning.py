"""Condition records passed to denoisers.

Class labels play the text-prompt role at desk scale; view conditions carry
a reference-view embedding plus relative camera pose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from .cameras import PoseDelta

KIND_NONE = "none"
KIND_CLASS = "class_label"
KIND_VIEW = "view"


@dataclass(frozen=True)
class Condition:
    kind: str = KIND_NONE
    label: Optional[torch.Tensor] = None  # long [] or [B]
    ref_embedding: Optional[torch.Tensor] = None  # [E] or [B, E]
    rel_pose: Optional[torch.Tensor] = None  # pose features [5] or [B, 5]

    def __post_init__(self):
        if self.kind == KIND_NONE:
            assert self.label is None and self.ref_embedding is None and self.rel_pose is None, \
                "kind=none carries an empty payload"
        elif self.kind == KIND_CLASS:
            assert self.label is not None
        elif self.kind == KIND_VIEW:
            assert self.ref_embedding is not None and self.rel_pose is not None
        else:
            raise ValueError(f"unknown condition kind {self.kind!r}")

    @property
    def is_none(self) -> bool:
        return self.kind == KIND_NONE


NONE = Condition()


def class_condition(label) -> Condition:
    return Condition(kind=KIND_CLASS, label=torch.as_tensor(label, dtype=torch.long))


def view_condition(ref_embedding: torch.Tensor, rel_pose) -> Condition:
    if isinstance(rel_pose, PoseDelta):
        rel_pose = rel_pose.features()
    return Condition(kind=KIND_VIEW, ref_embedding=ref_embedding,
                     rel_pose=torch.as_tensor(rel_pose))
