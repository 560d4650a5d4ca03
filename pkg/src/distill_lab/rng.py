"""Deterministic seed derivation.

All randomness in the package flows from explicit integer seeds. Long runs
derive one child seed per (tag, step) so a run resumed from a checkpoint
replays the identical seed stream.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
import torch

ENV_SEED_VAR = "DISTILL_LAB_SEED"
DEFAULT_SEED = 0


def derive_seed(*parts) -> int:
    """Fold (seed, tag, step, ...) into a 63-bit child seed via blake2b."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little") & 0x7FFF_FFFF_FFFF_FFFF


def generator(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(int(seed))
    return g


def np_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def resolve_seed(flag_value=None) -> int:
    """Seed precedence: explicit flag, then DISTILL_LAB_SEED, then default."""
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(ENV_SEED_VAR)
    if env is not None:
        return int(env)
    return DEFAULT_SEED
