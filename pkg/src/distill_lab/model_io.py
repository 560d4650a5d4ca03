"""Save/load trained models through the binary checkpoint container."""

from __future__ import annotations

import numpy as np
import torch

from . import denoiser as _dz
from .checkpoint import load_checkpoint, save_checkpoint
from .schedule import NoiseSchedule

_MODEL_REGISTRY = {
    "MLPDenoiser": _dz.MLPDenoiser,
    "ConvDenoiser": _dz.ConvDenoiser,
}


def save_denoiser(path, model, sched: NoiseSchedule, init_kwargs: dict,
                  extra_meta: dict | None = None,
                  extra_modules: dict | None = None):
    """Persist parameters, schedule table, condition spec and step count.

    init_kwargs must be the constructor arguments that rebuild the network;
    extra_modules (e.g. a reference encoder) are stored under prefixed array
    names and rebuilt by the caller.
    """
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    arrays["schedule/alpha"] = sched.alpha
    arrays["schedule/sigma"] = sched.sigma
    if extra_modules:
        for mod_name, module in extra_modules.items():
            for k, v in module.state_dict().items():
                arrays[f"extra/{mod_name}/{k}"] = v
    meta = {
        "model_class": type(model).__name__,
        "init_kwargs": init_kwargs,
        "cond_spec": {"kind": model.cond_kind},
        "step_count": model.step_count,
        "loss_history_tail": [float(v) for v in model.loss_history[-50:]],
        "schedule": {"T": sched.T, "kind": sched.kind},
        "extra_modules": sorted(extra_modules) if extra_modules else [],
    }
    if extra_meta:
        meta.update(extra_meta)
    return save_checkpoint(path, arrays, meta)


def load_denoiser(path, module_factories: dict | None = None):
    """Rebuild (model, schedule, meta[, extra modules]) from a container file."""
    arrays, meta = load_checkpoint(path)
    cls = _MODEL_REGISTRY[meta["model_class"]]
    model = cls(**meta["init_kwargs"])
    state = {
        k[len("param/"):]: torch.from_numpy(v)
        for k, v in arrays.items()
        if k.startswith("param/")
    }
    model.load_state_dict(state)
    model.step_count = meta["step_count"]
    sched = NoiseSchedule(
        T=meta["schedule"]["T"],
        alpha=torch.from_numpy(arrays["schedule/alpha"]),
        sigma=torch.from_numpy(arrays["schedule/sigma"]),
        kind=meta["schedule"]["kind"],
    )
    extras = {}
    for mod_name in meta.get("extra_modules", []):
        prefix = f"extra/{mod_name}/"
        sub = {
            k[len(prefix):]: torch.from_numpy(v)
            for k, v in arrays.items()
            if k.startswith(prefix)
        }
        if module_factories and mod_name in module_factories:
            module = module_factories[mod_name]()
            module.load_state_dict(sub)
            extras[mod_name] = module
        else:
            extras[mod_name] = sub
    return model, sched, meta, extras
