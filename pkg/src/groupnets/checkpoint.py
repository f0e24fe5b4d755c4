"""Checkpoints: a directory of named tensor files plus a structural manifest.

Each learnable parameter and each normalization buffer is one flat binary
tensor file; ``manifest.json`` records the architecture config and the
name -> file mapping. Round trips are bit exact.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .models import ArchitectureConfig, ModelState, build_model
from .tensor import load_tensor, save_tensor

MANIFEST = "manifest.json"


def _fname(name: str) -> str:
    return name.replace("/", "_") + ".bin"


def save_model(ckpt_dir, model: ModelState, extra: dict | None = None) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    params = model.named_parameters()
    buffers = model.named_buffers()
    entries = {}
    for name, t in params.items():
        save_tensor(os.path.join(ckpt_dir, _fname(name)), t.data)
        entries[name] = {"file": _fname(name), "kind": "param", "shape": list(t.data.shape)}
    for name, a in buffers.items():
        save_tensor(os.path.join(ckpt_dir, _fname(name)), a)
        entries[name] = {"file": _fname(name), "kind": "buffer", "shape": list(a.shape)}
    manifest = {
        "config": dataclasses.asdict(model.config),
        "tensors": entries,
    }
    if extra:
        manifest["extra"] = extra
    with open(os.path.join(ckpt_dir, MANIFEST), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_model(ckpt_dir) -> ModelState:
    with open(os.path.join(ckpt_dir, MANIFEST)) as f:
        manifest = json.load(f)
    cfg_dict = dict(manifest["config"])
    cfg_dict["ds_channels"] = tuple(cfg_dict["ds_channels"])
    cfg = ArchitectureConfig(**cfg_dict)
    model = build_model(cfg, np.random.default_rng(0))
    params = model.named_parameters()
    buffers = model.named_buffers()
    entries = manifest["tensors"]
    missing = (set(params) | set(buffers)) - set(entries)
    extra = set(entries) - (set(params) | set(buffers))
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
    for name, meta in entries.items():
        arr = load_tensor(os.path.join(ckpt_dir, meta["file"]))
        if name in params:
            if params[name].data.shape != arr.shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {params[name].data.shape}")
            params[name].data = arr
        else:
            buffers[name][...] = arr
    return model


def load_extra(ckpt_dir) -> dict:
    with open(os.path.join(ckpt_dir, MANIFEST)) as f:
        return json.load(f).get("extra", {})
