"""Lossless checkpoint format: a single .npz with named arrays.

Keys: ``param/<name>`` for parameter values, ``adam/<tag>/m/<name>`` and
``adam/<tag>/v/<name>`` for optimizer moments, ``adam/<tag>/hyper`` holding
(step, beta1, beta2, eps), and ``meta`` holding a JSON string.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .adam import AdamState
from .params import ParamSet

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ParamSet, optimizers: dict[str, AdamState] | None = None,
                    meta: dict | None = None):
    arrays = {f"param/{name}": p.value for name, p in params.items()}
    for tag, st in (optimizers or {}).items():
        arrays[f"adam/{tag}/hyper"] = np.array([st.step, st.beta1, st.beta2, st.eps], dtype=np.float64)
        for name, m in st.m.items():
            arrays[f"adam/{tag}/m/{name}"] = m
            arrays[f"adam/{tag}/v/{name}"] = st.v[name]
    meta = dict(meta or {})
    meta["version"] = CHECKPOINT_VERSION
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Returns (param_state, {tag: AdamState}, meta)."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        params, opts = {}, {}
        for key in z.files:
            if key.startswith("param/"):
                params[key[len("param/"):]] = z[key].copy()
            elif key.startswith("adam/") and key.endswith("/hyper"):
                tag = key.split("/")[1]
                step, b1, b2, eps = z[key]
                opts[tag] = AdamState(float(b1), float(b2), float(eps), int(step))
        for key in z.files:
            if key.startswith("adam/") and not key.endswith("/hyper"):
                _, tag, kind, name = key.split("/", 3)
                getattr(opts[tag], kind)[name] = z[key].copy()
    return params, opts, meta
