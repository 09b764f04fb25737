"""Self-describing model checkpoints.

Layout::

    b"MVCK"
    header_len                 little-endian uint64
    header_len bytes of UTF-8 JSON (sorted keys)
    payload                    little-endian float64 tensors, back to back

The header carries the format version, the config echo, the seed, layer
activations, Adam scalars, scaling-state scalars and a tensor table of
``{"name", "shape", "offset"}`` entries (offsets in float64 elements).
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from . import nn
from .engine import MvcanModel, ScalingState, TrainConfig, ViewState

MAGIC = b"MVCK"
VERSION = "mvcan-ckpt/1"
_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint."""


class _Tensors:
    def __init__(self):
        self.table: List[dict] = []
        self.chunks: List[np.ndarray] = []
        self.offset = 0

    def add(self, name: str, arr: np.ndarray) -> None:
        arr = np.ascontiguousarray(arr, dtype=_F64)
        self.table.append({"name": name, "shape": list(arr.shape), "offset": self.offset})
        self.chunks.append(arr.ravel())
        self.offset += arr.size


def _add_mlp(t: _Tensors, prefix: str, layers) -> List[str]:
    for i, layer in enumerate(layers):
        t.add(f"{prefix}.{i}.weight", layer.weight)
        t.add(f"{prefix}.{i}.bias", layer.bias)
    return [layer.activation for layer in layers]


def to_bytes(model: MvcanModel) -> bytes:
    t = _Tensors()
    views_meta = []
    for v, view in enumerate(model.views):
        enc = _add_mlp(t, f"view{v}.encoder", view.encoder)
        dec = _add_mlp(t, f"view{v}.decoder", view.decoder)
        t.add(f"view{v}.centroids", view.centroids)
        opt = view.optimizer
        for i, (m, s) in enumerate(zip(opt.m, opt.v)):
            t.add(f"view{v}.adam.m.{i}", m)
            t.add(f"view{v}.adam.v.{i}", s)
        views_meta.append({"encoder": enc, "decoder": dec,
                           "adam": {"step": opt.step, "lr": opt.lr, "beta1": opt.beta1,
                                    "beta2": opt.beta2, "eps": opt.eps,
                                    "n_tensors": len(opt.m)}})
    scaling = None
    if model.scaling is not None:
        s = model.scaling
        for name in ("weights", "next_weights", "z", "centroids", "y"):
            t.add(f"scaling.{name}", getattr(s, name))
        scaling = {"t": s.t, "weight_history": s.weight_history}
    has_minmax = model.feature_min is not None
    if has_minmax:
        for v, (lo, span) in enumerate(zip(model.feature_min, model.feature_span)):
            t.add(f"view{v}.feature_min", lo)
            t.add(f"view{v}.feature_span", span)
    header = {"version": VERSION, "config": model.config.to_dict(), "seed": model.config.seed,
              "views": views_meta, "scaling": scaling, "minmax": has_minmax,
              "tensors": t.table}
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.concatenate(t.chunks).astype(_F64).tobytes() if t.chunks else b""
    return MAGIC + np.array([len(head)], dtype="<u8").tobytes() + head + payload


def _read(buf: bytes) -> Tuple[dict, Dict[str, np.ndarray]]:
    if buf[:4] != MAGIC:
        raise CheckpointError("not an MVCK checkpoint (bad magic bytes)")
    if len(buf) < 12:
        raise CheckpointError("checkpoint truncated inside the header length")
    hlen = int(np.frombuffer(buf[4:12], dtype="<u8")[0])
    if 12 + hlen > len(buf):
        raise CheckpointError("checkpoint truncated inside the header")
    try:
        header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}, "
                              f"expected {VERSION!r}")
    raw = buf[12 + hlen:]
    if len(raw) % 8:
        raise CheckpointError("payload is not a whole number of float64 values")
    flat = np.frombuffer(raw, dtype=_F64)
    tensors = {}
    for entry in header["tensors"]:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        if start + size > flat.size:
            raise CheckpointError(f"payload truncated inside tensor {entry['name']}")
        tensors[entry["name"]] = flat[start:start + size].reshape(entry["shape"]).copy()
    expected = sum(int(np.prod(e["shape"], dtype=np.int64)) for e in header["tensors"])
    if expected != flat.size:
        raise CheckpointError(f"payload holds {flat.size} values, tensor table expects {expected}")
    return header, tensors


def _mlp(tensors, prefix: str, activations) -> nn.MlpParams:
    return [nn.Layer(tensors[f"{prefix}.{i}.weight"], tensors[f"{prefix}.{i}.bias"], act)
            for i, act in enumerate(activations)]


def from_bytes(buf: bytes) -> MvcanModel:
    header, tensors = _read(buf)
    config = TrainConfig.from_dict(header["config"])
    views = []
    for v, meta in enumerate(header["views"]):
        enc = _mlp(tensors, f"view{v}.encoder", meta["encoder"])
        dec = _mlp(tensors, f"view{v}.decoder", meta["decoder"])
        a = meta["adam"]
        opt = nn.AdamState([tensors[f"view{v}.adam.m.{i}"] for i in range(a["n_tensors"])],
                           [tensors[f"view{v}.adam.v.{i}"] for i in range(a["n_tensors"])],
                           a["step"], a["lr"], a["beta1"], a["beta2"], a["eps"])
        views.append(ViewState(enc, dec, tensors[f"view{v}.centroids"], opt))
    scaling = None
    if header["scaling"] is not None:
        s = header["scaling"]
        scaling = ScalingState(s["t"], tensors["scaling.weights"], tensors["scaling.next_weights"],
                               tensors["scaling.z"], tensors["scaling.centroids"],
                               tensors["scaling.y"], s["weight_history"])
    lo = span = None
    if header["minmax"]:
        lo = [tensors[f"view{v}.feature_min"] for v in range(len(views))]
        span = [tensors[f"view{v}.feature_span"] for v in range(len(views))]
    return MvcanModel(config, views, scaling, lo, span)


def save(model: MvcanModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load(path) -> MvcanModel:
    return from_bytes(Path(path).read_bytes())
