"""Versioned checkpoint container.

A checkpoint is a single ``.npz`` file holding named float64 arrays plus a
``__meta__`` entry with a JSON document (format tag, version, shapes,
activation tags, anything else a module wants to persist). Arrays are stored
row-major; save followed by load is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError

FORMAT_VERSION = 1


def save_checkpoint(path: str | os.PathLike, kind: str, meta: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    if "__meta__" in arrays:
        raise ConfigError("'__meta__' is a reserved array name")
    doc = {"format": kind, "version": FORMAT_VERSION, **meta}
    payload = {name: np.ascontiguousarray(a, dtype=np.float64) for name, a in arrays.items()}
    payload["__meta__"] = np.frombuffer(json.dumps(doc, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise ConfigError(f"not a checkpoint file (missing metadata): {path}")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        arrays = {name: data[name] for name in data.files if name != "__meta__"}
    if meta.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {meta.get('version')} in {path}")
    if kind is not None and meta.get("format") != kind:
        raise ConfigError(f"expected {kind!r} checkpoint, found {meta.get('format')!r} in {path}")
    return meta, arrays


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dense_net_arrays(net, prefix: str) -> tuple[list[dict], dict[str, np.ndarray]]:
    """Flatten a DenseNet into checkpoint arrays plus a layer-spec list."""
    specs = []
    arrays = {}
    for i, layer in enumerate(net.layers):
        specs.append({"activation": layer.activation, "shape": list(layer.weight.shape)})
        arrays[f"{prefix}.w{i}"] = layer.weight
        arrays[f"{prefix}.b{i}"] = layer.bias
    return specs, arrays


def dense_net_from_arrays(specs: list[dict], arrays: dict[str, np.ndarray], prefix: str):
    from .nn import DenseLayer, DenseNet

    layers = []
    for i, spec in enumerate(specs):
        w = arrays[f"{prefix}.w{i}"]
        b = arrays[f"{prefix}.b{i}"]
        if list(w.shape) != spec["shape"]:
            raise ConfigError(f"checkpoint array {prefix}.w{i} has shape {w.shape}, expected {spec['shape']}")
        layers.append(DenseLayer(w, b, spec["activation"]))
    return DenseNet(layers)
