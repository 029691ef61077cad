"""Core data types and the on-disk dataset format.

A dataset is a file pair: ``<name>.json`` with metadata (grid dims,
parameter space, standardization stats, per-sample split labels) and
``<name>.bin`` with little-endian float32 samples, each sample being the raw
parameter vector followed by the row-major field values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

DATASET_VERSION = 1


@dataclass
class FieldGrid:
    """A 3-D scalar field, values stored row-major as float64."""

    dims: tuple[int, int, int]
    values: np.ndarray
    value_range: tuple[float, float]

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        d, h, w = self.dims
        if self.values.size != d * h * w:
            raise ShapeError(f"{self.values.size} values for dims {self.dims}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("field contains non-finite values")
        self.value_range = (float(self.value_range[0]), float(self.value_range[1]))

    @property
    def size(self) -> int:
        return self.values.size

    def as_3d(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def span(self) -> float:
        """Dynamic range used by PSNR/SSIM."""
        return self.value_range[1] - self.value_range[0]


@dataclass
class ParamSpace:
    """Named parameter dimensions with raw (min, max) ranges."""

    names: list[str]
    ranges: list[tuple[float, float]]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.ranges):
            raise ConfigError("names and ranges must have equal length")
        self.ranges = [(float(lo), float(hi)) for lo, hi in self.ranges]
        for name, (lo, hi) in zip(self.names, self.ranges):
            if not lo < hi:
                raise ConfigError(f"parameter {name!r} has empty range [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.names)

    def to_json(self) -> dict:
        return {"names": list(self.names), "ranges": [list(r) for r in self.ranges]}

    @classmethod
    def from_json(cls, doc: dict) -> "ParamSpace":
        return cls(names=list(doc["names"]), ranges=[tuple(r) for r in doc["ranges"]])


def unit_param_space(n: int) -> ParamSpace:
    return ParamSpace(names=[f"p{i + 1}" for i in range(n)], ranges=[(0.0, 1.0)] * n)


@dataclass
class Dataset:
    """In-memory view of a dataset file pair."""

    dims: tuple[int, int, int]
    space: ParamSpace
    params: np.ndarray        # (N, n) raw parameter vectors
    fields: np.ndarray        # (N, D*H*W) float64
    splits: list[str]         # per-sample "train" / "test"
    mean: float               # standardization stats over the train split
    std: float
    value_range: tuple[float, float]
    seed: int | None = None

    @property
    def n_samples(self) -> int:
        return self.params.shape[0]

    def indices(self, split: str) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.splits) if s == split], dtype=int)

    def field(self, i: int) -> FieldGrid:
        return FieldGrid(self.dims, self.fields[i], self.value_range)

    def field_count(self) -> int:
        d, h, w = self.dims
        return d * h * w


def save_dataset(path_stem: str | os.PathLike, dataset: Dataset) -> tuple[Path, Path]:
    """Write the metadata/blob file pair. ``path_stem`` has no extension."""
    stem = Path(path_stem)
    meta_path = stem.with_suffix(".json")
    blob_path = stem.with_suffix(".bin")
    n, n_params = dataset.params.shape
    meta = {
        "format": "dataset",
        "version": DATASET_VERSION,
        "dims": list(dataset.dims),
        "param_space": dataset.space.to_json(),
        "standardization": {"mean": dataset.mean, "std": dataset.std},
        "value_range": list(dataset.value_range),
        "samples": n,
        "splits": list(dataset.splits),
        "seed": dataset.seed,
        "blob": blob_path.name,
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    rows = np.concatenate(
        [dataset.params.astype("<f4"), dataset.fields.astype("<f4")], axis=1
    )
    tmp = blob_path.with_name(blob_path.name + ".tmp")
    rows.tofile(tmp)
    os.replace(tmp, blob_path)
    tmp = meta_path.with_name(meta_path.name + ".tmp")
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, meta_path)
    return meta_path, blob_path


def load_dataset(meta_path: str | os.PathLike) -> Dataset:
    meta_path = Path(meta_path)
    if meta_path.suffix == "":
        meta_path = meta_path.with_suffix(".json")
    if not meta_path.exists():
        raise ConfigError(f"dataset metadata not found: {meta_path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format") != "dataset" or meta.get("version") != DATASET_VERSION:
        raise ConfigError(f"not a supported dataset file: {meta_path}")
    dims = tuple(meta["dims"])
    space = ParamSpace.from_json(meta["param_space"])
    blob_path = meta_path.with_name(meta["blob"])
    if not blob_path.exists():
        raise ConfigError(f"dataset blob not found: {blob_path}")
    n = int(meta["samples"])
    n_params = space.dim
    field_len = dims[0] * dims[1] * dims[2]
    raw = np.fromfile(blob_path, dtype="<f4")
    expected = n * (n_params + field_len)
    if raw.size != expected:
        raise ConfigError(
            f"dataset blob {blob_path} has {raw.size} floats, expected {expected}"
        )
    rows = raw.reshape(n, n_params + field_len).astype(np.float64)
    return Dataset(
        dims=dims,
        space=space,
        params=rows[:, :n_params],
        fields=rows[:, n_params:],
        splits=list(meta["splits"]),
        mean=float(meta["standardization"]["mean"]),
        std=float(meta["standardization"]["std"]),
        value_range=tuple(meta["value_range"]),
        seed=meta.get("seed"),
    )
