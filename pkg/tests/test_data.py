import numpy as np
import pytest

from flowsurrogate.data import Dataset, FieldGrid, ParamSpace, load_dataset, save_dataset, unit_param_space
from flowsurrogate.errors import ConfigError, ShapeError


def test_field_grid_validates_length():
    with pytest.raises(ShapeError):
        FieldGrid((2, 2, 2), np.zeros(7), (0.0, 1.0))


def test_field_grid_rejects_non_finite():
    vals = np.zeros(8)
    vals[3] = np.inf
    with pytest.raises(ShapeError):
        FieldGrid((2, 2, 2), vals, (0.0, 1.0))


def test_param_space_requires_min_below_max():
    with pytest.raises(ConfigError):
        ParamSpace(names=["a"], ranges=[(1.0, 1.0)])


def test_unit_space():
    space = unit_param_space(3)
    assert space.dim == 3
    assert space.ranges == [(0.0, 1.0)] * 3


def make_dataset(n=5, dims=(8, 8, 8), n_params=2, seed=0):
    rng = np.random.default_rng(seed)
    field_len = dims[0] * dims[1] * dims[2]
    return Dataset(
        dims=dims,
        space=unit_param_space(n_params),
        params=rng.random((n, n_params)),
        fields=rng.random((n, field_len)),
        splits=["train"] * (n - 1) + ["test"],
        mean=0.4,
        std=0.2,
        value_range=(0.0, 1.0),
        seed=seed,
    )


def test_dataset_round_trip(tmp_path):
    ds = make_dataset()
    stem = tmp_path / "ds"
    meta_path, blob_path = save_dataset(stem, ds)
    assert meta_path.exists() and blob_path.exists()
    loaded = load_dataset(meta_path)
    assert loaded.dims == ds.dims
    assert loaded.splits == ds.splits
    assert loaded.mean == ds.mean and loaded.std == ds.std
    # storage is float32, so round-trip equals the quantized originals
    assert np.array_equal(loaded.params, ds.params.astype("<f4").astype(np.float64))
    assert np.array_equal(loaded.fields, ds.fields.astype("<f4").astype(np.float64))


def test_dataset_blob_length_check(tmp_path):
    ds = make_dataset()
    stem = tmp_path / "ds"
    meta_path, blob_path = save_dataset(stem, ds)
    blob_path.write_bytes(blob_path.read_bytes()[:-4])
    with pytest.raises(ConfigError):
        load_dataset(meta_path)


def test_split_indices():
    ds = make_dataset(n=6)
    assert list(ds.indices("train")) == [0, 1, 2, 3, 4]
    assert list(ds.indices("test")) == [5]
