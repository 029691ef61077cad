"""Analytic stand-in for the expensive simulation.

``generate_field`` maps a normalized parameter vector to a smooth 3-D scalar
field: a movable Gaussian bump (position from c1/c2, width from c3), a fixed
secondary bump whose amplitude is c4, and a linear background along z. The
family is deterministic and the parameters are identifiable from the field,
so reverse-prediction accuracy has a well-posed ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FieldGrid, ParamSpace, save_dataset, unit_param_space
from .errors import ConfigError, DomainError

SECOND_BUMP_CENTER = (0.75, 0.25, 0.5)
SECOND_BUMP_SIGMA = 0.15
BACKGROUND_SLOPE = 0.2


@dataclass
class SynthConfig:
    resolution: tuple[int, int, int] = (16, 16, 16)
    n_params: int = 4
    seed: int = 0
    train_count: int = 128
    test_count: int = 20
    space: ParamSpace | None = None  # raw ranges; unit box when omitted

    def __post_init__(self) -> None:
        self.resolution = tuple(int(r) for r in self.resolution)
        if len(self.resolution) != 3 or any(r < 8 for r in self.resolution):
            raise ConfigError("resolution must be three axes of at least 8")
        if self.n_params < 1:
            raise ConfigError("n_params must be >= 1")
        if self.train_count < 1 or self.test_count < 1:
            raise ConfigError("train and test counts must be >= 1")
        if self.space is None:
            self.space = unit_param_space(self.n_params)
        elif self.space.dim != self.n_params:
            raise ConfigError("space dimensionality differs from n_params")


def _effective_params(c: np.ndarray) -> np.ndarray:
    """First four normalized parameters; missing ones default to 0.5."""
    c = np.asarray(c, dtype=np.float64).ravel()
    if np.any(c < -1e-9) or np.any(c > 1.0 + 1e-9):
        bad = int(np.argmax((c < -1e-9) | (c > 1.0 + 1e-9)))
        raise DomainError(f"normalized parameter {bad} = {c[bad]} outside [0, 1]")
    out = np.full(4, 0.5)
    out[: min(4, c.size)] = c[:4]
    return out


def field_value(c: np.ndarray, v: np.ndarray) -> float:
    """Closed-form field value at unit-cube point ``v = (x, y, z)``."""
    c1, c2, c3, c4 = _effective_params(c)
    v = np.asarray(v, dtype=np.float64)
    mu1 = np.array([0.2 + 0.6 * c1, 0.2 + 0.6 * c2, 0.5])
    sigma1 = 0.05 + 0.2 * c3
    mu2 = np.array(SECOND_BUMP_CENTER)
    bump1 = np.exp(-np.sum((v - mu1) ** 2) / (2.0 * sigma1 ** 2))
    bump2 = c4 * np.exp(-np.sum((v - mu2) ** 2) / (2.0 * SECOND_BUMP_SIGMA ** 2))
    return float(bump1 + bump2 + BACKGROUND_SLOPE * v[2])


def generate_field(c: np.ndarray, resolution: tuple[int, int, int] = (16, 16, 16)) -> FieldGrid:
    """Sample the analytic field on a (D, H, W) grid over the unit cube.

    Axis 0 (depth) runs along z, axis 1 along y, axis 2 along x; each axis is
    an inclusive linspace(0, 1, size).
    """
    c1, c2, c3, c4 = _effective_params(c)
    d, h, w = (int(r) for r in resolution)
    vz = np.linspace(0.0, 1.0, d)[:, None, None]
    vy = np.linspace(0.0, 1.0, h)[None, :, None]
    vx = np.linspace(0.0, 1.0, w)[None, None, :]
    mu1 = (0.2 + 0.6 * c1, 0.2 + 0.6 * c2, 0.5)
    sigma1 = 0.05 + 0.2 * c3
    mu2 = SECOND_BUMP_CENTER
    d1 = (vx - mu1[0]) ** 2 + (vy - mu1[1]) ** 2 + (vz - mu1[2]) ** 2
    d2 = (vx - mu2[0]) ** 2 + (vy - mu2[1]) ** 2 + (vz - mu2[2]) ** 2
    vals = (
        np.exp(-d1 / (2.0 * sigma1 ** 2))
        + c4 * np.exp(-d2 / (2.0 * SECOND_BUMP_SIGMA ** 2))
        + BACKGROUND_SLOPE * (vz + 0.0 * vx + 0.0 * vy)
    )
    flat = vals.ravel()
    return FieldGrid((d, h, w), flat, (float(flat.min()), float(flat.max())))


def latin_hypercube(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Stratified samples in [0,1]^dim: each of ``count`` bins hit once per dim."""
    out = np.empty((count, dim))
    for j in range(dim):
        perm = rng.permutation(count)
        out[:, j] = (perm + rng.random(count)) / count
    return out


def make_dataset(cfg: SynthConfig, out_stem: str | None = None) -> Dataset:
    """Generate the (parameter, field) corpus and optionally write the file pair.

    Train and test parameters come from two independent Latin-hypercube draws
    of the seeded generator; standardization stats and the value range are
    measured on the train split only.
    """
    rng = np.random.default_rng(cfg.seed)
    train_norm = latin_hypercube(cfg.train_count, cfg.n_params, rng)
    test_norm = latin_hypercube(cfg.test_count, cfg.n_params, rng)
    norm = np.vstack([train_norm, test_norm])
    splits = ["train"] * cfg.train_count + ["test"] * cfg.test_count

    lo = np.array([r[0] for r in cfg.space.ranges])
    hi = np.array([r[1] for r in cfg.space.ranges])
    raw = lo + norm * (hi - lo)

    field_len = cfg.resolution[0] * cfg.resolution[1] * cfg.resolution[2]
    fields = np.empty((norm.shape[0], field_len))
    for i in range(norm.shape[0]):
        fields[i] = generate_field(norm[i], cfg.resolution).values

    train_fields = fields[: cfg.train_count]
    mean = float(train_fields.mean())
    std = float(train_fields.std())
    dataset = Dataset(
        dims=cfg.resolution,
        space=cfg.space,
        params=raw,
        fields=fields,
        splits=splits,
        mean=mean,
        std=std if std > 0 else 1.0,
        value_range=(float(train_fields.min()), float(train_fields.max())),
        seed=cfg.seed,
    )
    if out_stem is not None:
        save_dataset(out_stem, dataset)
    return dataset
