"""Prediction services over a frozen autoencoder + flow pair.

All sampling takes an explicit seed and is deterministic; nothing here
mutates the models, so every function is safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autoencoder import AutoencoderModel, decode_batch, encode
from .data import FieldGrid, ParamSpace
from .errors import DomainError, UsageError
from .flow import FlowModel, extract_zc, sample_zk, unconditional_inverse

RANGE_TOLERANCE = 1e-9


@dataclass
class UqResult:
    """Alg.-style sampled prediction: elementwise mean and population variance
    of the reconstructions, plus the matching latent-space stats."""

    mean_field: FieldGrid
    var_field: FieldGrid
    n_samples: int
    mean_latent: np.ndarray
    var_latent: np.ndarray


def normalize(space: ParamSpace, raw: np.ndarray) -> np.ndarray:
    """Min-max normalize each dimension into [0, 1]."""
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.size != space.dim:
        raise DomainError(f"parameter vector has {raw.size} dims, space has {space.dim}")
    out = np.empty(space.dim)
    for i, (name, (lo, hi)) in enumerate(zip(space.names, space.ranges)):
        if raw[i] < lo - RANGE_TOLERANCE or raw[i] > hi + RANGE_TOLERANCE:
            raise DomainError(f"parameter {name!r} = {raw[i]} outside [{lo}, {hi}]")
        out[i] = (raw[i] - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def denormalize(space: ParamSpace, normalized: np.ndarray) -> np.ndarray:
    normalized = np.asarray(normalized, dtype=np.float64).ravel()
    if normalized.size != space.dim:
        raise DomainError(f"parameter vector has {normalized.size} dims, space has {space.dim}")
    out = np.empty(space.dim)
    for i, (name, (lo, hi)) in enumerate(zip(space.names, space.ranges)):
        v = normalized[i]
        if v < -RANGE_TOLERANCE or v > 1.0 + RANGE_TOLERANCE:
            raise DomainError(f"normalized parameter {name!r} = {v} outside [0, 1]")
        out[i] = lo + v * (hi - lo)
    return out


def sample_latents(flow: FlowModel, c: np.ndarray, n: int, seed) -> np.ndarray:
    """The shared sampling path: n pushed-forward draws from the conditional
    base, shape (n, d). Both prediction entry points consume the generator
    identically, so their latents agree bit for bit under one seed.

    ``seed`` is anything ``numpy.random.default_rng`` accepts; the GA passes
    per-candidate seed sequences."""
    if n < 1:
        raise UsageError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    return sample_zk(flow, c, n, rng)


def predict_latent_stats(flow: FlowModel, c: np.ndarray, n: int, seed: int):
    """Latent-space mean/variance without decoding (the GA fast path)."""
    zk = sample_latents(flow, c, n, seed)
    return zk.mean(axis=0), zk.var(axis=0)


def predict_and_quantify(flow: FlowModel, ae: AutoencoderModel, c: np.ndarray,
                         n: int, seed: int) -> UqResult:
    """Sampled surrogate prediction with uncertainty quantification.

    Draws n base samples conditioned on c, pushes each through the flow and
    the decoder, and reports the elementwise mean and population variance of
    the reconstructions.
    """
    zk = sample_latents(flow, c, n, seed)
    fields = decode_batch(ae, zk)
    mean_field = fields.mean(axis=0)
    var_field = fields.var(axis=0)
    return UqResult(
        mean_field=FieldGrid(ae.dims, mean_field, ae.value_range),
        var_field=FieldGrid(ae.dims, var_field,
                            (float(var_field.min()), float(var_field.max()))),
        n_samples=n,
        mean_latent=zk.mean(axis=0),
        var_latent=zk.var(axis=0),
    )


def reverse_predict(flow: FlowModel, ae: AutoencoderModel, x: FieldGrid) -> np.ndarray:
    """Predict normalized parameters for a field: encode, invert the
    unconditional stage, read the condition sub-vector, clamp to [0, 1]."""
    z = encode(ae, x)
    m = unconditional_inverse(flow, z)
    return np.clip(extract_zc(flow, m), 0.0, 1.0)
