"""Conditional normalizing flow with a condition-dependent Gaussian base.

The stack is K1 conditional blocks followed by K2 unconditional blocks, each
block being actnorm, a fixed seeded permutation, then an affine coupling.
``forward`` runs base-to-data; densities of data points are computed through
the inverse pass, whose accumulated log-det is exactly the change-of-variables
correction. The last ``n`` dimensions of the intermediate representation
(between the two stages) are trained to reproduce the condition vector, which
is what makes reverse prediction a pure inverse pass through the
unconditional stage.
"""

from __future__ import annotations

import numpy as np

from .. import checkpoint as ckpt
from ..errors import ConfigError, DomainError, ShapeError
from ..nn import DenseNet, init_dense
from .layers import ActNormLayer, CouplingLayer, PermutationLayer

LOG_SIGMA_CLAMP = 10.0


class FlowModel:
    def __init__(self, cond_layers: list, uncond_layers: list,
                 h_mu: DenseNet, h_log_sigma: DenseNet,
                 dim: int, cond_dim: int, zc_start: int | None = None,
                 alpha: float = 1.0):
        if cond_dim > dim:
            raise ConfigError("condition dim cannot exceed latent dim")
        self.cond_layers = cond_layers
        self.uncond_layers = uncond_layers
        self.h_mu = h_mu
        self.h_log_sigma = h_log_sigma
        self.dim = dim
        self.cond_dim = cond_dim
        self.zc_start = dim - cond_dim if zc_start is None else zc_start
        if not 0 <= self.zc_start <= dim - cond_dim:
            raise ConfigError("zc slice does not fit inside the latent dim")
        self.alpha = float(alpha)
        self.ae_ref: dict | None = None  # {"name", "sha256"} of the paired AE

    @property
    def zc_slice(self) -> slice:
        return slice(self.zc_start, self.zc_start + self.cond_dim)

    def all_layers(self) -> list:
        return list(self.cond_layers) + list(self.uncond_layers)

    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.all_layers():
            out.extend(layer.params())
        out.extend(self.h_mu.params())
        out.extend(self.h_log_sigma.params())
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        i = 0
        for layer in self.all_layers():
            k = len(layer.params())
            layer.set_params(params[i:i + k])
            i += k
        k = len(self.h_mu.params())
        self.h_mu.set_params(params[i:i + k])
        i += k
        self.h_log_sigma.set_params(params[i:])

    def actnorms_initialized(self) -> bool:
        return all(l.initialized for l in self.all_layers() if isinstance(l, ActNormLayer))


def build_flow(dim: int, cond_dim: int, k1: int = 4, k2: int = 4,
               hidden: tuple[int, ...] = (64, 64), seed: int = 0,
               s_max: float = 2.0, init_scale: float = 0.0,
               alpha: float = 1.0) -> FlowModel:
    """Assemble a model with seeded permutations and near-identity init.

    Coupling subnets and base heads get zero final layers, so a fresh model
    is the identity map with a standard-normal base; ``init_scale`` instead
    fills those final layers with small uniform weights, which is what the
    randomized invertibility and density tests want.
    """
    if dim < 2:
        raise ConfigError("flow dim must be >= 2")
    rng = np.random.default_rng(seed)
    split = dim // 2
    tail = dim - split

    def make_stage(count: int, conditional: bool) -> list:
        layers = []
        in_dim = split + (cond_dim if conditional else 0)
        for _ in range(count):
            layers.append(ActNormLayer(dim))
            layers.append(PermutationLayer.random(dim, rng))
            s_net = init_dense([in_dim, *hidden, tail], rng=rng, zero_last=init_scale == 0.0)
            t_net = init_dense([in_dim, *hidden, tail], rng=rng, zero_last=init_scale == 0.0)
            if init_scale > 0.0:
                for net in (s_net, t_net):
                    last = net.layers[-1]
                    last.weight = rng.uniform(-init_scale, init_scale, size=last.weight.shape)
            layers.append(CouplingLayer(split, s_net, t_net, conditional, s_max))
        return layers

    cond_layers = make_stage(k1, True)
    uncond_layers = make_stage(k2, False)
    h_mu = init_dense([cond_dim, *hidden, dim], rng=rng, zero_last=init_scale == 0.0)
    h_log_sigma = init_dense([cond_dim, *hidden, dim], rng=rng, zero_last=init_scale == 0.0)
    if init_scale > 0.0:
        for net in (h_mu, h_log_sigma):
            last = net.layers[-1]
            last.weight = rng.uniform(-init_scale, init_scale, size=last.weight.shape)
    return FlowModel(cond_layers, uncond_layers, h_mu, h_log_sigma, dim, cond_dim, alpha=alpha)


def init_actnorm_identity(model: FlowModel) -> None:
    """Mark every actnorm as scale 1, bias 0 (for models not trained on data)."""
    for layer in model.all_layers():
        if isinstance(layer, ActNormLayer):
            layer.set_affine(np.ones(model.dim), np.zeros(model.dim))


def _promote(x: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{what} has shape {x.shape}, expected dim {dim}")
    return x, single


def _promote_pair(model: FlowModel, z: np.ndarray, c: np.ndarray):
    z, z_single = _promote(z, model.dim, "latent")
    c, c_single = _promote(c, model.cond_dim, "condition")
    if c.shape[0] == 1 and z.shape[0] > 1:
        c = np.broadcast_to(c, (z.shape[0], model.cond_dim))
    if c.shape[0] != z.shape[0]:
        raise ShapeError("latent and condition batch sizes differ")
    return z, c, z_single


def base_params(model: FlowModel, c: np.ndarray):
    """Condition-dependent Gaussian base: mean and (clamped, positive) std."""
    c, single = _promote(c, model.cond_dim, "condition")
    mu = model.h_mu.forward(c)
    log_sigma = np.clip(model.h_log_sigma.forward(c), -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
    sigma = np.exp(log_sigma)
    if single:
        return mu[0], sigma[0]
    return mu, sigma


def gaussian_logprob(z0: np.ndarray, mu: np.ndarray, sigma: np.ndarray):
    z0 = np.asarray(z0, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if z0.shape != mu.shape or z0.shape != sigma.shape:
        raise ShapeError(f"shapes differ: {z0.shape}, {mu.shape}, {sigma.shape}")
    if np.any(sigma <= 0):
        raise DomainError("sigma must be strictly positive")
    q = (z0 - mu) / sigma
    per_dim = q * q + np.log(2.0 * np.pi * sigma * sigma)
    total = -0.5 * per_dim.sum(axis=-1)
    return float(total) if z0.ndim == 1 else total


def conditional_forward(model: FlowModel, z0: np.ndarray, c: np.ndarray):
    """Apply the conditional stage: z0 -> m."""
    z, c, single = _promote_pair(model, z0, c)
    logdet = np.zeros(z.shape[0])
    for layer in model.cond_layers:
        z, ld = layer.forward(z, c)
        logdet += ld
    return (z[0], float(logdet[0])) if single else (z, logdet)


def unconditional_forward(model: FlowModel, m: np.ndarray):
    """Apply the unconditional stage: m -> zK."""
    z, single = _promote(m, model.dim, "latent")
    logdet = np.zeros(z.shape[0])
    for layer in model.uncond_layers:
        z, ld = layer.forward(z, None)
        logdet += ld
    return (z[0], float(logdet[0])) if single else (z, logdet)


def flow_forward(model: FlowModel, z0: np.ndarray, c: np.ndarray, return_m: bool = False):
    """Full forward pass; optionally also returns the intermediate m."""
    z, c, single = _promote_pair(model, z0, c)
    m, logdet = conditional_forward(model, z, c)
    zk, ld2 = unconditional_forward(model, m)
    logdet = logdet + ld2
    if single:
        out = (zk[0], float(logdet[0]))
        return (*out, m[0]) if return_m else out
    return (zk, logdet, m) if return_m else (zk, logdet)


def flow_inverse(model: FlowModel, zk: np.ndarray, c: np.ndarray):
    """Full inverse pass zK -> z0 (both stages)."""
    z, c, single = _promote_pair(model, zk, c)
    z0, _ = _inverse_with_logdet(model, z, c)
    return z0[0] if single else z0


def _inverse_with_logdet(model: FlowModel, zk: np.ndarray, c: np.ndarray | None,
                         init: bool = False):
    z = zk
    logdet = np.zeros(z.shape[0])
    for layer in reversed(model.uncond_layers):
        z, ld = layer.inverse(z, None, init=init)
        logdet += ld
    for layer in reversed(model.cond_layers):
        z, ld = layer.inverse(z, c, init=init)
        logdet += ld
    return z, logdet


def unconditional_inverse(model: FlowModel, zk: np.ndarray):
    """Invert only the unconditional stage: zK -> m. Needs no condition."""
    z, single = _promote(zk, model.dim, "latent")
    for layer in reversed(model.uncond_layers):
        z, _ = layer.inverse(z, None)
    return z[0] if single else z


def extract_zc(model: FlowModel, m: np.ndarray) -> np.ndarray:
    """The condition-valued sub-vector of the intermediate representation."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1] != model.dim:
        raise ShapeError(f"intermediate has dim {m.shape[-1]}, expected {model.dim}")
    return m[..., model.zc_slice]


def log_likelihood(model: FlowModel, z: np.ndarray, c: np.ndarray):
    """Exact log density of data latents under the modeled conditional
    distribution, evaluated through the inverse pass."""
    zb, cb, single = _promote_pair(model, z, c)
    z0, logdet_inv = _inverse_with_logdet(model, zb, cb)
    mu, sigma = base_params(model, cb)
    lp = gaussian_logprob(z0, mu, sigma) + logdet_inv
    return float(lp[0]) if single else lp


def sample_zk(model: FlowModel, c: np.ndarray, count: int,
              rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` base samples for one condition and push them forward."""
    c = np.asarray(c, dtype=np.float64).ravel()
    if c.size != model.cond_dim:
        raise ShapeError(f"condition dim {c.size}, expected {model.cond_dim}")
    mu, sigma = base_params(model, c)
    z0 = mu[None, :] + sigma[None, :] * rng.standard_normal((count, model.dim))
    cb = np.broadcast_to(c, (count, model.cond_dim))
    m, _ = conditional_forward(model, z0, cb)
    zk, _ = unconditional_forward(model, m)
    return zk


# --- single-layer convenience wrappers -------------------------------------

def coupling_forward(layer: CouplingLayer, z: np.ndarray, c: np.ndarray | None = None):
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    cb = None
    if c is not None:
        c = np.asarray(c, dtype=np.float64)
        cb = c[None, :] if c.ndim == 1 else c
        if cb.shape[0] == 1 and zb.shape[0] > 1:
            cb = np.broadcast_to(cb, (zb.shape[0], cb.shape[1]))
    y, logdet = layer.forward(zb, cb)
    return (y[0], float(logdet[0])) if single else (y, logdet)


def coupling_inverse(layer: CouplingLayer, z_prime: np.ndarray, c: np.ndarray | None = None):
    z = np.asarray(z_prime, dtype=np.float64)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    cb = None
    if c is not None:
        c = np.asarray(c, dtype=np.float64)
        cb = c[None, :] if c.ndim == 1 else c
        if cb.shape[0] == 1 and zb.shape[0] > 1:
            cb = np.broadcast_to(cb, (zb.shape[0], cb.shape[1]))
    x, _ = layer.inverse(zb, cb)
    return x[0] if single else x


# --- checkpoint -------------------------------------------------------------

def _stack_to_arrays(layers: list, prefix: str):
    specs = []
    arrays: dict[str, np.ndarray] = {}
    for i, layer in enumerate(layers):
        key = f"{prefix}{i}"
        if isinstance(layer, ActNormLayer):
            specs.append({"type": "actnorm", "initialized": bool(layer.initialized)})
            arrays[f"{key}.log_scale"] = layer.log_scale
            arrays[f"{key}.bias"] = layer.bias
        elif isinstance(layer, PermutationLayer):
            specs.append({"type": "permutation"})
            arrays[f"{key}.perm"] = layer.perm.astype(np.float64)
        elif isinstance(layer, CouplingLayer):
            s_specs, s_arrays = ckpt.dense_net_arrays(layer.s_net, f"{key}.s")
            t_specs, t_arrays = ckpt.dense_net_arrays(layer.t_net, f"{key}.t")
            specs.append({
                "type": "coupling", "split": layer.split,
                "conditional": layer.conditional, "s_max": layer.s_max,
                "s_net": s_specs, "t_net": t_specs,
            })
            arrays.update(s_arrays)
            arrays.update(t_arrays)
        else:
            raise ConfigError(f"unknown layer type {type(layer)!r}")
    return specs, arrays


def _stack_from_arrays(specs: list, arrays: dict, prefix: str, dim: int) -> list:
    layers = []
    for i, spec in enumerate(specs):
        key = f"{prefix}{i}"
        if spec["type"] == "actnorm":
            layer = ActNormLayer(dim)
            layer.log_scale = arrays[f"{key}.log_scale"]
            layer.bias = arrays[f"{key}.bias"]
            layer.initialized = bool(spec["initialized"])
            layers.append(layer)
        elif spec["type"] == "permutation":
            layers.append(PermutationLayer(arrays[f"{key}.perm"].astype(np.int64)))
        elif spec["type"] == "coupling":
            layers.append(CouplingLayer(
                split=int(spec["split"]),
                s_net=ckpt.dense_net_from_arrays(spec["s_net"], arrays, f"{key}.s"),
                t_net=ckpt.dense_net_from_arrays(spec["t_net"], arrays, f"{key}.t"),
                conditional=bool(spec["conditional"]),
                s_max=float(spec["s_max"]),
            ))
        else:
            raise ConfigError(f"unknown layer spec {spec['type']!r}")
    return layers


def save_flow(path, model: FlowModel) -> None:
    cond_specs, cond_arrays = _stack_to_arrays(model.cond_layers, "c")
    uncond_specs, uncond_arrays = _stack_to_arrays(model.uncond_layers, "u")
    mu_specs, mu_arrays = ckpt.dense_net_arrays(model.h_mu, "h_mu")
    ls_specs, ls_arrays = ckpt.dense_net_arrays(model.h_log_sigma, "h_log_sigma")
    meta = {
        "dim": model.dim,
        "cond_dim": model.cond_dim,
        "zc_start": model.zc_start,
        "alpha": model.alpha,
        "cond_layers": cond_specs,
        "uncond_layers": uncond_specs,
        "h_mu_layers": mu_specs,
        "h_log_sigma_layers": ls_specs,
        "ae_ref": model.ae_ref,
    }
    ckpt.save_checkpoint(path, "flow", meta,
                         {**cond_arrays, **uncond_arrays, **mu_arrays, **ls_arrays})


def load_flow(path) -> FlowModel:
    meta, arrays = ckpt.load_checkpoint(path, "flow")
    dim = int(meta["dim"])
    model = FlowModel(
        cond_layers=_stack_from_arrays(meta["cond_layers"], arrays, "c", dim),
        uncond_layers=_stack_from_arrays(meta["uncond_layers"], arrays, "u", dim),
        h_mu=ckpt.dense_net_from_arrays(meta["h_mu_layers"], arrays, "h_mu"),
        h_log_sigma=ckpt.dense_net_from_arrays(meta["h_log_sigma_layers"], arrays, "h_log_sigma"),
        dim=dim,
        cond_dim=int(meta["cond_dim"]),
        zc_start=int(meta["zc_start"]),
        alpha=float(meta["alpha"]),
    )
    model.ae_ref = meta.get("ae_ref")
    return model
