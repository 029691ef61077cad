"""Invertible layers: actnorm, fixed permutation, affine coupling.

All layer methods are batched: inputs are (B, d) float64 arrays, log-dets are
per-sample (B,) vectors. ``forward`` is the sampling direction (base toward
data); ``inverse`` is the direction training runs in, so only the inverse
carries caches and a VJP. Each ``inverse_vjp`` returns the exact gradients of

    sum_b <grad_x[b], x[b]> + grad_logdet[b] * logdet[b]

with respect to the layer input ``y`` and the layer parameters, which is the
building block the loss backward pass chains together.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UsageError
from ..nn import DenseNet

ACTNORM_MIN_STD = 1e-6


class ActNormLayer:
    """Per-dimension affine y = scale * x + bias with data-dependent init.

    The scale is stored as its log so positivity is structural. Until
    ``init_from_batch`` runs (training does it on the first batch), using the
    layer is an error.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.log_scale = np.zeros(dim)
        self.bias = np.zeros(dim)
        self.initialized = False

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def init_from_batch(self, y: np.ndarray) -> None:
        """Set bias/scale so this batch maps to ~zero mean, ~unit variance
        through the inverse direction."""
        y = np.asarray(y, dtype=np.float64)
        self.bias = y.mean(axis=0)
        self.log_scale = np.log(np.maximum(y.std(axis=0), ACTNORM_MIN_STD))
        self.initialized = True

    def set_affine(self, scale: np.ndarray, bias: np.ndarray) -> None:
        scale = np.asarray(scale, dtype=np.float64)
        if np.any(scale <= 0):
            raise UsageError("actnorm scale must be strictly positive")
        self.log_scale = np.log(scale)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.initialized = True

    def _check(self) -> None:
        if not self.initialized:
            raise UsageError("actnorm layer used before data-dependent initialization")

    def forward(self, x: np.ndarray, c: np.ndarray | None = None):
        self._check()
        y = x * np.exp(self.log_scale) + self.bias
        logdet = np.full(x.shape[0], self.log_scale.sum())
        return y, logdet

    def inverse(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        x, logdet, _ = self.inverse_cached(y, c, init)
        return x, logdet

    def inverse_cached(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        if not self.initialized:
            if init:
                self.init_from_batch(y)
            else:
                self._check()
        x = (y - self.bias) * np.exp(-self.log_scale)
        logdet = np.full(y.shape[0], -self.log_scale.sum())
        return x, logdet, x

    def inverse_vjp(self, cache, grad_x: np.ndarray, grad_logdet: np.ndarray):
        x = cache
        inv_scale = np.exp(-self.log_scale)
        grad_y = grad_x * inv_scale
        grad_bias = -(grad_x * inv_scale).sum(axis=0)
        grad_log_scale = -(grad_x * x).sum(axis=0) - grad_logdet.sum()
        return grad_y, [grad_log_scale, grad_bias]

    def params(self) -> list[np.ndarray]:
        return [self.log_scale, self.bias]

    def set_params(self, params: list[np.ndarray]) -> None:
        self.log_scale = np.asarray(params[0], dtype=np.float64)
        self.bias = np.asarray(params[1], dtype=np.float64)


class PermutationLayer:
    """Fixed shuffle of the dimensions; volume preserving."""

    def __init__(self, perm: np.ndarray):
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise ShapeError("not a permutation of 0..d-1")
        self.perm = perm
        self.inv_perm = np.argsort(perm)

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "PermutationLayer":
        return cls(rng.permutation(dim))

    def forward(self, x: np.ndarray, c: np.ndarray | None = None):
        return x[:, self.perm], np.zeros(x.shape[0])

    def inverse(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        return y[:, self.inv_perm], np.zeros(y.shape[0])

    def inverse_cached(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        x, logdet = self.inverse(y)
        return x, logdet, None

    def inverse_vjp(self, cache, grad_x: np.ndarray, grad_logdet: np.ndarray):
        return grad_x[:, self.perm], []

    def params(self) -> list[np.ndarray]:
        return []

    def set_params(self, params: list[np.ndarray]) -> None:
        pass


class CouplingLayer:
    """Affine coupling: the first ``split`` dims pass through unchanged and
    parameterize an elementwise affine map of the rest.

    The scale is exp(s_max * tanh(raw)), bounded in [e^-s_max, e^s_max], so
    the inverse's division never degenerates. Conditional layers concatenate
    the condition vector to the subnet input.
    """

    def __init__(self, split: int, s_net: DenseNet, t_net: DenseNet,
                 conditional: bool, s_max: float = 2.0):
        self.split = split
        self.s_net = s_net
        self.t_net = t_net
        self.conditional = conditional
        self.s_max = float(s_max)

    def _net_input(self, u: np.ndarray, c: np.ndarray | None) -> np.ndarray:
        if self.conditional:
            if c is None:
                raise UsageError("conditional coupling layer needs a condition vector")
            if c.shape[0] != u.shape[0]:
                raise ShapeError("condition batch size differs from input batch size")
            return np.concatenate([u, c], axis=1)
        return u

    def _affine(self, u: np.ndarray, c: np.ndarray | None):
        net_in = self._net_input(u, c)
        raw_s = self.s_net.forward(net_in)
        a = self.s_max * np.tanh(raw_s)
        t = self.t_net.forward(net_in)
        return a, t

    def forward(self, x: np.ndarray, c: np.ndarray | None = None):
        u, v = x[:, : self.split], x[:, self.split:]
        a, t = self._affine(u, c)
        y = np.concatenate([u, t + np.exp(a) * v], axis=1)
        return y, a.sum(axis=1)

    def inverse(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        x, logdet, _ = self.inverse_cached(y, c)
        return x, logdet

    def inverse_cached(self, y: np.ndarray, c: np.ndarray | None = None, init: bool = False):
        u, yv = y[:, : self.split], y[:, self.split:]
        net_in = self._net_input(u, c)
        raw_s, s_cache = self.s_net.forward_cached(net_in)
        t, t_cache = self.t_net.forward_cached(net_in)
        tanh_raw = np.tanh(raw_s)
        a = self.s_max * tanh_raw
        v = (yv - t) * np.exp(-a)
        x = np.concatenate([u, v], axis=1)
        cache = (net_in, s_cache, t_cache, tanh_raw, a, v)
        return x, -a.sum(axis=1), cache

    def inverse_vjp(self, cache, grad_x: np.ndarray, grad_logdet: np.ndarray):
        net_in, s_cache, t_cache, tanh_raw, a, v = cache
        grad_u_out = grad_x[:, : self.split]
        grad_v = grad_x[:, self.split:]
        exp_neg_a = np.exp(-a)
        grad_yv = grad_v * exp_neg_a
        grad_t = -grad_yv
        grad_a = -grad_v * v - grad_logdet[:, None]
        grad_raw_s = grad_a * self.s_max * (1.0 - tanh_raw * tanh_raw)
        s_grads, grad_in_s = self.s_net.backward(net_in, grad_raw_s, s_cache)
        t_grads, grad_in_t = self.t_net.backward(net_in, grad_t, t_cache)
        grad_u = grad_u_out + (grad_in_s + grad_in_t)[:, : self.split]
        grad_y = np.concatenate([grad_u, grad_yv], axis=1)
        return grad_y, s_grads + t_grads

    def params(self) -> list[np.ndarray]:
        return self.s_net.params() + self.t_net.params()

    def set_params(self, params: list[np.ndarray]) -> None:
        n_s = 2 * len(self.s_net.layers)
        self.s_net.set_params(params[:n_s])
        self.t_net.set_params(params[n_s:])
