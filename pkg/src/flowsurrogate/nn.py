"""Dense feedforward networks with hand-written reverse-mode gradients.

Everything here operates on float64 numpy arrays. A ``DenseNet`` is a plain
stack of affine layers with elementwise activations; ``backward`` returns the
exact gradient of ``<output_grad, forward(x)>`` with respect to every
parameter and the input, which is all the flow and autoencoder training
loops need. No graph tracing, no broadcasting tricks beyond an optional
leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TrainingError

ACTIVATIONS = ("tanh", "relu", "identity")


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Derivative of the activation, evaluated from cached pre/post values."""
    if name == "tanh":
        return 1.0 - post * post
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "identity":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("weight must be 2-D and bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias dim {self.bias.shape[0]} != weight rows {self.weight.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


class DenseNet:
    """Feedforward stack of ``DenseLayer``s with compatible shapes."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ShapeError("DenseNet needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise ShapeError(
                    f"layer output dim {a.weight.shape[0]} != next input dim {b.weight.shape[1]}"
                )
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list: weight, bias per layer, in order."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise ShapeError("parameter list length mismatch")
        for i, layer in enumerate(self.layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != layer.weight.shape or b.shape != layer.bias.shape:
                raise ShapeError(f"parameter shape mismatch at layer {i}")
            layer.weight = np.asarray(w, dtype=np.float64)
            layer.bias = np.asarray(b, dtype=np.float64)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cached(x)[0]

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer (input, pre, post) for backward.

        ``x`` is either a single vector ``(in,)`` or a batch ``(B, in)``.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise ShapeError(f"input dim {x.shape} incompatible with net input {self.in_dim}")
        cache = []
        for layer in self.layers:
            pre = h @ layer.weight.T + layer.bias
            post = _act(layer.activation, pre)
            cache.append((h, pre, post))
            h = post
        return (h[0] if single else h), (cache, single)

    def backward(self, x: np.ndarray, output_grad: np.ndarray, cache=None):
        """Gradients of ``<output_grad, forward(x)>``.

        Returns ``(param_grads, input_grad)`` where ``param_grads`` matches
        the layout of :meth:`params`. For batched input the parameter grads
        are summed over the batch and ``input_grad`` is per-row.
        """
        if cache is None:
            _, cache = self.forward_cached(x)
        layer_cache, single = cache
        g = np.asarray(output_grad, dtype=np.float64)
        if single:
            if g.shape != (self.out_dim,):
                raise ShapeError(f"output_grad shape {g.shape}, expected ({self.out_dim},)")
            g = g[None, :]
        else:
            if g.ndim != 2 or g.shape[1] != self.out_dim:
                raise ShapeError(f"output_grad shape {g.shape} incompatible with out dim {self.out_dim}")
            if g.shape[0] != layer_cache[0][0].shape[0]:
                raise ShapeError("output_grad batch size differs from input batch size")
        param_grads: list[np.ndarray | None] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            h_in, pre, post = layer_cache[i]
            g = g * _act_grad(layer.activation, pre, post)
            param_grads[2 * i] = g.T @ h_in
            param_grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.weight
        input_grad = g[0] if single else g
        return param_grads, input_grad


def init_dense(
    dims: list[int],
    activation: str = "tanh",
    rng: np.random.Generator | None = None,
    final_activation: str = "identity",
    zero_last: bool = False,
) -> DenseNet:
    """Build a net with the given layer dims, uniform(-a, a) weights,
    a = sqrt(6 / (fan_in + fan_out)), zero biases.

    ``zero_last`` zeroes the final layer so the net starts as the constant
    zero map (couplings and base heads start as identities that way).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if len(dims) < 2:
        raise ShapeError("need at least input and output dims")
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        last = i == len(dims) - 2
        a = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-a, a, size=(fan_out, fan_in))
        if last and zero_last:
            w = np.zeros((fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), final_activation if last else activation))
    return DenseNet(layers)


@dataclass
class AdamState:
    """Adam accumulators, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction. Returns fresh parameter arrays."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and state must have matching lengths")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} at index {i}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in tensor {i} (shape {g.shape})")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / (1.0 - b1 ** t)
        v_hat = state.v[i] / (1.0 - b2 ** t)
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state


@dataclass
class TrainLog:
    """Per-epoch loss trace produced by the training loops."""

    epochs: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def record(self, epoch: int, loss: float, **terms: float) -> None:
        self.epochs.append(epoch)
        self.losses.append(float(loss))
        for key, value in terms.items():
            self.extra.setdefault(key, []).append(float(value))
