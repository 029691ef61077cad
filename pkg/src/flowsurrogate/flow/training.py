"""Flow loss (negative log-likelihood plus condition-recovery term) and the
training loop.

The loss is evaluated through the inverse pass, which visits the intermediate
representation m on the way, so one pass serves both terms. Gradients are
assembled by chaining the per-layer inverse VJPs in reverse application
order, injecting the condition-recovery gradient where m appears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TrainingError, UsageError
from ..nn import AdamState, TrainLog, adam_step
from .model import LOG_SIGMA_CLAMP, FlowModel, build_flow


@dataclass
class FlowTrainConfig:
    k1: int = 4
    k2: int = 4
    hidden: tuple[int, ...] = (64, 64)
    alpha: float = 1.0
    epochs: int = 400
    batch_size: int = 32
    lr: float = 1e-4
    s_max: float = 2.0

    def __post_init__(self) -> None:
        if self.k1 < 0 or self.k2 < 0 or self.k1 + self.k2 == 0:
            raise ConfigError("need at least one flow block")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


def _as_batches(latents, conds, dim: int, cond_dim: int):
    z = np.asarray(latents, dtype=np.float64)
    c = np.asarray(conds, dtype=np.float64)
    if z.ndim != 2 or c.ndim != 2 or z.shape[0] != c.shape[0]:
        raise UsageError("latents and conditions must be matching (N, d) and (N, n) arrays")
    if z.shape[0] == 0:
        raise UsageError("empty batch")
    if z.shape[1] != dim or c.shape[1] != cond_dim:
        raise UsageError(f"batch dims ({z.shape[1]}, {c.shape[1]}) do not match model ({dim}, {cond_dim})")
    return z, c


def _inverse_pass_cached(model: FlowModel, z: np.ndarray, c: np.ndarray, init: bool = False):
    """Inverse pass keeping per-layer caches; returns (z0, m, logdet, caches).

    ``caches`` is a list of (layer, cache, stage) in application order, where
    stage is "u" for the unconditional part (applied first) and "c" after.
    """
    caches = []
    logdet = np.zeros(z.shape[0])
    y = z
    for layer in reversed(model.uncond_layers):
        y, ld, cache = layer.inverse_cached(y, None, init=init)
        logdet += ld
        caches.append((layer, cache, "u"))
    m = y
    for layer in reversed(model.cond_layers):
        y, ld, cache = layer.inverse_cached(y, c, init=init)
        logdet += ld
        caches.append((layer, cache, "c"))
    return y, m, logdet, caches


def flow_loss(model: FlowModel, latents, conds, alpha: float | None = None):
    """(total, nll_term, cond_term) averaged over the batch."""
    total, l_f, l_c, _ = flow_loss_and_grads(
        model, latents, conds, alpha=alpha, need_grads=False)
    return total, l_f, l_c


def flow_loss_and_grads(model: FlowModel, latents, conds,
                        alpha: float | None = None, need_grads: bool = True,
                        init_actnorm: bool = False):
    """Loss terms plus gradients matching ``model.params()`` order.

    nll_term is the mean negative log-likelihood; cond_term is the mean L1
    distance between the condition sub-vector of m and the condition.
    """
    if alpha is None:
        alpha = model.alpha
    z, c = _as_batches(latents, conds, model.dim, model.cond_dim)
    b = z.shape[0]

    z0, m, logdet, caches = _inverse_pass_cached(model, z, c, init=init_actnorm)
    mu_raw, mu_cache = model.h_mu.forward_cached(c)
    ls_raw, ls_cache = model.h_log_sigma.forward_cached(c)
    clamped = np.clip(ls_raw, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
    sigma = np.exp(clamped)
    q = (z0 - mu_raw) / sigma
    lp = -0.5 * (q * q + np.log(2.0 * np.pi) + 2.0 * clamped).sum(axis=1) + logdet

    resid = m[:, model.zc_slice] - c
    l_f = float(-lp.mean())
    l_c = float(np.abs(resid).sum(axis=1).mean())
    total = l_f + alpha * l_c
    if not need_grads:
        return total, l_f, l_c, None

    # d(total)/d(lp_b) = -1/b for every sample
    grad_z0 = (q / sigma) / b
    grad_mu = -(q / sigma) / b
    inside = (np.abs(ls_raw) < LOG_SIGMA_CLAMP).astype(np.float64)
    grad_ls = (-(q * q - 1.0) / b) * inside
    grad_logdet = np.full(b, -1.0 / b)

    # Walk last-applied -> first-applied: the conditional stage's caches come
    # second in ``caches``, so the reverse walk starts there and reaches m
    # after exhausting them; the condition-recovery gradient is injected at
    # that point before continuing through the unconditional stage.
    grads_by_layer: dict[int, list[np.ndarray]] = {}
    grad = grad_z0
    cond_caches = [entry for entry in caches if entry[2] == "c"]
    uncond_caches = [entry for entry in caches if entry[2] == "u"]
    for layer, cache, _ in reversed(cond_caches):
        grad, pgrads = layer.inverse_vjp(cache, grad, grad_logdet)
        if pgrads:
            _accumulate(grads_by_layer, layer, pgrads)
    grad[:, model.zc_slice] += (alpha / b) * np.sign(resid)
    for layer, cache, _ in reversed(uncond_caches):
        grad, pgrads = layer.inverse_vjp(cache, grad, grad_logdet)
        if pgrads:
            _accumulate(grads_by_layer, layer, pgrads)

    mu_grads, _ = model.h_mu.backward(c, grad_mu, mu_cache)
    ls_grads, _ = model.h_log_sigma.backward(c, grad_ls, ls_cache)

    grads: list[np.ndarray] = []
    for layer in model.all_layers():
        own = layer.params()
        if not own:
            continue
        acc = grads_by_layer.get(id(layer))
        if acc is None:
            acc = [np.zeros_like(p) for p in own]
        grads.extend(acc)
    grads.extend(mu_grads)
    grads.extend(ls_grads)
    return total, l_f, l_c, grads


def _accumulate(table: dict, layer, pgrads: list[np.ndarray]) -> None:
    acc = table.get(id(layer))
    if acc is None:
        table[id(layer)] = list(pgrads)
    else:
        for i, g in enumerate(pgrads):
            acc[i] = acc[i] + g


def train_flow(latents, conds, config: FlowTrainConfig, seed: int = 0):
    """Train a fresh flow on (latent, condition) pairs.

    Deterministic under a fixed seed; actnorm layers self-initialize on the
    first scheduled minibatch. Returns (model, log) where the log carries
    per-epoch total/nll/cond means.
    """
    z = np.asarray(latents, dtype=np.float64)
    c = np.asarray(conds, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ConfigError("training needs a non-empty (N, d) latent array")
    if c.ndim != 2 or c.shape[0] != z.shape[0]:
        raise ConfigError("conditions must be (N, n) aligned with latents")
    model = build_flow(
        dim=z.shape[1], cond_dim=c.shape[1], k1=config.k1, k2=config.k2,
        hidden=config.hidden, seed=seed, s_max=config.s_max, alpha=config.alpha,
    )
    rng = np.random.default_rng(seed)
    n = z.shape[0]
    params = model.params()
    state = AdamState.for_params(params)
    log = TrainLog()
    first = True
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        totals, lfs, lcs = [], [], []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            total, l_f, l_c, grads = flow_loss_and_grads(
                model, z[idx], c[idx], init_actnorm=first)
            first = False
            if not np.isfinite(total):
                term = "nll" if not np.isfinite(l_f) else "cond"
                raise TrainingError(f"non-finite {term} loss at epoch {epoch}")
            params, state = adam_step(params, grads, state, config.lr)
            model.set_params(params)
            totals.append(total)
            lfs.append(l_f)
            lcs.append(l_c)
        log.record(epoch, float(np.mean(totals)),
                   nll=float(np.mean(lfs)), cond=float(np.mean(lcs)))
    return model, log
