"""Fully-connected autoencoder used to compress fields before flow training.

Fields are standardized with the dataset's train-split mean/std before the
encoder and de-standardized after the decoder, so checkpoints are only
meaningful together with the stats they were trained with (both live in the
checkpoint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt
from .data import Dataset, FieldGrid
from .errors import ConfigError, ShapeError, TrainingError
from .nn import AdamState, DenseNet, TrainLog, adam_step, init_dense


@dataclass
class AEConfig:
    latent_dim: int = 64
    hidden: tuple[int, ...] = (256, 256)
    epochs: int = 400
    batch_size: int = 32
    lr: float = 1e-4

    def __post_init__(self) -> None:
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass
class AutoencoderModel:
    encoder: DenseNet
    decoder: DenseNet
    dims: tuple[int, int, int]
    latent_dim: int
    mean: float
    std: float
    value_range: tuple[float, float]

    def __post_init__(self) -> None:
        d, h, w = self.dims
        if self.encoder.in_dim != d * h * w or self.encoder.out_dim != self.latent_dim:
            raise ConfigError("encoder dims inconsistent with config")
        if self.decoder.in_dim != self.latent_dim or self.decoder.out_dim != d * h * w:
            raise ConfigError("decoder dims inconsistent with config")

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.decoder.params()

    def set_params(self, params: list[np.ndarray]) -> None:
        n_enc = 2 * len(self.encoder.layers)
        self.encoder.set_params(params[:n_enc])
        self.decoder.set_params(params[n_enc:])

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


def encode(model: AutoencoderModel, x: FieldGrid) -> np.ndarray:
    """Latent representation of one field."""
    if x.dims != model.dims:
        raise ShapeError(f"field dims {x.dims} != model dims {model.dims}")
    return model.encoder.forward(model.standardize(x.values))


def encode_batch(model: AutoencoderModel, fields: np.ndarray) -> np.ndarray:
    """Latents for raw field rows of shape (N, D*H*W)."""
    return model.encoder.forward(model.standardize(np.asarray(fields, dtype=np.float64)))


def decode(model: AutoencoderModel, z: np.ndarray) -> FieldGrid:
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size != model.latent_dim:
        raise ShapeError(f"latent dim {z.size} != model latent dim {model.latent_dim}")
    values = model.destandardize(model.decoder.forward(z))
    return FieldGrid(model.dims, values, model.value_range)


def decode_batch(model: AutoencoderModel, latents: np.ndarray) -> np.ndarray:
    """Raw-space field rows for latent rows of shape (N, d)."""
    return model.destandardize(model.decoder.forward(np.asarray(latents, dtype=np.float64)))


def ae_loss(x: FieldGrid, x_prime: FieldGrid) -> float:
    """Mean squared element difference."""
    if x.dims != x_prime.dims:
        raise ShapeError(f"dims {x.dims} != {x_prime.dims}")
    diff = x.values - x_prime.values
    return float(np.mean(diff * diff))


def train_ae(dataset: Dataset, config: AEConfig, seed: int = 0) -> tuple[AutoencoderModel, TrainLog]:
    """Train on the dataset's train split; returns the model and per-epoch loss.

    Deterministic for a fixed seed: init and the minibatch schedule both come
    from one seeded generator.
    """
    train_idx = dataset.indices("train")
    if train_idx.size == 0:
        raise ConfigError("dataset has no training samples")
    rng = np.random.default_rng(seed)
    field_len = dataset.field_count()
    model = AutoencoderModel(
        encoder=init_dense([field_len, *config.hidden, config.latent_dim], rng=rng),
        decoder=init_dense([config.latent_dim, *config.hidden[::-1], field_len], rng=rng),
        dims=dataset.dims,
        latent_dim=config.latent_dim,
        mean=dataset.mean,
        std=dataset.std,
        value_range=dataset.value_range,
    )
    data = model.standardize(dataset.fields[train_idx])
    n = data.shape[0]
    params = model.params()
    state = AdamState.for_params(params)
    log = TrainLog()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            loss, grads = _ae_loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite reconstruction loss at epoch {epoch}")
            params, state = adam_step(params, grads, state, config.lr)
            model.set_params(params)
            epoch_losses.append(loss)
        log.record(epoch, float(np.mean(epoch_losses)))
    return model, log


def _ae_loss_and_grads(model: AutoencoderModel, batch: np.ndarray):
    """MSE over a standardized batch plus gradients for all parameters."""
    z, enc_cache = model.encoder.forward_cached(batch)
    out, dec_cache = model.decoder.forward_cached(z)
    diff = out - batch
    loss = float(np.mean(diff * diff))
    grad_out = 2.0 * diff / diff.size
    dec_grads, grad_z = model.decoder.backward(z, grad_out, dec_cache)
    enc_grads, _ = model.encoder.backward(batch, grad_z, enc_cache)
    return loss, enc_grads + dec_grads


def save_ae(path, model: AutoencoderModel) -> None:
    enc_specs, enc_arrays = ckpt.dense_net_arrays(model.encoder, "encoder")
    dec_specs, dec_arrays = ckpt.dense_net_arrays(model.decoder, "decoder")
    meta = {
        "dims": list(model.dims),
        "latent_dim": model.latent_dim,
        "standardization": {"mean": model.mean, "std": model.std},
        "value_range": list(model.value_range),
        "encoder_layers": enc_specs,
        "decoder_layers": dec_specs,
    }
    ckpt.save_checkpoint(path, "autoencoder", meta, {**enc_arrays, **dec_arrays})


def load_ae(path) -> AutoencoderModel:
    meta, arrays = ckpt.load_checkpoint(path, "autoencoder")
    return AutoencoderModel(
        encoder=ckpt.dense_net_from_arrays(meta["encoder_layers"], arrays, "encoder"),
        decoder=ckpt.dense_net_from_arrays(meta["decoder_layers"], arrays, "decoder"),
        dims=tuple(meta["dims"]),
        latent_dim=int(meta["latent_dim"]),
        mean=float(meta["standardization"]["mean"]),
        std=float(meta["standardization"]["std"]),
        value_range=tuple(meta["value_range"]),
    )
