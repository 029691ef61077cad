"""Evaluation metrics and the metrics report.

PSNR works on the full volume, SSIM on the central depth slice with a 7x7
uniform window (valid positions only). Both take the dynamic range from the
reference field's recorded value_range, not per-pair extrema, so scores are
comparable across samples.
"""

from __future__ import annotations

import math

import numpy as np

from .autoencoder import AutoencoderModel, decode, encode
from .data import Dataset, FieldGrid
from .errors import DomainError, ShapeError, UsageError
from .flow import FlowModel
from .surrogate import normalize, predict_and_quantify, reverse_predict

SSIM_WINDOW = 7


def psnr(a: FieldGrid, b: FieldGrid) -> float:
    """10 log10(L^2 / MSE); math.inf for identical fields."""
    if a.dims != b.dims:
        raise ShapeError(f"dims {a.dims} != {b.dims}")
    diff = a.values - b.values
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    span = a.span()
    return 10.0 * math.log10(span * span / mse)


def ssim(a: FieldGrid, b: FieldGrid) -> float:
    """Mean local SSIM over the central depth slice."""
    if a.dims != b.dims:
        raise ShapeError(f"dims {a.dims} != {b.dims}")
    d, h, w = a.dims
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise UsageError(f"central slice {h}x{w} smaller than {SSIM_WINDOW}x{SSIM_WINDOW} window")
    sa = a.as_3d()[d // 2]
    sb = b.as_3d()[d // 2]
    span = a.span()
    c1 = (0.01 * span) ** 2
    c2 = (0.03 * span) ** 2
    wa = np.lib.stride_tricks.sliding_window_view(sa, (SSIM_WINDOW, SSIM_WINDOW))
    wb = np.lib.stride_tricks.sliding_window_view(sb, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    var_a = (wa * wa).mean(axis=(2, 3)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def mae_params(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.size != gt.size:
        raise ShapeError(f"parameter dims differ: {pred.size} vs {gt.size}")
    return float(np.mean(np.abs(pred - gt)))


def cosine_sim(pred: np.ndarray, gt: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.size != gt.size:
        raise ShapeError(f"parameter dims differ: {pred.size} vs {gt.size}")
    na = float(np.linalg.norm(pred))
    nb = float(np.linalg.norm(gt))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine similarity undefined for a zero vector")
    return float(np.dot(pred, gt) / (na * nb))


def json_safe(value: float):
    """Map non-finite floats to string sentinels for strict-JSON reports."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def evaluate_models(dataset: Dataset, ae: AutoencoderModel, flow: FlowModel | None,
                    n_samples: int = 20, seed: int = 0, split: str = "test") -> dict:
    """Per-sample and aggregate metrics report.

    Scores autoencoder reconstruction, flow-surrogate mean prediction, and
    reverse parameter prediction for every sample in the split.
    """
    idx = dataset.indices(split)
    if idx.size == 0:
        raise UsageError(f"dataset has no {split!r} samples")
    rows = []
    for rank, i in enumerate(idx):
        gt = dataset.field(int(i))
        gt_norm = normalize(dataset.space, dataset.params[int(i)])
        recon = decode(ae, encode(ae, gt))
        row = {
            "index": int(i),
            "ae_psnr": psnr(gt, recon),
            "ae_ssim": ssim(gt, recon),
        }
        if flow is not None:
            uq = predict_and_quantify(flow, ae, gt_norm, n_samples, seed=seed + rank)
            pred_c = reverse_predict(flow, ae, gt)
            row.update({
                "flow_psnr": psnr(gt, uq.mean_field),
                "flow_ssim": ssim(gt, uq.mean_field),
                "mean_uncertainty": float(uq.var_latent.mean()),
                "reverse_mae": mae_params(pred_c, gt_norm),
                "reverse_cosine": cosine_sim(pred_c, gt_norm),
            })
        rows.append(row)
    keys = [k for k in rows[0] if k != "index"]
    aggregate = {k: float(np.mean([r[k] for r in rows])) for k in keys}
    return {
        "split": split,
        "n_samples": len(rows),
        "uq_samples": n_samples,
        "per_sample": [{k: json_safe(v) for k, v in r.items()} for r in rows],
        "aggregate": {k: json_safe(v) for k, v in aggregate.items()},
    }
