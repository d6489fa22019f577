"""Evaluation metrics and model accounting.

MAE/MSE are reported on denormalized property values; SSIM operates on the
normalized [-1, 1] scale with the canonical 11x11 Gaussian window (sigma 1.5,
K1=0.01, K2=0.03, data range 2). FLOPs use the multiply-add = 2 convention.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .datagen import denormalize
from .validation import check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DATA_RANGE = 2.0  # inputs live on [-1, 1]


def mae_mse(pred, target, bounds):
    """Pixel MAE and MSE after denormalizing both grids with dataset bounds."""
    pred, target = check_same_shape(pred, target, "pred", "target")
    lo, hi = bounds
    dp = denormalize(np.asarray(pred, dtype=np.float64), lo, hi)
    dt = denormalize(np.asarray(target, dtype=np.float64), lo, hi)
    diff = dp - dt
    return float(np.abs(diff).mean()), float((diff**2).mean())


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(pred, target):
    """Mean local SSIM over valid 11x11 windows of two normalized grids."""
    pred, target = check_same_shape(pred, target, "pred", "target")
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.ndim != 2:
        raise ValueError(f"ssim expects 2D grids, got shape {pred.shape}")
    if min(pred.shape) < SSIM_WINDOW:
        raise ValueError(f"grid {pred.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")

    win = _gaussian_window()
    c1 = (SSIM_K1 * SSIM_DATA_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DATA_RANGE) ** 2

    def filt(img):
        views = sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
        return np.tensordot(views, win, axes=([2, 3], [0, 1]))

    mu_p = filt(pred)
    mu_t = filt(target)
    sig_p = filt(pred * pred) - mu_p**2
    sig_t = filt(target * target) - mu_t**2
    sig_pt = filt(pred * target) - mu_p * mu_t

    num = (2.0 * mu_p * mu_t + c1) * (2.0 * sig_pt + c2)
    den = (mu_p**2 + mu_t**2 + c1) * (sig_p + sig_t + c2)
    return float((num / den).mean())


def _linear_params(n_in, n_out):
    return n_in * n_out + n_out


def count_params(config, encoder_dims=None):
    """Exact element count of the model.

    encoder_dims, when given, is (P, M) for the bias-free P -> M linear map
    and adds M*P to the decoder total.
    """
    k, nt, bb = config.k, config.n_tokens, config.block ** 2
    r = config.mlp_ratio
    total = _linear_params(config.m_in, nt * k)  # l1
    total += nt * k  # positional table
    per_block = (
        2 * k  # ln1
        + 4 * _linear_params(k, k)  # q, k, v, out projections
        + 2 * k  # ln2
        + _linear_params(k, r * k)
        + _linear_params(r * k, k)
    )
    total += config.depth * per_block
    head = _linear_params(k, bb)
    total += head if config.shared_head else nt * head
    if encoder_dims is not None:
        p, m = encoder_dims
        total += m * p
    return total


def _linear_flops(n_in, n_out, n_rows=1):
    return n_rows * (2 * n_in * n_out + n_out)


def count_flops(config, encoder_dims=None):
    """FLOPs of one inference (multiply-add = 2).

    Conventions: layernorm 8 flops per element, GELU 10 per element, softmax
    3 per attention logit, residual adds 1 per element, stitching counted as
    one add per placed block cell plus one divide per output cell.
    """
    k, nt, bb = config.k, config.n_tokens, config.block ** 2
    r = config.mlp_ratio
    total = _linear_flops(config.m_in, nt * k)  # l1
    total += nt * k  # positional add
    per_block = (
        2 * 8 * nt * k  # two layernorms
        + 4 * _linear_flops(k, k, nt)  # q, k, v, out projections
        + 2 * nt * nt * k  # q k^T logits
        + config.heads * nt * nt  # scale
        + 3 * config.heads * nt * nt  # softmax
        + 2 * nt * nt * k  # attention-weighted sum
        + _linear_flops(k, r * k, nt)
        + 10 * nt * r * k  # gelu
        + _linear_flops(r * k, k, nt)
        + 2 * nt * k  # residual adds
    )
    total += config.depth * per_block
    total += _linear_flops(k, bb, nt)  # head (same count shared or not)
    total += nt * bb + config.out_h * config.out_w  # stitch adds + overlap divides
    if encoder_dims is not None:
        p, m = encoder_dims
        total += 2 * m * p
    return total


def evaluate_maps(pred_norm, target_norm, bounds):
    """Per-sample MAE/MSE/SSIM for batches of normalized maps."""
    pred_norm, target_norm = check_same_shape(pred_norm, target_norm, "pred", "target")
    rows = []
    for i in range(pred_norm.shape[0]):
        m, s = mae_mse(pred_norm[i], target_norm[i], bounds)
        rows.append({"index": i, "mae": m, "mse": s, "ssim": ssim(pred_norm[i], target_norm[i])})
    summary = {
        "mae": float(np.mean([r["mae"] for r in rows])),
        "mse": float(np.mean([r["mse"] for r in rows])),
        "ssim": float(np.mean([r["ssim"] for r in rows])),
    }
    return summary, rows
