"""Decoder optimization: MAE loss, AdamW with decoupled weight decay, and
cosine-annealing warm restarts. The embedding-to-map network is trained while
the fitted linear map stays frozen."""

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .containers import write_checkpoint
from .decoder import decoder_backward, decoder_forward, param_init
from .errors import NumericError, TrainingDiverged
from .validation import check_same_shape


@dataclass
class TrainConfig:
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 60
    t0: int = 5
    t_mult: int = 2
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if not (self.lr_max >= self.lr_min > 0.0):
            raise ValueError("need lr_max >= lr_min > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.t0 < 1 or self.t_mult < 1:
            raise ValueError("need t0 >= 1 and t_mult >= 1")


def mae_loss(pred, target):
    """Mean absolute difference and its gradient wrt pred (sign(0) = 0)."""
    pred, target = check_same_shape(pred, target, "pred", "target")
    diff = pred - target
    loss = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return loss, grad


class OptState:
    """Per-parameter AdamW moment accumulators and the shared step counter."""

    def __init__(self, params):
        self.m = {n: np.zeros_like(p) for n, p in params.items()}
        self.v = {n: np.zeros_like(p) for n, p in params.items()}
        self.step = 0


def adamw_step(params, grads, state, lr, cfg):
    """One AdamW update, in place; weight decay is decoupled from the moments."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        p -= lr * update + lr * cfg.weight_decay * p
    return params, state


def cosine_restart_lr(epoch, t0, t_mult, lr_max, lr_min):
    """SGDR schedule: cycle i has length t0 * t_mult^i and restarts at lr_max."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    t_i = t0
    t_cur = epoch
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= t_mult
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t_cur / t_i))


@dataclass
class TrainResult:
    params: dict  # best-validation parameters
    history: list  # rows of (epoch, lr, train_mae, val_mae, seconds)
    best_epoch: int
    best_val_mae: float


def _epoch_mae(params, config, inputs, targets, batch_size):
    total = 0.0
    for start in range(0, inputs.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        pred, _ = decoder_forward(inputs[sl], params, config)
        total += float(np.abs(pred - targets[sl]).sum())
    return total / targets.size


def write_epoch_log(path, history):
    """Epoch log CSV: epoch, lr, train_mae, val_mae, wall_seconds."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_mae", "val_mae", "wall_seconds"])
        for row in history:
            writer.writerow([row[0], f"{row[1]:.10g}", f"{row[2]:.10g}", f"{row[3]:.10g}", f"{row[4]:.6f}"])
    return path


def train_decoder(inputs, targets, val_inputs, val_targets, dec_config, train_config,
                  out_dir=None, init_params=None, ckpt_meta=None):
    """Mini-batch training with per-epoch cosine-restart learning rates.

    inputs: (n, M) decoder input embeddings (already mapped through the frozen
    linear layer, or ground-truth embeddings); targets: (n, H, W) normalized
    maps. Keeps the best-validation parameters; when out_dir is given, writes
    checkpoint/ and epoch_log.csv there. A non-finite training loss raises
    TrainingDiverged after the last good checkpoint is preserved.
    """
    cfg = train_config
    dtype = np.float64 if cfg.deterministic else np.float32
    inputs = np.asarray(inputs, dtype=dtype)
    targets = np.asarray(targets, dtype=dtype)
    val_inputs = np.asarray(val_inputs, dtype=dtype)
    val_targets = np.asarray(val_targets, dtype=dtype)
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on sample count")

    if init_params is None:
        params = param_init(cfg.seed, dec_config, dtype=dtype)
    else:
        params = {n: np.asarray(p, dtype=dtype).copy() for n, p in init_params.items()}
    state = OptState(params)
    rng = np.random.default_rng(cfg.seed)

    out_dir = Path(out_dir) if out_dir is not None else None
    best = {n: p.copy() for n, p in params.items()}
    best_val = math.inf
    best_epoch = -1
    history = []

    def save_best():
        if out_dir is not None:
            meta = dict(ckpt_meta or {})
            meta.update({"best_epoch": best_epoch, "best_val_mae": best_val if math.isfinite(best_val) else None,
                         "decoder_config": vars(dec_config)})
            write_checkpoint(out_dir / "checkpoint", best, meta)
            write_epoch_log(out_dir / "epoch_log.csv", history)

    if cfg.epochs == 0:
        best_val = _epoch_mae(params, dec_config, val_inputs, val_targets, cfg.batch_size) \
            if val_inputs.shape[0] else math.inf
        best_epoch = 0
        save_best()
        return TrainResult(params=best, history=history, best_epoch=0, best_val_mae=best_val)

    n = inputs.shape[0]
    for epoch in range(cfg.epochs):
        lr = cosine_restart_lr(epoch, cfg.t0, cfg.t_mult, cfg.lr_max, cfg.lr_min)
        start_time = time.perf_counter()
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pred, cache = decoder_forward(inputs[idx], params, dec_config)
            loss, dpred = mae_loss(pred, targets[idx])
            if not math.isfinite(loss):
                save_best()
                raise TrainingDiverged(f"training loss became non-finite at epoch {epoch}")
            running += loss * idx.size
            grads, _ = decoder_backward(dpred, cache, params, dec_config)
            adamw_step(params, grads, state, lr, cfg)
        train_mae = running / n
        val_mae = _epoch_mae(params, dec_config, val_inputs, val_targets, cfg.batch_size) \
            if val_inputs.shape[0] else train_mae
        # deterministic artifacts cannot carry wall times
        seconds = 0.0 if cfg.deterministic else time.perf_counter() - start_time
        history.append((epoch, lr, train_mae, val_mae, seconds))
        if val_mae < best_val:
            best_val = val_mae
            best_epoch = epoch
            best = {n_: p.copy() for n_, p in params.items()}

    save_best()
    return TrainResult(params=best, history=history, best_epoch=best_epoch, best_val_mae=best_val)
