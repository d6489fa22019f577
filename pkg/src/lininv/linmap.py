"""Ridge-regression fit of the frozen linear map between embedding spaces.

The map A solves Y ~ A U over training pairs and is never fine-tuned
afterwards. Fitting runs in float64 (the Gram matrix at N ~ 2k kernels is
numerically delicate); the stored map is float32 for inference.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .containers import read_json, read_tensor, write_json, write_tensor
from .errors import RankDeficiencyError
from .validation import check_array

# switch from normal equations to the SVD route past this condition estimate
_COND_LIMIT = 1e12


@dataclass
class LinearMap:
    """Fitted M x P map from measurement embeddings to property embeddings."""

    A: np.ndarray
    alpha: float
    fit_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float32)
        if self.A.ndim != 2:
            raise ValueError(f"A must be a matrix, got shape {self.A.shape}")


def fit_ridge(u, y, alpha=1.0):
    """Minimize sum ||Y_i - A U_i||^2 + alpha ||A||_F^2 over A.

    u: (n_samples, P) measurement embeddings; y: (n_samples, M) property
    embeddings. Returns a LinearMap with training MAE/MSE in fit_stats.
    """
    u = check_array(u, "U", ndim=2, dtype=np.float64)
    y = check_array(y, "Y", ndim=2, dtype=np.float64)
    if u.shape[0] != y.shape[0]:
        raise ValueError(f"sample counts differ: U has {u.shape[0]}, Y has {y.shape[0]}")
    if u.shape[0] < 1:
        raise ValueError("need at least one sample")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")

    p = u.shape[1]
    gram = u.T @ u
    eigs = np.linalg.eigvalsh(gram)
    lo, hi = float(eigs[0]), float(eigs[-1])
    cond = np.inf if lo + alpha <= 0 else (hi + alpha) / (lo + alpha)

    if cond <= _COND_LIMIT:
        coef = np.linalg.solve(gram + alpha * np.eye(p), u.T @ y)
    else:
        # SVD route: filter factors s/(s^2+alpha) are stable for tiny s
        q, s, vt = np.linalg.svd(u, full_matrices=False)
        if alpha == 0.0:
            tol = s[0] * max(u.shape) * np.finfo(np.float64).eps if s.size else 0.0
            rank = int(np.sum(s > tol))
            if rank < p:
                raise RankDeficiencyError(
                    f"system is rank deficient with alpha=0: rank {rank} < {p} features; "
                    f"use alpha > 0 or drop redundant kernels"
                )
            filt = 1.0 / s
        else:
            filt = s / (s**2 + alpha)
        coef = vt.T @ (filt[:, None] * (q.T @ y))

    a = coef.T  # (M, P)
    resid = y - u @ coef
    stats = {
        "alpha": float(alpha),
        "n_samples": int(u.shape[0]),
        "train_mae": float(np.abs(resid).mean()),
        "train_mse": float((resid**2).mean()),
    }
    return LinearMap(A=a, alpha=float(alpha), fit_stats=stats)


def predict_embedding(linear_map, u):
    """Apply the map; accepts a single vector (P,) or a batch (B, P)."""
    a = linear_map.A.astype(np.float64)
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != a.shape[1]:
        raise ValueError(f"embedding dim {u.shape[-1]} does not match map width {a.shape[1]}")
    return u @ a.T


def regression_report(linear_map, u_set, y_set):
    """Elementwise fit quality plus target range statistics for one split."""
    u_set = check_array(u_set, "U", ndim=2, dtype=np.float64)
    y_set = check_array(y_set, "Y", ndim=2, dtype=np.float64)
    if u_set.shape[0] == 0:
        raise ValueError("empty evaluation set")
    if u_set.shape[0] != y_set.shape[0]:
        raise ValueError("U and Y sample counts differ")
    resid = y_set - predict_embedding(linear_map, u_set)
    return {
        "mae": float(np.abs(resid).mean()),
        "mse": float((resid**2).mean()),
        "y_range": float(y_set.max() - y_set.min()),
        "y_mean_abs": float(abs(y_set.mean())),
    }


def svd_spectrum(a, truncate=150):
    """Singular values of the map divided by the largest, truncated."""
    a = np.asarray(a.A if isinstance(a, LinearMap) else a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        raise ValueError("all-zero matrix has no spectrum")
    return (s / s[0])[: min(truncate, s.size)]


def save_linear_map(out_dir, linear_map, meta=None):
    """Persist the map tensor plus JSON metadata (alpha, fit stats, hashes)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(out_dir / "linear_map.invt", linear_map.A)
    doc = dict(meta or {})
    doc.update({
        "alpha": linear_map.alpha,
        "fit_stats": linear_map.fit_stats,
        "shape": list(linear_map.A.shape),
    })
    write_json(out_dir / "linear_map.json", doc)
    return out_dir


def load_linear_map(out_dir):
    out_dir = Path(out_dir)
    doc = read_json(out_dir / "linear_map.json")
    a = read_tensor(out_dir / "linear_map.invt")
    return LinearMap(A=a, alpha=doc["alpha"], fit_stats=doc.get("fit_stats", {})), doc


def write_spectrum_csv(path, spectrum, header_comment=None):
    """Spectrum as CSV rows (1-based index, normalized singular value)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", "normalized_singular_value"])
        for i, val in enumerate(spectrum, start=1):
            writer.writerow([i, f"{val:.10g}"])
    return path


class RidgeEmbeddingMap(BaseEstimator):
    """sklearn-style estimator facade over fit_ridge/predict_embedding."""

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        self.map_ = fit_ridge(X, y, alpha=self.alpha)
        return self

    def predict(self, X):
        if not hasattr(self, "map_"):
            raise ValueError("estimator is not fitted yet")
        return predict_embedding(self.map_, X)
