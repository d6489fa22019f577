"""Integral-transform embeddings of shot gathers and velocity maps.

Measurement kernels are sine/cosine families over normalized receiver/time
coordinates; property kernels are Gaussian/sinc bumps on an even center grid
or separable sine families. Discrete integrals use the midpoint rule on
[0,1] per axis, so embeddings do not depend on physical units.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_array
from .wavesim import ShotGather

PHI_FAMILIES = (
    "sin_t_mean_x",
    "sin_t_sin_x",
    "sin_t_cos_x",
    "cos_t_sin_x",
    "sin_sum_tx",
    "sin_t_plus_sin_x",
    "identity_skip",
)

PSI_FAMILIES = (
    "gaussian",
    "sinc",
    "gaussian_small_sigma",
    "sin_sin",
    "cos_sin",
    "sin_cos",
    "sin_sum",
    "sin_plus_sin",
)

# radial families share the Gaussian center grid and its sigma rule
RADIAL_PSI_FAMILIES = ("gaussian", "sinc", "gaussian_small_sigma")


@dataclass
class PhiSpec:
    """Measurement kernel family and count N (per source)."""

    family: str = "sin_t_mean_x"
    n_kernels: int = 256

    def __post_init__(self):
        if self.family not in PHI_FAMILIES:
            raise ValueError(f"unknown measurement kernel family {self.family!r}")
        if self.n_kernels < 1:
            raise ValueError("n_kernels must be >= 1")


def _near_square_grid(m):
    """Factor m into (m_x, m_z) as close to square as possible, m_z <= m_x."""
    for d in range(int(math.isqrt(m)), 0, -1):
        if m % d == 0:
            return m // d, d
    return m, 1


@dataclass
class PsiSpec:
    """Property kernel family and count M.

    For radial families the M centers sit on an m_x x m_z grid of cell
    centers over [0,1]^2 and sigma equals the center spacing along the finer
    axis; gaussian_small_sigma uses a third of that.
    """

    family: str = "gaussian"
    m_kernels: int = 144
    center_grid: tuple | None = None  # (m_x, m_z); inferred near-square if None

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise ValueError(f"unknown property kernel family {self.family!r}")
        if self.m_kernels < 1:
            raise ValueError("m_kernels must be >= 1")
        if self.family in RADIAL_PSI_FAMILIES:
            if self.center_grid is None:
                self.center_grid = _near_square_grid(self.m_kernels)
            mx, mz = self.center_grid
            if mx * mz != self.m_kernels:
                raise ValueError(f"center grid {mx}x{mz} does not match M={self.m_kernels}")

    def centers(self):
        """(M, 2) array of (x, z) kernel centers, x varying fastest."""
        mx, mz = self.center_grid
        cx = (np.arange(mx) + 0.5) / mx
        cz = (np.arange(mz) + 0.5) / mz
        xx, zz = np.meshgrid(cx, cz)  # rows: z, cols: x
        return np.column_stack([xx.ravel(), zz.ravel()])

    def sigma(self):
        mx, mz = self.center_grid
        base = 1.0 / max(mx, mz)
        return base / 3.0 if self.family == "gaussian_small_sigma" else base


def phi_value(spec, n, x_norm, t_norm):
    """Evaluate measurement kernel n at normalized coordinates in [0,1]."""
    if not 1 <= n <= spec.n_kernels:
        raise ValueError(f"kernel index n={n} outside 1..{spec.n_kernels}")
    x = np.asarray(x_norm, dtype=np.float64)
    t = np.asarray(t_norm, dtype=np.float64)
    w = n * np.pi
    fam = spec.family
    if fam == "sin_t_mean_x":
        # indicator over the unit x interval; its width is 1 after normalization
        out = np.sin(w * t) * np.ones_like(x)
    elif fam == "sin_t_sin_x":
        out = np.sin(w * t) * np.sin(w * x)
    elif fam == "sin_t_cos_x":
        out = np.sin(w * t) * np.cos(w * x)
    elif fam == "cos_t_sin_x":
        out = np.cos(w * t) * np.sin(w * x)
    elif fam == "sin_sum_tx":
        out = np.sin(w * (x + t))
    elif fam == "sin_t_plus_sin_x":
        out = np.sin(w * t) + np.sin(w * x)
    else:
        raise ValueError(f"{fam} has no pointwise kernel")
    return out if out.ndim else float(out)


def psi_value(spec, m, x_norm, z_norm):
    """Evaluate property kernel m at normalized coordinates in [0,1]."""
    if not 1 <= m <= spec.m_kernels:
        raise ValueError(f"kernel index m={m} outside 1..{spec.m_kernels}")
    x = np.asarray(x_norm, dtype=np.float64)
    z = np.asarray(z_norm, dtype=np.float64)
    fam = spec.family
    if fam in RADIAL_PSI_FAMILIES:
        mu = spec.centers()[m - 1]
        d = np.sqrt((x - mu[0]) ** 2 + (z - mu[1]) ** 2)
        if fam == "sinc":
            out = np.pi * np.sinc(d)  # sin(pi d)/d, continuous value pi at d=0
        else:
            out = np.exp(-(d**2) / (2.0 * spec.sigma() ** 2))
    else:
        w = m * np.pi
        if fam == "sin_sin":
            out = np.sin(w * x) * np.sin(w * z)
        elif fam == "cos_sin":
            out = np.cos(w * x) * np.sin(w * z)
        elif fam == "sin_cos":
            out = np.sin(w * x) * np.cos(w * z)
        elif fam == "sin_sum":
            out = np.sin(w * (x + z))
        else:  # sin_plus_sin
            out = np.sin(w * x) + np.sin(w * z)
    return out if out.ndim else float(out)


def _midpoints(n):
    return (np.arange(n) + 0.5) / n


def phi_matrix(spec, n_time, n_receivers):
    """Kernel values on the midpoint grid, shape (N, T*R), float64."""
    t = _midpoints(n_time)[:, None]  # (T, 1)
    x = _midpoints(n_receivers)[None, :]  # (1, R)
    rows = [phi_value(spec, n, x, t).reshape(-1) for n in range(1, spec.n_kernels + 1)]
    return np.asarray(rows)


def psi_matrix(spec, height, width):
    """Kernel values on the midpoint grid, shape (M, H*W), float64."""
    z = _midpoints(height)[:, None]
    x = _midpoints(width)[None, :]
    rows = [psi_value(spec, m, x, z).reshape(-1) for m in range(1, spec.m_kernels + 1)]
    return np.asarray(rows)


def encode_measurement(gather, spec):
    """Embed one gather into a vector of per-source blocks.

    For kernel families this is the midpoint-rule double integral against
    each kernel, U[s*N + n-1] = sum_{t,r} g[s,t,r] Phi_n(x_r, t) / (T*R);
    identity_skip concatenates the flattened per-source traces unchanged.
    """
    traces = gather.traces if isinstance(gather, ShotGather) else np.asarray(gather)
    if traces.ndim != 3:
        raise ValueError(f"gather must be S x T x R, got shape {traces.shape}")
    check_array(traces, "gather")
    return encode_measurements(traces[None], spec)[0]


def encode_measurements(batch, spec):
    """Vectorized encode_measurement over a (B, S, T, R) batch; returns (B, S*N)."""
    batch = np.asarray(batch)
    if batch.ndim != 4:
        raise ValueError(f"batch must be B x S x T x R, got shape {batch.shape}")
    b, s, t, r = batch.shape
    if spec.family == "identity_skip":
        return batch.reshape(b, s * t * r).astype(np.float64)
    kernels = phi_matrix(spec, t, r)  # (N, T*R)
    flat = batch.reshape(b * s, t * r).astype(np.float64)
    u = flat @ kernels.T / (t * r)
    return u.reshape(b, s * spec.n_kernels)


def embed_property(grid, spec):
    """Midpoint-rule double integral of a 2D grid against each property kernel."""
    grid = check_array(grid, "property grid", ndim=2)
    return embed_properties(grid[None], spec)[0]


def embed_properties(batch, spec):
    """Vectorized embed_property over a (B, H, W) batch; returns (B, M)."""
    batch = np.asarray(batch)
    if batch.ndim != 3:
        raise ValueError(f"batch must be B x H x W, got shape {batch.shape}")
    b, h, w = batch.shape
    kernels = psi_matrix(spec, h, w)  # (M, H*W)
    flat = batch.reshape(b, h * w).astype(np.float64)
    return flat @ kernels.T / (h * w)


class MeasurementEncoder(TransformerMixin, BaseEstimator):
    """Stateless sklearn-style wrapper around encode_measurements."""

    def __init__(self, family="sin_t_mean_x", n_kernels=256):
        self.family = family
        self.n_kernels = n_kernels

    def _spec(self):
        return PhiSpec(family=self.family, n_kernels=self.n_kernels)

    def fit(self, X, y=None):
        self._spec()  # validates parameters
        return self

    def transform(self, X):
        X = check_array(X, "X", ndim=4)
        return encode_measurements(X, self._spec())


class PropertyEmbedder(TransformerMixin, BaseEstimator):
    """Stateless sklearn-style wrapper around embed_properties."""

    def __init__(self, family="gaussian", m_kernels=144, center_grid=None):
        self.family = family
        self.m_kernels = m_kernels
        self.center_grid = center_grid

    def _spec(self):
        return PsiSpec(family=self.family, m_kernels=self.m_kernels, center_grid=self.center_grid)

    def fit(self, X, y=None):
        self._spec()
        return self

    def transform(self, X):
        X = check_array(X, "X", ndim=3)
        return embed_properties(X, self._spec())
