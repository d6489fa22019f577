"""2D acoustic finite-difference forward simulator.

Explicit scheme, 2nd order in time and 4th order in space, on a regular grid
with an exponential-taper sponge on the absorbing sides and an optional
pressure-release free surface at z=0. Field arithmetic is float32; the time
loop is JIT-compiled.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CFLViolation, SimulationDiverged
from .validation import check_finite

# 2nd-order scheme bound on c*dt*sqrt(1/dx^2 + 1/dz^2)
CFL_LIMIT = 1.0 / math.sqrt(2.0)

# ghost rows above a free surface (odd image for the 4th-order stencil)
_N_GHOST = 2


@dataclass
class VelocityMap:
    """Acoustic velocity on an H x W grid, z (depth) first axis, in m/s."""

    grid: np.ndarray
    dx: float
    dz: float

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float32)
        if self.grid.ndim != 2:
            raise ValueError(f"velocity grid must be 2D, got shape {self.grid.shape}")
        if self.grid.shape[0] < 8 or self.grid.shape[1] < 8:
            raise ValueError(f"velocity grid must be at least 8x8, got {self.grid.shape}")
        check_finite(self.grid, "velocity grid")
        if float(self.grid.min()) <= 0.0:
            raise ValueError("velocity must be strictly positive everywhere")
        if not (self.dx > 0 and self.dz > 0):
            raise ValueError("grid spacings dx, dz must be > 0")

    @property
    def shape(self):
        return self.grid.shape

    @property
    def v_max(self):
        return float(self.grid.max())


@dataclass
class SourceSpec:
    """Point source at a grid node with a Ricker time history."""

    x_index: int
    z_index: int
    f0: float
    t0: float | None = None  # defaults to 1.5/f0, past the startup transient
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("source peak frequency f0 must be > 0")
        if self.t0 is None:
            self.t0 = 1.5 / self.f0


@dataclass
class ReceiverArray:
    """Horizontal line of receivers at a fixed depth index."""

    z_index: int
    x_indices: np.ndarray

    def __post_init__(self):
        self.x_indices = np.asarray(self.x_indices, dtype=np.int64)
        if self.x_indices.ndim != 1 or self.x_indices.size == 0:
            raise ValueError("x_indices must be a non-empty 1D index list")
        if np.any(np.diff(self.x_indices) <= 0):
            raise ValueError("receiver x_indices must be strictly increasing")

    def __len__(self):
        return int(self.x_indices.size)


@dataclass
class SimConfig:
    """Time stepping and boundary parameters."""

    dt: float
    n_steps: int
    boundary_width: int = 20
    boundary_taper: float = 0.0035
    free_surface: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.boundary_width < _N_GHOST:
            raise ValueError("boundary_width must be at least 2 cells")

    def cfl_number(self, v_max, dx, dz):
        return v_max * self.dt * math.sqrt(1.0 / dx**2 + 1.0 / dz**2)

    def check_cfl(self, v):
        """Reject time steps beyond the stability bound, before any stepping."""
        cfl = self.cfl_number(v.v_max, v.dx, v.dz)
        if cfl > CFL_LIMIT * (1.0 + 1e-12):
            raise CFLViolation(
                f"CFL number {cfl:.4f} exceeds bound {CFL_LIMIT:.4f} "
                f"(v_max={v.v_max:.1f}, dt={self.dt:.3e}, dx={v.dx}, dz={v.dz})"
            )


@dataclass
class ShotGather:
    """Pressure traces, sources x time x receivers."""

    traces: np.ndarray
    dt: float

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=np.float32)
        if self.traces.ndim != 3:
            raise ValueError(f"traces must be S x T x R, got shape {self.traces.shape}")
        check_finite(self.traces, "gather traces")

    @property
    def n_sources(self):
        return self.traces.shape[0]


def stable_dt(v_max, dx, dz, margin=0.8):
    """Largest dt within the stability bound, scaled by a safety margin."""
    return margin * CFL_LIMIT / (v_max * math.sqrt(1.0 / dx**2 + 1.0 / dz**2))


def ricker_wavelet(f0, t, t0=0.0):
    """Ricker pulse (1 - 2 pi^2 f0^2 tau^2) exp(-pi^2 f0^2 tau^2), tau = t - t0."""
    if not f0 > 0:
        raise ValueError("f0 must be > 0")
    tau = np.asarray(t, dtype=np.float64) - t0
    a = (np.pi * f0 * tau) ** 2
    out = (1.0 - 2.0 * a) * np.exp(-a)
    return out if out.ndim else float(out)


@njit(cache=True, nogil=True)
def _run_shot(c2dt2, damp, inj, src_z, src_x, rec_z, rec_x, n_steps, inv_dx2, inv_dz2, surface_row, out):
    """Time loop for one shot on the padded grid; returns -1 or the step where
    the field went non-finite. Neighbor pairs are summed first so that columns
    mirrored about a symmetric source round identically."""
    nz, nx = c2dt2.shape
    p_prev = np.zeros((nz, nx), np.float32)
    p_cur = np.zeros((nz, nx), np.float32)
    p_next = np.zeros((nz, nx), np.float32)
    c0 = np.float32(-2.5)
    c1 = np.float32(4.0 / 3.0)
    c2 = np.float32(-1.0 / 12.0)
    fdx2 = np.float32(inv_dx2)
    fdz2 = np.float32(inv_dz2)
    two = np.float32(2.0)

    for it in range(n_steps):
        for i in range(2, nz - 2):
            for j in range(2, nx - 2):
                dzz = (c2 * (p_cur[i - 2, j] + p_cur[i + 2, j])
                       + c1 * (p_cur[i - 1, j] + p_cur[i + 1, j])
                       + c0 * p_cur[i, j]) * fdz2
                dxx = (c2 * (p_cur[i, j - 2] + p_cur[i, j + 2])
                       + c1 * (p_cur[i, j - 1] + p_cur[i, j + 1])
                       + c0 * p_cur[i, j]) * fdx2
                p_next[i, j] = two * p_cur[i, j] - p_prev[i, j] + c2dt2[i, j] * (dxx + dzz)

        p_next[src_z, src_x] += inj[it]

        if surface_row >= 0:
            for j in range(nx):
                p_next[surface_row, j] = np.float32(0.0)
                p_next[surface_row - 1, j] = -p_next[surface_row + 1, j]
                p_next[surface_row - 2, j] = -p_next[surface_row + 2, j]

        for i in range(nz):
            for j in range(nx):
                p_next[i, j] *= damp[i, j]
                p_cur[i, j] *= damp[i, j]

        for r in range(rec_x.shape[0]):
            out[it, r] = p_next[rec_z, rec_x[r]]

        tmp = p_prev
        p_prev = p_cur
        p_cur = p_next
        p_next = tmp

        if it % 64 == 63:
            bad = False
            for i in range(nz):
                for j in range(nx):
                    if not np.isfinite(p_cur[i, j]):
                        bad = True
                        break
                if bad:
                    break
            if bad:
                return it

    for i in range(nz):
        for j in range(nx):
            if not np.isfinite(p_cur[i, j]):
                return n_steps - 1
    return -1


def _sponge_profile(width, taper):
    """Per-step multiplier for cells 0..width-1 counted from the outer edge."""
    d = np.arange(width, dtype=np.float64)
    return np.exp(-taper * (width - d) ** 2).astype(np.float32)


def _padded_geometry(v, cfg):
    """Pad velocity with the sponge (and ghost rows under a free surface).

    Returns (c2dt2, damp, top_offset, side_offset), all float32.
    """
    bw = cfg.boundary_width
    top = _N_GHOST if cfg.free_surface else bw
    c = np.pad(v.grid, ((top, bw), (bw, bw)), mode="edge")
    c2dt2 = (c.astype(np.float64) * cfg.dt) ** 2
    c2dt2 = c2dt2.astype(np.float32)

    nz, nx = c.shape
    damp = np.ones((nz, nx), np.float32)
    prof = _sponge_profile(bw, cfg.boundary_taper)
    for d in range(bw):
        g = prof[d]
        damp[nz - 1 - d, :] = np.minimum(damp[nz - 1 - d, :], g)
        damp[:, d] = np.minimum(damp[:, d], g)
        damp[:, nx - 1 - d] = np.minimum(damp[:, nx - 1 - d], g)
        if not cfg.free_surface:
            damp[d, :] = np.minimum(damp[d, :], g)
    # exact mirror symmetry of the two side profiles
    damp[:, nx // 2:] = damp[:, : (nx + 1) // 2][:, ::-1]
    return c2dt2, damp, top, bw


def _check_position(name, x_index, z_index, shape):
    h, w = shape
    if not (0 <= z_index < h and 0 <= x_index < w):
        raise ValueError(f"{name} position (z={z_index}, x={x_index}) outside {h}x{w} grid")


def simulate_shot(v, src, rcv, cfg):
    """Propagate one source; returns float32 traces of shape (n_steps, n_receivers)."""
    cfg.check_cfl(v)
    _check_position("source", src.x_index, src.z_index, v.shape)
    _check_position("receiver", int(rcv.x_indices.max()), rcv.z_index, v.shape)

    c2dt2, damp, top, side = _padded_geometry(v, cfg)
    t = np.arange(cfg.n_steps, dtype=np.float64) * cfg.dt
    wavelet = src.amplitude * ricker_wavelet(src.f0, t, src.t0)
    c2_src = float(v.grid[src.z_index, src.x_index]) ** 2
    with np.errstate(over="ignore"):  # huge amplitudes overflow to inf and get caught mid-run
        inj = (cfg.dt**2 * c2_src * wavelet).astype(np.float32)

    out = np.empty((cfg.n_steps, len(rcv)), np.float32)
    surface_row = top if cfg.free_surface else -1
    bad_step = _run_shot(
        c2dt2, damp, inj,
        src.z_index + top, src.x_index + side,
        rcv.z_index + top, rcv.x_indices + side,
        cfg.n_steps, 1.0 / v.dx**2, 1.0 / v.dz**2, surface_row, out,
    )
    if bad_step >= 0:
        raise SimulationDiverged(f"non-finite field detected at step <= {bad_step}")
    return out


def simulate_gather(v, sources, rcv, cfg):
    """Run simulate_shot per source and stack into a ShotGather (S, T, R)."""
    if not sources:
        raise ValueError("need at least one source")
    traces = np.empty((len(sources), cfg.n_steps, len(rcv)), np.float32)
    for s, src in enumerate(sources):
        try:
            traces[s] = simulate_shot(v, src, rcv, cfg)
        except SimulationDiverged as e:
            raise SimulationDiverged(f"source {s}: {e}") from e
    return ShotGather(traces=traces, dt=cfg.dt)
