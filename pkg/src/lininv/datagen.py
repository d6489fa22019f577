"""Procedural velocity maps, forward-simulated datasets, and persistence.

Maps are layered backgrounds (optionally tilted interfaces, optionally
monotone with depth) with elliptical velocity anomalies. Datasets pair each
map with a multi-source shot gather and are stored as INVT containers plus a
JSON manifest carrying geometry, bounds, splits, and checksums.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .containers import read_json, read_tensor, sha256_file, write_json, write_tensor
from .validation import check_array
from .wavesim import (
    ReceiverArray,
    SimConfig,
    SourceSpec,
    VelocityMap,
    simulate_gather,
    stable_dt,
)

MANIFEST_NAME = "manifest.json"
VELOCITY_NAME = "velocity.invt"
SEISMIC_NAME = "seismic.invt"


@dataclass
class AnomalySpec:
    """Elliptical velocity perturbations overlaid on the layered background."""

    count_range: tuple = (0, 2)
    radius_range: tuple = (4.0, 12.0)  # cells
    contrast_range: tuple = (-0.25, 0.25)  # relative velocity change


@dataclass
class MapSpec:
    height: int = 64
    width: int = 64
    dx: float = 10.0
    dz: float = 10.0
    v_min: float = 1500.0
    v_max: float = 4500.0
    n_layers_range: tuple = (2, 5)
    max_tilt: float = 0.15  # interface slope, depth cells per horizontal cell
    monotone_depth: bool = False
    anomaly: AnomalySpec | None = field(default_factory=AnomalySpec)

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")
        if self.v_min <= 0:
            raise ValueError("v_min must be > 0")
        if self.n_layers_range[0] < 1:
            raise ValueError("need at least one layer")
        if self.height < 8 or self.width < 8:
            raise ValueError("map must be at least 8x8")


def gen_velocity_map(seed, spec):
    """Deterministically draw one velocity map for ``seed``."""
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    lo, hi = spec.n_layers_range
    n_layers = int(rng.integers(lo, hi + 1))
    vels = rng.uniform(spec.v_min, spec.v_max, n_layers)
    if spec.monotone_depth:
        vels = np.sort(vels)

    grid = np.full((h, w), vels[0], dtype=np.float64)
    zz = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    if n_layers > 1:
        bases = np.sort(rng.uniform(0.08 * h, 0.95 * h, n_layers - 1))
        slopes = rng.uniform(-spec.max_tilt, spec.max_tilt, n_layers - 1)
        for i in range(n_layers - 1):
            interface = bases[i] + slopes[i] * (xx - w / 2.0)
            grid = np.where(zz >= interface, vels[i + 1], grid)

    if spec.anomaly is not None:
        c0, c1 = spec.anomaly.count_range
        count = int(rng.integers(c0, c1 + 1))
        for _ in range(count):
            cz = rng.uniform(0.1 * h, 0.9 * h)
            cx = rng.uniform(0.1 * w, 0.9 * w)
            rz, rx = rng.uniform(*spec.anomaly.radius_range, size=2)
            contrast = rng.uniform(*spec.anomaly.contrast_range)
            mask = ((zz - cz) / rz) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
            grid = np.where(mask, grid * (1.0 + contrast), grid)

    np.clip(grid, spec.v_min, spec.v_max, out=grid)
    return VelocityMap(grid=grid.astype(np.float32), dx=spec.dx, dz=spec.dz)


def normalize(x, lo, hi):
    """Affine map of [lo, hi] onto [-1, 1]."""
    if not hi > lo:
        raise ValueError(f"need hi > lo, got lo={lo}, hi={hi}")
    return 2.0 * (np.asarray(x) - lo) / (hi - lo) - 1.0


def denormalize(x, lo, hi):
    """Inverse of normalize."""
    if not hi > lo:
        raise ValueError(f"need hi > lo, got lo={lo}, hi={hi}")
    return (np.asarray(x) + 1.0) * (hi - lo) / 2.0 + lo


@dataclass
class Acquisition:
    """Surface acquisition geometry plus simulation controls."""

    n_sources: int = 3
    source_depth: int = 1
    n_receivers: int = 64
    receiver_depth: int = 1
    f0: float = 12.0
    amplitude: float = 1.0
    n_steps: int = 600
    dt: float | None = None  # derived from the stability bound when None
    cfl_margin: float = 0.8
    boundary_width: int = 20
    boundary_taper: float = 0.0035
    free_surface: bool = True

    def source_x_indices(self, width):
        # inner points of an even partition of the surface line
        xs = np.linspace(0, width - 1, self.n_sources + 2)[1:-1]
        return np.round(xs).astype(int)

    def receiver_x_indices(self, width):
        if self.n_receivers >= width:
            return np.arange(width)
        xs = np.linspace(0, width - 1, self.n_receivers)
        return np.unique(np.round(xs).astype(int))

    def sources(self, width):
        return [
            SourceSpec(x_index=int(x), z_index=self.source_depth, f0=self.f0, amplitude=self.amplitude)
            for x in self.source_x_indices(width)
        ]

    def receivers(self, width):
        return ReceiverArray(z_index=self.receiver_depth, x_indices=self.receiver_x_indices(width))

    def sim_config(self, map_spec):
        dt = self.dt
        if dt is None:
            dt = stable_dt(map_spec.v_max, map_spec.dx, map_spec.dz, margin=self.cfl_margin)
        return SimConfig(
            dt=dt,
            n_steps=self.n_steps,
            boundary_width=self.boundary_width,
            boundary_taper=self.boundary_taper,
            free_surface=self.free_surface,
        )


@dataclass
class Dataset:
    velocity: np.ndarray  # (n, H, W) float32, m/s
    seismic: np.ndarray  # (n, S, T, R) float32
    manifest: dict

    def split_indices(self, name):
        return np.asarray(self.manifest["splits"][name], dtype=np.int64)

    @property
    def velocity_bounds(self):
        b = self.manifest["bounds"]
        return float(b["v_min"]), float(b["v_max"])

    @property
    def seismic_scale(self):
        return float(self.manifest["seismic_abs_max"]) or 1.0

    def normalized_velocity(self, indices=None):
        v = self.velocity if indices is None else self.velocity[indices]
        lo, hi = self.velocity_bounds
        return normalize(v, lo, hi)

    def normalized_seismic(self, indices=None):
        s = self.seismic if indices is None else self.seismic[indices]
        return np.asarray(s, dtype=np.float64) / self.seismic_scale


def default_split(n_samples):
    """Fixed-fraction split (10/12, 1/12, 1/12 of samples, at least 1 held out)."""
    n_val = max(1, round(n_samples / 12)) if n_samples >= 3 else 0
    n_test = n_val
    return n_samples - n_val - n_test, n_val, n_test


def build_dataset(seed, n_samples, map_spec, acquisition, out_dir=None, split=None, threads=1, extra_meta=None):
    """Generate maps, simulate gathers, and (optionally) persist everything.

    Partial output files are removed if the build fails.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    split = tuple(split) if split is not None else default_split(n_samples)
    if sum(split) != n_samples or any(s < 0 for s in split):
        raise ValueError(f"split {split} does not partition {n_samples} samples")

    sources = acquisition.sources(map_spec.width)
    rcv = acquisition.receivers(map_spec.width)
    cfg = acquisition.sim_config(map_spec)
    sample_seeds = np.random.SeedSequence(seed).generate_state(n_samples, dtype=np.uint64)

    n_rcv = len(rcv)
    velocity = np.empty((n_samples, map_spec.height, map_spec.width), np.float32)
    seismic = np.empty((n_samples, len(sources), cfg.n_steps, n_rcv), np.float32)

    def run(i):
        v = gen_velocity_map(int(sample_seeds[i]), map_spec)
        velocity[i] = v.grid
        seismic[i] = simulate_gather(v, sources, rcv, cfg).traces

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(n_samples)))
    else:
        for i in range(n_samples):
            run(i)

    offsets = np.cumsum([0, *split])
    order = np.arange(n_samples)
    splits = {
        "train": order[offsets[0]:offsets[1]].tolist(),
        "val": order[offsets[1]:offsets[2]].tolist(),
        "test": order[offsets[2]:offsets[3]].tolist(),
    }
    manifest = {
        "format_version": 1,
        "seed": int(seed),
        "n_samples": int(n_samples),
        "splits": splits,
        "bounds": {"v_min": map_spec.v_min, "v_max": map_spec.v_max},
        "seismic_abs_max": float(np.abs(seismic).max()),
        "geometry": {
            "height": map_spec.height,
            "width": map_spec.width,
            "dx": map_spec.dx,
            "dz": map_spec.dz,
            "n_sources": len(sources),
            "source_x": [s.x_index for s in sources],
            "source_z": acquisition.source_depth,
            "f0": acquisition.f0,
            "t0": sources[0].t0,
            "amplitude": acquisition.amplitude,
            "receiver_x": rcv.x_indices.tolist(),
            "receiver_z": rcv.z_index,
            "dt": cfg.dt,
            "n_steps": cfg.n_steps,
            "boundary_width": cfg.boundary_width,
            "boundary_taper": cfg.boundary_taper,
            "free_surface": cfg.free_surface,
        },
        "dims": {"velocity": list(velocity.shape), "seismic": list(seismic.shape)},
    }
    if extra_meta:
        manifest.update(extra_meta)

    ds = Dataset(velocity=velocity, seismic=seismic, manifest=manifest)
    if out_dir is not None:
        save_dataset(out_dir, ds)
    return ds


def save_dataset(out_dir, ds):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        written.append(write_tensor(out_dir / VELOCITY_NAME, ds.velocity))
        written.append(write_tensor(out_dir / SEISMIC_NAME, ds.seismic))
        ds.manifest["checksums"] = {
            VELOCITY_NAME: sha256_file(out_dir / VELOCITY_NAME),
            SEISMIC_NAME: sha256_file(out_dir / SEISMIC_NAME),
        }
        written.append(write_json(out_dir / MANIFEST_NAME, ds.manifest))
    except BaseException:
        for path in written:
            Path(path).unlink(missing_ok=True)
        raise
    return out_dir


def load_dataset(data_dir, verify_checksums=False):
    data_dir = Path(data_dir)
    manifest = read_json(data_dir / MANIFEST_NAME)
    if verify_checksums:
        for name, digest in manifest.get("checksums", {}).items():
            actual = sha256_file(data_dir / name)
            if actual != digest:
                raise ValueError(f"{name}: checksum mismatch (manifest {digest[:12]}.., file {actual[:12]}..)")
    velocity = read_tensor(data_dir / VELOCITY_NAME)
    seismic = read_tensor(data_dir / SEISMIC_NAME)
    for key, arr in (("velocity", velocity), ("seismic", seismic)):
        expect = tuple(manifest["dims"][key])
        if arr.shape != expect:
            raise ValueError(f"{key} tensor shape {arr.shape} does not match manifest {expect}")
    check_array(velocity, "velocity")
    check_array(seismic, "seismic")
    return Dataset(velocity=velocity, seismic=seismic, manifest=manifest)
