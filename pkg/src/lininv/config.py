"""Experiment configuration: one JSON document drives the whole pipeline.

Sections have full defaults, unknown keys are rejected, and the canonical
dict of the resolved config is hashed into every artifact.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .containers import config_hash
from .datagen import Acquisition, AnomalySpec, MapSpec, default_split
from .errors import ConfigError
from .training import TrainConfig
from .transforms import PhiSpec, PsiSpec

TARGET_FIELDS = ("normalized", "squared")


@dataclass
class DatasetConfig:
    n_samples: int = 2400
    split: tuple | None = (2000, 200, 200)
    height: int = 64
    width: int = 64
    dx: float = 10.0
    dz: float = 10.0
    v_min: float = 1500.0
    v_max: float = 4500.0
    n_layers_range: tuple = (2, 5)
    max_tilt: float = 0.15
    monotone_depth: bool = False
    anomaly: dict | None = field(default_factory=dict)  # {} = default AnomalySpec, None = off

    def map_spec(self):
        anomaly = None
        if self.anomaly is not None:
            anomaly = _build(AnomalySpec, self.anomaly, "dataset.anomaly")
        return MapSpec(
            height=self.height, width=self.width, dx=self.dx, dz=self.dz,
            v_min=self.v_min, v_max=self.v_max,
            n_layers_range=tuple(self.n_layers_range), max_tilt=self.max_tilt,
            monotone_depth=self.monotone_depth, anomaly=anomaly,
        )

    def resolved_split(self):
        return tuple(self.split) if self.split is not None else default_split(self.n_samples)


@dataclass
class EmbeddingConfig:
    family: str = "gaussian"
    m_kernels: int = 144
    center_grid: tuple | None = None
    target: str = "normalized"

    def __post_init__(self):
        if self.target not in TARGET_FIELDS:
            raise ConfigError(f"embedding.target must be one of {TARGET_FIELDS}, got {self.target!r}")

    def psi_spec(self):
        grid = tuple(self.center_grid) if self.center_grid is not None else None
        return PsiSpec(family=self.family, m_kernels=self.m_kernels, center_grid=grid)


@dataclass
class RidgeConfig:
    alpha: float = 1.0


@dataclass
class DecoderOptions:
    k: int = 64
    heads: int = 4
    mlp_ratio: int = 4
    depth: int = 1
    overlap: int = 8
    shared_head: bool = True


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {path} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in section {path}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid section {path}: {e}") from e


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    acquisition: Acquisition = field(default_factory=Acquisition)
    encoder: PhiSpec = field(default_factory=PhiSpec)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    ridge: RidgeConfig = field(default_factory=RidgeConfig)
    decoder: DecoderOptions = field(default_factory=DecoderOptions)
    training: TrainConfig = field(default_factory=TrainConfig)
    use_true_embedding: bool = False  # train decoder on ground-truth Y instead of A@U

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        sections = {
            "dataset": DatasetConfig,
            "acquisition": Acquisition,
            "encoder": PhiSpec,
            "embedding": EmbeddingConfig,
            "ridge": RidgeConfig,
            "decoder": DecoderOptions,
            "training": TrainConfig,
        }
        known = set(sections) | {"seed", "use_true_embedding"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {unknown}")
        kwargs = {name: _build(c, data.get(name), name) for name, c in sections.items()}
        kwargs["seed"] = int(data.get("seed", 0))
        kwargs["use_true_embedding"] = bool(data.get("use_true_embedding", False))
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        split = self.dataset.resolved_split()
        if sum(split) != self.dataset.n_samples or any(s < 0 for s in split):
            raise ConfigError(
                f"dataset.split {list(split)} does not partition n_samples={self.dataset.n_samples}"
            )
        try:
            self.dataset.map_spec()
            self.embedding.psi_spec()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.ridge.alpha < 0:
            raise ConfigError("ridge.alpha must be >= 0")

    def to_dict(self):
        doc = dataclasses.asdict(self)
        return json.loads(json.dumps(doc))  # plain JSON-safe primitives

    def hash(self):
        return config_hash(self.to_dict())


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(data)
