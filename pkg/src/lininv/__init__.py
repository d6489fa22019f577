"""Seismic velocity inversion via integral-transform embeddings, a ridge-fitted
frozen linear map, and a shallow transformer decoder."""

__version__ = "0.1.0"

from .datagen import (
    Acquisition,
    AnomalySpec,
    Dataset,
    MapSpec,
    build_dataset,
    denormalize,
    gen_velocity_map,
    load_dataset,
    normalize,
)
from .decoder import DecoderConfig, decoder_backward, decoder_forward, param_init
from .linmap import (
    LinearMap,
    RidgeEmbeddingMap,
    fit_ridge,
    predict_embedding,
    regression_report,
    svd_spectrum,
)
from .metrics import count_flops, count_params, mae_mse, ssim
from .pipeline import InversionModel
from .training import TrainConfig, adamw_step, cosine_restart_lr, mae_loss, train_decoder
from .transforms import (
    MeasurementEncoder,
    PhiSpec,
    PropertyEmbedder,
    PsiSpec,
    embed_property,
    encode_measurement,
    phi_value,
    psi_value,
)
from .wavesim import (
    ReceiverArray,
    ShotGather,
    SimConfig,
    SourceSpec,
    VelocityMap,
    ricker_wavelet,
    simulate_gather,
    simulate_shot,
    stable_dt,
)

__all__ = [
    "Acquisition", "AnomalySpec", "Dataset", "MapSpec", "build_dataset",
    "denormalize", "gen_velocity_map", "load_dataset", "normalize",
    "DecoderConfig", "decoder_backward", "decoder_forward", "param_init",
    "LinearMap", "RidgeEmbeddingMap", "fit_ridge", "predict_embedding",
    "regression_report", "svd_spectrum",
    "count_flops", "count_params", "mae_mse", "ssim",
    "InversionModel",
    "TrainConfig", "adamw_step", "cosine_restart_lr", "mae_loss", "train_decoder",
    "MeasurementEncoder", "PhiSpec", "PropertyEmbedder", "PsiSpec",
    "embed_property", "encode_measurement", "phi_value", "psi_value",
    "ReceiverArray", "ShotGather", "SimConfig", "SourceSpec", "VelocityMap",
    "ricker_wavelet", "simulate_gather", "simulate_shot", "stable_dt",
]
