"""End-to-end inversion: encode measurements, apply the frozen linear map,
decode to velocity maps. InversionModel packages the whole chain behind a
fit/predict estimator API; the lower-level helpers here are shared with the
command-line pipeline."""

import numpy as np
from sklearn.base import BaseEstimator

from .datagen import denormalize, normalize
from .decoder import DecoderConfig, decoder_forward
from .linmap import fit_ridge, predict_embedding
from .training import TrainConfig, train_decoder
from .transforms import PhiSpec, PsiSpec, embed_properties, encode_measurements
from .validation import check_array


def embedding_targets(velocity, bounds, target):
    """Velocity grids to the field that property kernels integrate."""
    if target == "squared":
        return np.asarray(velocity, dtype=np.float64) ** 2
    lo, hi = bounds
    return normalize(np.asarray(velocity, dtype=np.float64), lo, hi)


def decoder_inputs(linear_map, u, y_emb, use_true_embedding):
    """Decoder training inputs: predicted embeddings by default (matches the
    inference-time distribution), ground-truth embeddings when flagged."""
    return np.asarray(y_emb) if use_true_embedding else predict_embedding(linear_map, u)


def decode_maps(params, dec_config, inputs, batch_size=64):
    """Batched decoder inference; returns (B, H, W) normalized maps."""
    outs = []
    for start in range(0, inputs.shape[0], batch_size):
        out, _ = decoder_forward(inputs[start:start + batch_size], params, dec_config)
        outs.append(out)
    return np.concatenate(outs, axis=0)


class InversionModel(BaseEstimator):
    """Seismic gathers in, velocity maps out.

    fit(X, y) expects X as raw traces (B, S, T, R) and y as velocity maps
    (B, H, W) in m/s. The encoder (integral transform + ridge-fitted linear
    map) is solved in closed form and frozen; only the decoder trains.
    """

    def __init__(self, phi_family="sin_t_mean_x", n_kernels=256, psi_family="gaussian",
                 m_kernels=144, center_grid=None, alpha=1.0, k=64, heads=4, mlp_ratio=4,
                 depth=1, overlap=8, shared_head=True, velocity_bounds=(1500.0, 4500.0),
                 epochs=60, batch_size=32, lr_max=1e-3, lr_min=1e-5, beta1=0.5,
                 beta2=0.999, eps=1e-8, weight_decay=1e-4, t0=5, t_mult=2,
                 val_fraction=0.1, seed=0, deterministic=True, use_true_embedding=False):
        self.phi_family = phi_family
        self.n_kernels = n_kernels
        self.psi_family = psi_family
        self.m_kernels = m_kernels
        self.center_grid = center_grid
        self.alpha = alpha
        self.k = k
        self.heads = heads
        self.mlp_ratio = mlp_ratio
        self.depth = depth
        self.overlap = overlap
        self.shared_head = shared_head
        self.velocity_bounds = velocity_bounds
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t0 = t0
        self.t_mult = t_mult
        self.val_fraction = val_fraction
        self.seed = seed
        self.deterministic = deterministic
        self.use_true_embedding = use_true_embedding

    def _phi_spec(self):
        return PhiSpec(family=self.phi_family, n_kernels=self.n_kernels)

    def _psi_spec(self):
        return PsiSpec(family=self.psi_family, m_kernels=self.m_kernels,
                       center_grid=self.center_grid)

    def _encode(self, X):
        X = check_array(X, "X", ndim=4)
        return encode_measurements(X / self.seismic_scale_, self._phi_spec())

    def fit(self, X, y):
        X = check_array(X, "X", ndim=4)
        y = check_array(y, "y", ndim=3)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on sample count")
        self.seismic_scale_ = float(np.abs(X).max()) or 1.0

        u = self._encode(X)
        lo, hi = self.velocity_bounds
        y_norm = normalize(y, lo, hi)
        y_emb = embed_properties(y_norm, self._psi_spec())

        n = X.shape[0]
        n_val = min(n - 1, max(1, round(self.val_fraction * n))) if n > 1 else 0
        n_train = n - n_val
        self.linear_map_ = fit_ridge(u[:n_train], y_emb[:n_train], alpha=self.alpha)

        inputs = decoder_inputs(self.linear_map_, u, y_emb, self.use_true_embedding)
        self.decoder_config_ = DecoderConfig(
            m_in=self.m_kernels, out_h=y.shape[1], out_w=y.shape[2], k=self.k,
            heads=self.heads, mlp_ratio=self.mlp_ratio, depth=self.depth,
            overlap=self.overlap, shared_head=self.shared_head,
        )
        train_cfg = TrainConfig(
            lr_max=self.lr_max, lr_min=self.lr_min, beta1=self.beta1, beta2=self.beta2,
            eps=self.eps, weight_decay=self.weight_decay, batch_size=self.batch_size,
            epochs=self.epochs, t0=self.t0, t_mult=self.t_mult, seed=self.seed,
            deterministic=self.deterministic,
        )
        result = train_decoder(
            inputs[:n_train], y_norm[:n_train], inputs[n_train:], y_norm[n_train:],
            self.decoder_config_, train_cfg,
        )
        self.params_ = result.params
        self.history_ = result.history
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise ValueError("estimator is not fitted yet")
        u = self._encode(X)
        y_hat = predict_embedding(self.linear_map_, u)
        maps = decode_maps(self.params_, self.decoder_config_, y_hat)
        lo, hi = self.velocity_bounds
        return denormalize(maps, lo, hi)
