"""Scikit-learn style front end for the trainable network families.

``NeuralFieldRegressor`` wraps spec construction, deterministic weight init,
and the full-batch training loop behind ``fit``/``predict``/``get_params`` so
runs compose with scikit-learn tooling (cloning, grid search over params,
pipelines that end in a regressor).

Data layout is grid native rather than tabular: queries are channels-first
coordinate grids ((d, N) or (d, H, W)) and targets are channels-first value
grids, because the conv families need the neighborhood structure that a flat
(n_samples, n_features) matrix would destroy.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import nets, training
from .errors import ConfigurationError, DimensionError


def _as_grid(name, arr, rank=None):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise DimensionError(
            f"{name} must be (channels, N) or (channels, H, W), got {arr.shape}"
        )
    if rank is not None and arr.ndim != (2 if rank == "1d" else 3):
        raise DimensionError(
            f"{name} shape {arr.shape} does not match rank {rank}"
        )
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite values")
    return arr


class NeuralFieldRegressor(RegressorMixin, BaseEstimator):
    """Regress a gridded signal from coordinate queries.

    Parameters mirror the model/training configuration: ``family`` selects the
    architecture (``mlp`` over encoded queries, ``cnn`` over the low-frequency
    signal, ``qnn`` over their channel concatenation), and the remaining
    arguments control encoding, activation, capacity, and optimization.

    ``fit(X, y, low_freq=..., sample_mask=...)`` expects channels-first grids;
    ``sample_mask`` restricts the training loss to selected samples so
    held-out points never leak into the fit.
    """

    def __init__(self, family="mlp", depth=4, width=256, kernel=3,
                 encoding="vanilla", encoding_features=256, encoding_sigma=10.0,
                 encoding_octaves=4, activation="relu", siren_omega0=30.0,
                 residual_output=False, use_bias=True, optimizer="adam",
                 lr=1e-3, weight_decay=0.0, iterations=2000, seed=0):
        self.family = family
        self.depth = depth
        self.width = width
        self.kernel = kernel
        self.encoding = encoding
        self.encoding_features = encoding_features
        self.encoding_sigma = encoding_sigma
        self.encoding_octaves = encoding_octaves
        self.activation = activation
        self.siren_omega0 = siren_omega0
        self.residual_output = residual_output
        self.use_bias = use_bias
        self.optimizer = optimizer
        self.lr = lr
        self.weight_decay = weight_decay
        self.iterations = iterations
        self.seed = seed

    def _make_spec(self, X, y, low_freq):
        rank = "1d" if X.ndim == 2 else "2d"
        return nets.ModelSpec(
            family=self.family,
            rank=rank,
            depth=self.depth,
            width=self.width,
            kernel=None if self.family == "mlp" else self.kernel,
            query_channels=X.shape[0],
            low_freq_channels=0 if low_freq is None else low_freq.shape[0],
            output_channels=y.shape[0],
            encoding=self.encoding,
            encoding_features=self.encoding_features,
            encoding_sigma=self.encoding_sigma,
            encoding_octaves=self.encoding_octaves,
            activation=self.activation,
            siren_omega0=self.siren_omega0,
            residual_output=self.residual_output,
            use_bias=self.use_bias,
        )

    def fit(self, X, y, low_freq=None, sample_mask=None):
        """Train on a full grid; returns self.

        X: (d, N) or (d, H, W) query grid. y: (C, N) or (C, H, W) target.
        low_freq: low-frequency channels on the same grid, required by cnn,
        optional for qnn. sample_mask: 0/1 over samples ((N,) or (H, W)).
        """
        X = _as_grid("X", X)
        y = _as_grid("y", y)
        if y.shape[1:] != X.shape[1:]:
            raise DimensionError(
                f"X spatial extents {X.shape[1:]} and y {y.shape[1:]} differ"
            )
        if low_freq is not None:
            low_freq = _as_grid("low_freq", low_freq)
            if low_freq.shape[1:] != X.shape[1:]:
                raise DimensionError(
                    f"low_freq grid {low_freq.shape[1:]} does not match X"
                )
        spec = self._make_spec(X, y, low_freq)
        model = nets.build_model(spec, self.seed)
        cfg = training.TrainConfig(iterations=self.iterations, lr=self.lr,
                                   optimizer=self.optimizer,
                                   weight_decay=self.weight_decay,
                                   seed=self.seed)
        target = y if spec.family != "mlp" else y.reshape(y.shape[0], -1).T
        mask = None
        if sample_mask is not None:
            sample_mask = np.asarray(sample_mask, dtype=np.float64)
            if sample_mask.shape != X.shape[1:]:
                raise DimensionError(
                    f"sample_mask {sample_mask.shape} does not cover samples "
                    f"{X.shape[1:]}"
                )
            grid = np.broadcast_to(sample_mask, y.shape).copy()
            mask = grid if spec.family != "mlp" else grid.reshape(y.shape[0], -1).T
        low_in = low_freq if spec.takes_low_freq() else None
        trace = training.fit(model, X, low_in, target, cfg, sample_mask=mask)
        self.spec_ = spec
        self.model_ = model
        self.loss_trace_ = trace
        return self

    def predict(self, X, low_freq=None):
        """Predict the target grid at the given queries: (C_out, *spatial)."""
        check_is_fitted(self, "model_")
        X = _as_grid("X", X, rank=self.spec_.rank)
        low_in = low_freq if self.spec_.takes_low_freq() else None
        if self.spec_.takes_low_freq() and low_freq is None:
            raise ConfigurationError(
                f"a fitted {self.spec_.family} model needs low_freq to predict"
            )
        raw = nets.forward(self.model_, X, low_in).data
        return nets.to_grid(self.spec_, raw, X.shape[1:])

    def score(self, X, y, low_freq=None):
        """Coefficient of determination over all grid entries."""
        y = np.asarray(y, dtype=np.float64)
        pred = self.predict(X, low_freq=low_freq)
        residual = float(((y - pred) ** 2).sum())
        total = float(((y - y.mean()) ** 2).sum())
        if total == 0.0:
            return 1.0 if residual == 0.0 else 0.0
        return 1.0 - residual / total
