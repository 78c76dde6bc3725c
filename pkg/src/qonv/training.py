"""Optimizers and the shared full-batch training loop.

Every experiment trains the same way: rebuild the tape, evaluate the masked
mean-squared error against the target, backpropagate, and take one Adam or
AdamW step. Runs are deterministic for a given model seed because the loop
itself draws no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import autodiff as ad
from . import nets
from .errors import ConfigurationError, NumericError
from .signals import ImagePair, SignalPair

OPTIMIZER_KINDS = ("adam", "adamw")


@dataclass
class TrainConfig:
    iterations: int = 2000
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigurationError(
                f"unknown optimizer {self.optimizer!r}; "
                f"expected one of {OPTIMIZER_KINDS}"
            )
        if self.log_every < 1:
            raise ConfigurationError("log_every must be >= 1")


class Optimizer:
    """Adam with bias correction; AdamW adds decoupled decay before the step."""

    def __init__(self, params, kind="adam", lr=1e-3, beta1=0.9, beta2=0.999,
                 eps=1e-8, weight_decay=0.0):
        if kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(f"unknown optimizer {kind!r}")
        self.params = list(params)
        self.kind = kind
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros(p.value.shape) for p in self.params]
        self._v = [np.zeros(p.value.shape) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if not np.isfinite(g).all():
                raise NumericError(
                    f"non-finite gradient in parameter {p.name!r} at step {t}"
                )
            value = p.value.data
            if self.kind == "adamw" and self.weight_decay != 0.0:
                value = value - self.lr * self.weight_decay * value
            m, v = self._m[i], self._v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            np.sqrt(v_hat, out=v_hat)
            v_hat += self.eps
            m_hat /= v_hat
            m_hat *= self.lr
            p._assign_owned(value - m_hat)


def fit(model: nets.Model, q, low_freq, target, cfg: TrainConfig,
        sample_mask=None) -> np.ndarray:
    """Train in place against ``target`` (family-native layout); return the
    per-iteration loss trace of length ``iterations + 1`` (entry 0 is the
    loss at initialization).

    ``sample_mask`` restricts the loss to chosen samples: a 0/1 array shaped
    like the target. The masked loss is the mean of squared errors over the
    selected entries only.
    """
    target = np.asarray(target, dtype=np.float64)
    if sample_mask is not None:
        mask = np.asarray(sample_mask, dtype=np.float64)
        if mask.shape != target.shape:
            raise ConfigurationError(
                f"sample mask {mask.shape} does not match target {target.shape}"
            )
        selected = mask.sum()
        if selected == 0:
            raise ConfigurationError("sample mask selects nothing")
        loss_factor = target.size / selected
        masked_target = target * mask
    else:
        mask = None
        loss_factor = 1.0
        masked_target = target

    optimizer = Optimizer(model.parameters, kind=cfg.optimizer, lr=cfg.lr,
                          beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
                          weight_decay=cfg.weight_decay)
    trace = np.empty(cfg.iterations + 1)

    def loss_node(tape):
        pred = nets.forward_on_tape(tape, model, q, low_freq)
        if mask is not None:
            pred = ad.mul(tape, pred, tape.constant(mask))
        loss = ad.mse_loss(tape, pred, tape.constant(masked_target))
        if loss_factor != 1.0:
            loss = ad.scale(tape, loss, loss_factor)
        return loss

    # Desk-scale tensors lose badly to BLAS thread sync; parallelism belongs
    # at the experiment level, across independent runs.
    with threadpool_limits(limits=1, user_api="blas"):
        for it in range(cfg.iterations + 1):
            tape = ad.Tape()
            loss = loss_node(tape)
            value = float(loss.value.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at iteration {it}")
            trace[it] = value
            if it == cfg.iterations:
                break
            tape.backward(loss)
            optimizer.step()
    return trace


def _native_target(model: nets.Model, grid_target: np.ndarray) -> np.ndarray:
    if model.spec.family == "mlp":
        channels = grid_target.shape[0]
        return grid_target.reshape(channels, -1).T
    return grid_target


def train(model: nets.Model, data, cfg: TrainConfig, sample_mask=None):
    """Train a model on a signal or image pair; returns (model, loss trace).

    Residual-output models regress the ground truth directly (the network adds
    its low-frequency input back); all others regress the high-frequency part.
    ``sample_mask`` is a 0/1 grid over samples (shape (N,) or (H, W)).
    """
    if isinstance(data, SignalPair):
        coords, low = data.coords, data.low
        grid_target = data.full if model.spec.residual_output else data.high
        spatial = (data.full.shape[1],)
    elif isinstance(data, ImagePair):
        coords, low = data.coords, data.low
        residual = model.spec.residual_output
        grid_target = data.ground_truth if residual else data.ground_truth - data.low
        spatial = data.ground_truth.shape[1:]
    else:
        raise ConfigurationError(f"cannot train on {type(data).__name__}")

    low_in = low if model.spec.takes_low_freq() else None
    target = _native_target(model, grid_target)
    mask = None
    if sample_mask is not None:
        sample_mask = np.asarray(sample_mask, dtype=np.float64)
        if sample_mask.shape != spatial:
            raise ConfigurationError(
                f"sample mask {sample_mask.shape} does not cover samples {spatial}"
            )
        channels = grid_target.shape[0]
        grid_mask = np.broadcast_to(sample_mask, (channels,) + spatial).copy()
        mask = _native_target(model, grid_mask)
    trace = fit(model, coords, low_in, target, cfg, sample_mask=mask)
    return model, trace


def predict_grid(model: nets.Model, data) -> np.ndarray:
    """Reconstructed prediction on the data grid: low + high estimate."""
    if isinstance(data, SignalPair):
        coords, low, spatial = data.coords, data.low, (data.full.shape[1],)
    else:
        coords, low, spatial = data.coords, data.low, data.ground_truth.shape[1:]
    low_in = low if model.spec.takes_low_freq() else None
    raw = nets.forward(model, coords, low_in).data
    out = nets.to_grid(model.spec, raw, spatial)
    if not model.spec.residual_output:
        out = low + out
    return out
