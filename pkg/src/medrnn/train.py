"""Mini-batch momentum SGD with gradient clipping and validation early stopping."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .model import ModelConfig, ParameterStore, backward, forward, init_params
from .tensor import ContractError, Rng

log = logging.getLogger(__name__)

EVAL_CHUNK = 256


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 200
    grad_clip_norm: float = 5.0
    patience: int = 20
    seed: int = 0
    encoder_dropout_prob: float = 0.0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ContractError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if self.patience < 1:
            raise ContractError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ContractError("max_epochs must be >= 0")
        if not 0.0 <= self.encoder_dropout_prob < 1.0:
            raise ContractError("encoder_dropout_prob must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    initial_valid_loss: float = float("nan")
    best_epoch: int = -1
    best_valid_loss: float = float("inf")
    updates: int = 0
    seconds: float = 0.0
    checksum: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def per_sample_mse(params: ParameterStore, cfg: ModelConfig, X: np.ndarray,
                   Y: np.ndarray) -> np.ndarray:
    """Free-running, full-mask squared error averaged within each sample."""
    out = []
    for k in range(0, X.shape[0], EVAL_CHUNK):
        y_hat = forward(X[k:k + EVAL_CHUNK], params, cfg).y_hat
        r = (y_hat - Y[k:k + EVAL_CHUNK]) ** 2
        out.append(r.reshape(r.shape[0], -1).mean(axis=1))
    return np.concatenate(out)


def validation_loss(params: ParameterStore, cfg: ModelConfig, data: Dataset) -> float:
    return float(np.mean(per_sample_mse(params, cfg, data.X, data.Y)))


def evaluate(params: ParameterStore, cfg: ModelConfig, data: Dataset) -> float:
    """Test error in percent: 100 x mean squared error, free-running."""
    return 100.0 * validation_loss(params, cfg, data)


def clip_gradients(grads: ParameterStore, max_norm: float) -> float:
    """Rescale ``grads`` in place to global 2-norm <= ``max_norm``; returns the pre-clip norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays.values())))
    if norm > max_norm:
        s = max_norm / norm
        for g in grads.arrays.values():
            g *= s
    return norm


def _dropout_mask(rng: Rng, n: int, E: int, prob: float) -> np.ndarray | None:
    if prob <= 0.0:
        return None
    m = rng.random((n, E)) >= prob
    empty = ~m.any(axis=1)
    if empty.any():
        # keep one random encoder for samples that lost all of them
        keep = rng.integers(0, E, size=int(empty.sum()))
        m[np.flatnonzero(empty), keep] = True
    return m


def train(train_data: Dataset, valid_data: Dataset, cfg: ModelConfig, tcfg: TrainConfig,
          params: ParameterStore | None = None):
    """Fit ``cfg`` on ``train_data``; returns the best-validation parameters and a report."""
    if len(train_data) == 0 or len(valid_data) == 0:
        raise ContractError("train: training and validation sets must be non-empty")
    t0 = time.perf_counter()
    params = init_params(cfg, tcfg.seed) if params is None else params.copy()
    rng = Rng(tcfg.seed + 0x9E3779B9)
    velocity = params.zeros_like()
    report = TrainReport()
    best = params.copy()
    report.initial_valid_loss = validation_loss(params, cfg, valid_data)
    stale = 0
    N = len(train_data)
    for epoch in range(tcfg.max_epochs):
        order = rng.permutation(N)
        total = 0.0
        for b, k in enumerate(range(0, N, tcfg.batch_size)):
            idx = np.sort(order[k:k + tcfg.batch_size])
            mask = _dropout_mask(rng, idx.size, cfg.E, tcfg.encoder_dropout_prob)
            L, grads = backward(train_data.X[idx], train_data.Y[idx], params, cfg, mask)
            if not np.isfinite(L):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            clip_gradients(grads, tcfg.grad_clip_norm)
            for name, p in params.arrays.items():
                v = velocity.arrays[name]
                v *= tcfg.momentum
                v -= tcfg.learning_rate * grads.arrays[name]
                p += v
            total += L * idx.size
            report.updates += 1
        report.train_loss.append(total / N)
        vl = validation_loss(params, cfg, valid_data)
        if not np.isfinite(vl):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        report.valid_loss.append(vl)
        log.debug("epoch %d train %.5f valid %.5f", epoch, report.train_loss[-1], vl)
        if vl < report.best_valid_loss:
            report.best_valid_loss, report.best_epoch = vl, epoch
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= tcfg.patience:
                break
    report.seconds = time.perf_counter() - t0
    report.checksum = best.checksum()
    return best, report
