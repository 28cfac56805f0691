"""Comparison models: last observed value, ridge regression, plain RNNs.

The plain RNN baselines are fusion-model configurations with a single
encoder and decoder, so they run through exactly the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .model import ModelConfig
from .tensor import ContractError

DEFAULT_LAMBDA = 1e-3
COND_LIMIT = 1e12


class SingularSystemError(ValueError):
    pass


def last_observed(X, T_dec: int) -> np.ndarray:
    """Repeat each station's final encoder step over the horizon."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim not in (3, 4):
        raise ContractError(f"last_observed: X must be [E, T, F] or [N, E, T, F], got {X.shape}")
    last = X[..., -1:, :]
    reps = [1] * X.ndim
    reps[-2] = T_dec
    return np.tile(last, reps)


# ------------------------------------------------------------------ ridge

def solve_ridge(A: np.ndarray, B: np.ndarray, lam: float, bias: bool = True) -> np.ndarray:
    """Solve ``(A^T A + lam P) W^T = A^T B`` for ``W``.

    ``P`` is the identity, except that the last column of ``A`` is left
    unpenalised when ``bias`` is true.  Uses a dense LU solve (LAPACK gesv).
    """
    if lam < 0:
        raise ContractError("ridge lambda must be >= 0")
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.asarray(B, dtype=np.float64)
    B = B.reshape(A.shape[0], -1)
    G = A.T @ A
    pen = np.full(A.shape[1], lam)
    if bias:
        pen[-1] = 0.0
    G[np.diag_indices_from(G)] += pen
    if lam == 0 and np.linalg.cond(G) > COND_LIMIT:
        raise SingularSystemError(
            "normal equations are singular or ill-conditioned at lambda = 0; use lambda > 0")
    try:
        Wt = np.linalg.solve(G, A.T @ B)
    except np.linalg.LinAlgError:
        raise SingularSystemError("singular normal equations; use lambda > 0") from None
    return Wt.T


def ridge_objective(A, B, W, lam, bias=True) -> float:
    R = A @ W.T - B
    Wp = W[:, :-1] if bias else W
    return float(np.sum(R * R) + lam * np.sum(Wp * Wp))


def _design(X: np.ndarray) -> np.ndarray:
    """Flatten trailing axes and append the constant-1 bias column."""
    flat = X.reshape(X.shape[0], -1)
    return np.concatenate([flat, np.ones((flat.shape[0], 1))], axis=1)


@dataclass
class RidgeModel:
    W: list[np.ndarray]  # one [(T_dec*F) x (T_enc*F_in + 1)] matrix per target group
    joint: bool
    lam: float
    T_dec: int
    F: int


def ridge_fit(data: Dataset, joint: bool, lam: float = DEFAULT_LAMBDA) -> RidgeModel:
    X, Y = data.X, data.Y
    N, E, _, F = X.shape
    D, T_dec = Y.shape[1], Y.shape[2]
    if joint:
        W = [solve_ridge(_design(X), Y.reshape(N, -1), lam)]
    else:
        if E != D:
            raise ContractError("per-station ridge needs E = D")
        W = [solve_ridge(_design(X[:, j]), Y[:, j].reshape(N, -1), lam) for j in range(D)]
    return RidgeModel(W, joint, lam, T_dec, F)


def ridge_predict(model: RidgeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 3
    if single:
        X = X[None]
    N = X.shape[0]
    if model.joint:
        Y = (_design(X) @ model.W[0].T).reshape(N, -1, model.T_dec, model.F)
    else:
        Y = np.stack([(_design(X[:, j]) @ Wj.T).reshape(N, model.T_dec, model.F)
                      for j, Wj in enumerate(model.W)], axis=1)
    return Y[0] if single else Y


# ------------------------------------------------------------ plain RNNs

def regular_rnn_configs(base: ModelConfig):
    """Per-station (one single-station model per decoder) and joint configs."""
    per_station = [replace(base, E=1, D=1) for _ in range(base.D)]
    joint = replace(base, E=1, D=1, F_enc=base.E * base.F_enc, F_dec=base.D * base.F_dec)
    return per_station, joint


def to_joint(A: np.ndarray) -> np.ndarray:
    """``[N, S, T, F]`` -> ``[N, 1, T, S*F]`` with station-major features."""
    N, S, T, F = A.shape
    return A.transpose(0, 2, 1, 3).reshape(N, 1, T, S * F)


def from_joint(A: np.ndarray, S: int) -> np.ndarray:
    N, _, T, SF = A.shape
    return A.reshape(N, T, S, SF // S).transpose(0, 2, 1, 3)
