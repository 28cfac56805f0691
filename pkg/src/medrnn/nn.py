"""Recurrent cell and scoring network with hand-derived backward passes.

Every function accepts either a single parameter set (``W_x`` of shape
``[h, f]``) or a stack of independent parameter sets (``W_x`` of shape
``[G, h, f]``).  In the stacked case inputs are laid out ``[G, B, f]``: one
row block per group, ``B`` samples per block.  A stacked call is exactly
``G`` independent cells evaluated side by side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .tensor import ContractError, Rng, bmm


@dataclass
class RnnCellParams:
    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W_h.shape[-1]


@dataclass
class FfnParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


def _lin(x, W):
    if W.ndim == 2:
        return x @ W.T
    return bmm(x, W.transpose(0, 2, 1))


def _lin_t(d, W):
    if W.ndim == 2:
        return d @ W
    return bmm(d, W)


def _outer_sum(d, x, W):
    if W.ndim == 2:
        return np.outer(d, x) if d.ndim == 1 else d.T @ x
    return bmm(d.transpose(0, 2, 1), x)


def _bias(b, W):
    return b if W.ndim == 2 else b[:, None, :]


def _bias_sum(d, W):
    if W.ndim == 2:
        return d if d.ndim == 1 else d.sum(axis=0)
    return d.sum(axis=1)


def _check_cell(x, h_prev, p: RnnCellParams):
    h, f = p.W_x.shape[-2:]
    if x.shape[-1] != f or h_prev.shape[-1] != h or p.W_h.shape[-2:] != (h, h):
        raise ContractError(
            f"rnn_step: x {x.shape}, h_prev {h_prev.shape} do not fit "
            f"W_x {p.W_x.shape}, W_h {p.W_h.shape}")


class StepCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    h: np.ndarray
    params: RnnCellParams


def rnn_step(x, h_prev, p: RnnCellParams) -> np.ndarray:
    """``h = tanh(W_x x + W_h h_prev + b)``."""
    return rnn_step_forward(x, h_prev, p)[0]


def rnn_step_forward(x, h_prev, p: RnnCellParams):
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_cell(x, h_prev, p)
    h = np.tanh(_lin(x, p.W_x) + _lin(h_prev, p.W_h) + _bias(p.b, p.W_x))
    return h, StepCache(x, h_prev, h, p)


def rnn_step_backward(cache: StepCache | None, dh, grads: RnnCellParams | None = None):
    """Backward pass of one step.

    Returns ``(dx, dh_prev, dW_x, dW_h, db)``.  When ``grads`` is given the
    parameter gradients are also added into it in place.
    """
    if cache is None:
        raise ContractError("rnn_step_backward: missing forward cache")
    x, h_prev, h, p = cache
    dpre = dh * (1.0 - h * h)
    dW_x = _outer_sum(dpre, x, p.W_x)
    dW_h = _outer_sum(dpre, h_prev, p.W_h)
    db = _bias_sum(dpre, p.W_x)
    if grads is not None:
        grads.W_x += dW_x
        grads.W_h += dW_h
        grads.b += db
    return _lin_t(dpre, p.W_x), _lin_t(dpre, p.W_h), dW_x, dW_h, db


class FfnCache(NamedTuple):
    e: np.ndarray
    a: np.ndarray
    params: FfnParams


def ffn_score(e, p: FfnParams):
    """Scalar score ``W2 tanh(W1 e + b1) + b2`` for each row of ``e``."""
    return ffn_forward(e, p)[0]


def ffn_forward(e, p: FfnParams):
    e = np.asarray(e, dtype=np.float64)
    if e.shape[-1] != p.W1.shape[-1] or p.W2.shape[-1] != p.W1.shape[-2]:
        raise ContractError(
            f"ffn_score: e {e.shape} does not fit W1 {p.W1.shape}, W2 {p.W2.shape}")
    a = np.tanh(_lin(e, p.W1) + _bias(p.b1, p.W1))
    z = _lin(a, p.W2) + _bias(p.b2, p.W2)
    z = z[..., 0]
    if z.ndim == 0:
        z = float(z)
    return z, FfnCache(e, a, p)


def ffn_backward(cache: FfnCache, dz, grads: FfnParams | None = None):
    """Returns the gradient w.r.t. ``e``; accumulates parameter grads."""
    e, a, p = cache
    dz = np.asarray(dz, dtype=np.float64)[..., None]
    da = _lin_t(dz, p.W2)
    dpre = da * (1.0 - a * a)
    if grads is not None:
        grads.W2 += _outer_sum(dz, a, p.W2)
        grads.b2 += _bias_sum(dz, p.W2)
        grads.W1 += _outer_sum(dpre, e, p.W1)
        grads.b1 += _bias_sum(dpre, p.W1)
    return _lin_t(dpre, p.W1)


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(1e-8, abs(a) + abs(n))


def grad_check(fn: Callable, theta, eps: float = 1e-5, full_limit: int = 5000,
               n_subsample: int = 200, seed: int = 0) -> float:
    """Largest relative error between analytic and central-difference grads.

    ``fn(theta)`` returns ``(loss, grad)``.  ``theta`` is either a flat array
    or any object with ``flatten()``/``with_flat()`` (a ``ParameterStore``);
    ``grad`` must have the same layout.  Below ``full_limit`` coordinates every
    coordinate is probed, otherwise a seeded subsample of ``n_subsample``.
    """
    if eps <= 0:
        raise ContractError("grad_check: eps must be positive")
    if isinstance(theta, np.ndarray):
        flat0 = np.array(theta, dtype=np.float64).ravel()
        shape = np.shape(theta)

        def rebuild(v):
            return v.reshape(shape)

        def flat_grad(g):
            return np.asarray(g, dtype=np.float64).ravel()
    else:
        flat0 = theta.flatten()
        rebuild = theta.with_flat

        def flat_grad(g):
            return g.flatten()

    loss, grad = fn(rebuild(flat0.copy()))
    if not np.isfinite(loss):
        raise ContractError("grad_check: loss is not finite at theta")
    analytic = flat_grad(grad)
    n = flat0.size
    if n <= full_limit:
        coords = np.arange(n)
    else:
        coords = np.sort(Rng(seed).permutation(n)[:n_subsample])

    worst = 0.0
    for k in coords:
        v = flat0.copy()
        v[k] = flat0[k] + eps
        lp = fn(rebuild(v))[0]
        v[k] = flat0[k] - eps
        lm = fn(rebuild(v))[0]
        if not (np.isfinite(lp) and np.isfinite(lm)):
            raise ContractError(f"grad_check: non-finite loss at coordinate {k}")
        worst = max(worst, _rel_err(analytic[k], (lp - lm) / (2.0 * eps)))
    return worst
