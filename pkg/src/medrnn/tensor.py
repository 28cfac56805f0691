"""Dense float64 kernels and the seeded random generator.

Arrays are plain ``numpy.ndarray`` objects of dtype float64.  Two product
kernels exist:

* :func:`matmul` accumulates in index order ``p = 0..k-1`` exactly like a
  textbook triple loop, so it is bit-for-bit reproducible against a scalar
  reference.
* :func:`bmm` is the grouped product used inside the recurrent networks.  It
  goes through BLAS, which is deterministic for a fixed shape on a fixed
  machine but does not promise a particular summation order.
"""

from __future__ import annotations

import numpy as np

MAX_RANK = 3


class ContractError(ValueError):
    """An argument violated a shape or value precondition."""


def as_tensor(x, rank: int | None = None, name: str = "tensor") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > MAX_RANK:
        raise ContractError(f"{name}: rank {a.ndim} exceeds {MAX_RANK}")
    if rank is not None and a.ndim != rank:
        raise ContractError(f"{name}: expected rank {rank}, got shape {a.shape}")
    return a


def check_finite(a: np.ndarray, name: str = "tensor") -> None:
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name}: contains non-finite values")


def matmul(a, b) -> np.ndarray:
    """Rank-2 product with sequential accumulation over the inner index."""
    a = as_tensor(a, 2, "matmul lhs")
    b = as_tensor(b, 2, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul: shape mismatch {a.shape} x {b.shape}")
    k = a.shape[1]
    if k == 0:
        return np.zeros((a.shape[0], b.shape[1]))
    # elementwise multiply then add, one rank-1 update per p: no fused
    # multiply-add and no reassociation, so each entry sees the loop order
    c = a[:, 0:1] * b[0:1, :]
    for p in range(1, k):
        c = c + a[:, p:p + 1] * b[p:p + 1, :]
    return c


def bmm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Grouped product ``a[g] @ b[g]`` over a leading group axis.

    Either operand may be rank 2, in which case it is shared by every group.
    """
    if a.shape[-1] != b.shape[-2]:
        raise ContractError(f"bmm: shape mismatch {a.shape} x {b.shape}")
    return np.matmul(a, b)


def softmax(z, mask=None, axis: int = -1) -> np.ndarray:
    """Masked, max-shifted softmax along ``axis``.

    Entries where ``mask`` is false get weight exactly 0 and do not take part
    in the max or the normaliser.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0 or z.shape[axis] < 1:
        raise ContractError("softmax: need at least one entry")
    if mask is None:
        m = np.ones(z.shape, dtype=bool)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
    if not np.all(np.any(m, axis=axis)):
        raise ContractError("empty attention support")
    zmax = np.max(np.where(m, z, -np.inf), axis=axis, keepdims=True)
    ex = np.where(m, np.exp(np.where(m, z - zmax, 0.0)), 0.0)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def softmax_backward(w: np.ndarray, dw: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vector-Jacobian product of :func:`softmax`; masked entries get 0."""
    return w * (dw - np.sum(w * dw, axis=axis, keepdims=True))


def map_tanh(a) -> np.ndarray:
    return np.tanh(np.asarray(a, dtype=np.float64))


def map_tanh_grad(a) -> np.ndarray:
    """Elementwise derivative ``1 - tanh(a)**2``."""
    t = np.tanh(np.asarray(a, dtype=np.float64))
    return 1.0 - t * t


class Rng:
    """Seeded generator backed by PCG64 (O'Neill, 2014).

    numpy guarantees the PCG64 bit stream is identical across platforms, so
    equal seeds give equal draws everywhere.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def raw(self, size: int) -> np.ndarray:
        """Raw 64-bit outputs of the underlying bit generator."""
        return self._gen.bit_generator.random_raw(size)
