"""Dense double-precision matrix helpers.

Matrices are 2-D ``float64`` numpy arrays and vectors are 1-D ones
(``longdouble`` inputs keep their precision).  Every
operation checks shapes explicitly and refuses to broadcast.

``matmul`` deliberately avoids BLAS: each output entry is the sum of its
products taken in index order, so identical inputs give identical bits on
every platform and rows fed by identical data stay bitwise identical.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand dimensions do not conform."""


def _float_dtype(a) -> np.dtype:
    # keeps extended precision when given, otherwise float64
    return np.result_type(np.asarray(a).dtype, np.float64)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=_float_dtype(a))
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim}-D array of shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"matrix must have at least one row and column, got {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=_float_dtype(v))
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got array of shape {x.shape}")
    return x


def _products_summed(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (m, k, n) products reduced over k in order
    prod = a[:, :, None] * b[None, :, :]
    out = prod[:, 0, :].copy()
    for k in range(1, prod.shape[1]):
        out += prod[:, k, :]
    return out


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with a hard error on non-conforming shapes."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return _products_summed(a, b)


def matvec(a, v) -> np.ndarray:
    a = as_matrix(a)
    v = as_vector(v)
    if a.shape[1] != v.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} matrix by vector of length {v.shape[0]}")
    return _products_summed(a, v[:, None])[:, 0]


def dot(u, v) -> float:
    u = as_vector(u)
    v = as_vector(v)
    if u.shape != v.shape:
        raise ShapeError(f"cannot dot vectors of length {u.shape[0]} and {v.shape[0]}")
    return float(matvec(u[None, :], v)[0])


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def _same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def hadamard(a, b) -> np.ndarray:
    """Entrywise product of two equally shaped arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b, "hadamard")
    return a * b


def axpy(alpha: float, a, b) -> np.ndarray:
    """Return ``alpha * a + b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b, "axpy")
    return alpha * a + b


def frobenius_norm(a) -> float:
    """Square root of the sum of squared entries, scaled to avoid under/overflow."""
    a = np.asarray(a, dtype=np.float64)
    peak = float(np.max(np.abs(a))) if a.size else 0.0
    if peak == 0.0 or not np.isfinite(peak):
        return peak
    s = a / peak
    return peak * float(np.sqrt(np.sum(s * s)))
