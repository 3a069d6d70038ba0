"""Dense matrix kernels shared by every stage.

Matrices are plain 2-D ``float64`` numpy arrays. Files carry 32-bit floats, but all arithmetic is
done in 64-bit because Sinkhorn and multi-hop propagation amplify rounding.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

from .core.errors import ShapeError

DenseMatrix = npt.NDArray[np.float64]

# Upper bound on elements materialized by one block of a max-product.
_MAX_BLOCK_ELEMENTS = 1 << 24


def as_dense(m: npt.ArrayLike, name: str = "matrix") -> DenseMatrix:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Standard matrix product (the sum-aggregated similarity path)."""
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} x {b.shape} do not conform")
    return a @ b


def _max_product(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """out[i, j] = max_k a[i, k] * b[k, j], evaluated in row blocks to bound memory."""
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    if rows == 0 or cols == 0:
        return out
    if inner == 0:
        # no path between i and j
        out.fill(0.0)
        return out
    step = max(1, _MAX_BLOCK_ELEMENTS // max(1, inner * cols))
    for start in range(0, rows, step):
        block = a[start : start + step, :, None] * b[None, :, :]
        out[start : start + step] = block.max(axis=1)
    return out


def max_compose(a: DenseMatrix, x: DenseMatrix, b_t: DenseMatrix) -> DenseMatrix:
    """Max-aggregated similarity path: out[i, j] = max_{s,t} a[i, s] * x[s, t] * b_t[j, t].

    When ``a`` is nonnegative, a[i, s] factors out of the max over t, so the reduction becomes two
    max-products whatever the signs of ``x`` and ``b_t``. A signed ``a`` gets the full triple reduction.
    """
    if a.shape[1] != x.shape[0] or x.shape[1] != b_t.shape[1]:
        raise ShapeError(f"max_compose: {a.shape}, {x.shape}, {b_t.shape} do not conform")
    if a.size == 0 or a.min() >= 0:
        inner = _max_product(x, b_t.T)  # |S| x |E_t|
        return _max_product(a, inner)

    rows, cols = a.shape[0], b_t.shape[0]
    out = np.zeros((rows, cols), dtype=np.float64)
    if x.size == 0:
        return out
    right = x[None, :, :] * b_t[:, None, :]  # |E_t| x |S| x |T|
    for i in range(rows):
        out[i] = (a[i, None, :, None] * right).max(axis=(1, 2))
    return out


def row_l2_normalize(m: DenseMatrix) -> DenseMatrix:
    """Scale each nonzero row to unit Euclidean norm; zero rows stay zero."""
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return m / safe


def minmax_scale(m: DenseMatrix) -> DenseMatrix:
    """Affine map of all entries onto [0, 1]; a constant matrix maps to zeros."""
    if m.size == 0:
        return m.copy()
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def row_argmax(m: DenseMatrix) -> npt.NDArray[np.int64]:
    """Per row, the smallest column index attaining the row maximum."""
    if m.shape[1] == 0:
        raise ShapeError("row_argmax: matrix has zero columns")
    return np.argmax(m, axis=1).astype(np.int64)
