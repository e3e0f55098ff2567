"""Dense tensor primitives: permute/reshape, unfoldings, SVD, least squares.

Tensors are plain ``numpy.ndarray`` objects in float64. All linear layouts
in this package are column-major (first index fastest): reshapes, unfoldings
and the on-disk format share that convention, so a matricization produced
here can be folded back bit-exactly.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

# Relative singular-value cutoff used when a pseudoinverse is involved.
PINV_RTOL = 1e-12


class SvdResult(NamedTuple):
    """Thin SVD ``a = U @ diag(s) @ Vt`` with ``s`` nonincreasing."""

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray


def as_tensor(x) -> np.ndarray:
    """Coerce input to a float64 ndarray without copying when possible."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 1:
        arr = arr.reshape(1)
    return arr


def frobenius_norm(x: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(x).ravel()))


def hadamard(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise product of two tensors of identical shape."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x * y


def permute(x: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder tensor modes; ``order`` is a 0-based permutation of range(ndim)."""
    x = np.asarray(x)
    order = tuple(order)
    if sorted(order) != list(range(x.ndim)):
        raise ValueError(f"order {order} is not a permutation of 0..{x.ndim - 1}")
    return np.transpose(x, order)


def inverse_permutation(order: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(order)
    for k, p in enumerate(order):
        inv[p] = k
    return tuple(inv)


def reshape(x: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    """Column-major reshape: linear entry order (first index fastest) is kept."""
    x = np.asarray(x)
    new_shape = tuple(int(s) for s in new_shape)
    if math.prod(new_shape) != x.size:
        raise ValueError(
            f"cannot reshape {x.size} entries into shape {new_shape}"
        )
    return np.reshape(x, new_shape, order="F")


def mode_unfold(x: np.ndarray, d: int) -> np.ndarray:
    """Matricize with mode ``d`` on rows.

    Columns run over the remaining modes in ascending order, first one
    fastest.  ``mode_fold`` is the exact inverse.
    """
    x = np.asarray(x)
    if not 0 <= d < x.ndim:
        raise ValueError(f"mode {d} out of range for order-{x.ndim} tensor")
    return np.reshape(np.moveaxis(x, d, 0), (x.shape[d], -1), order="F")


def mode_fold(mat: np.ndarray, d: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`mode_unfold` for a tensor of the given shape."""
    shape = tuple(int(s) for s in shape)
    if not 0 <= d < len(shape):
        raise ValueError(f"mode {d} out of range for order-{len(shape)} tensor")
    moved = (shape[d],) + shape[:d] + shape[d + 1 :]
    return np.moveaxis(np.reshape(mat, moved, order="F"), 0, d)


def general_unfold(x: np.ndarray, row_modes: Sequence[int]) -> np.ndarray:
    """Matricize with an ordered subset of modes on rows.

    The row modes (in the given order) are brought to the front, the rest
    follow in ascending order, and the result is reshaped column-major to
    ``(prod(row sizes), prod(rest))``.
    """
    x = np.asarray(x)
    row_modes = tuple(int(m) for m in row_modes)
    _check_row_modes(row_modes, x.ndim)
    col_modes = tuple(m for m in range(x.ndim) if m not in row_modes)
    perm = row_modes + col_modes
    rows = math.prod(x.shape[m] for m in row_modes)
    return np.reshape(np.transpose(x, perm), (rows, -1), order="F")


def general_fold(
    mat: np.ndarray, row_modes: Sequence[int], shape: Sequence[int]
) -> np.ndarray:
    """Inverse of :func:`general_unfold` for a tensor of the given shape."""
    shape = tuple(int(s) for s in shape)
    row_modes = tuple(int(m) for m in row_modes)
    _check_row_modes(row_modes, len(shape))
    col_modes = tuple(m for m in range(len(shape)) if m not in row_modes)
    perm = row_modes + col_modes
    permuted_shape = tuple(shape[m] for m in perm)
    xt = np.reshape(mat, permuted_shape, order="F")
    return np.transpose(xt, inverse_permutation(perm))


def _check_row_modes(row_modes: tuple[int, ...], ndim: int) -> None:
    if not row_modes or len(row_modes) >= ndim:
        raise ValueError("row_modes must be a nonempty proper subset of the modes")
    if len(set(row_modes)) != len(row_modes):
        raise ValueError(f"row_modes {row_modes} contains duplicates")
    if any(not 0 <= m < ndim for m in row_modes):
        raise ValueError(f"row_modes {row_modes} out of range for order {ndim}")


def svd(a: np.ndarray) -> SvdResult:
    """Thin SVD of a matrix; raises on non-finite input."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ArithmeticError("matrix contains non-finite entries")
    U, s, Vt = np.linalg.svd(a, full_matrices=False)
    return SvdResult(U, s, Vt)


def ls_solve_rows(bt: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``min_a ||a @ bt - t||_2`` for a row vector.

    Singular values of ``bt`` below ``PINV_RTOL`` times the largest are
    treated as zero, so rank deficiency yields the pseudoinverse solution.
    """
    bt = np.asarray(bt, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64).ravel()
    if bt.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={bt.ndim}")
    if bt.shape[1] != t.size:
        raise ValueError(f"incompatible sizes: bt {bt.shape} vs t ({t.size},)")
    sol, *_ = np.linalg.lstsq(bt.T, t, rcond=PINV_RTOL)
    return sol
