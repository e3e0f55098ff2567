"""Tensor grid (PEPS on an open M x N lattice): structure and algorithms.

A grid core at site (m, n) is a 5-way array indexed (left, right, up, down,
physical); boundary bonds have size 1. Site (m, n) maps to global tensor
mode ``n * M + m`` (grid column-major), so the full tensor carries the
column-0 modes first, top to bottom, then column 1, and so on.

Merged multi-bond indices (a whole column's worth of horizontal bonds, or a
column's physical legs) are always combined column-major with the row-0
component fastest; every unfold/fold in this module relies on that shared
convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tengrid import core, tensor_io, tt


@dataclass(frozen=True)
class GridShape:
    """Grid dimensions plus the M x N matrix of physical mode sizes."""

    sizes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.sizes or not self.sizes[0]:
            raise ValueError("grid must have at least one row and one column")
        width = len(self.sizes[0])
        if any(len(row) != width for row in self.sizes):
            raise ValueError("size rows must all have the same length")
        if any(s < 1 for row in self.sizes for s in row):
            raise ValueError("mode sizes must be >= 1")

    @classmethod
    def of(cls, sizes) -> "GridShape":
        return cls(tuple(tuple(int(s) for s in row) for row in np.asarray(sizes)))

    @classmethod
    def uniform(cls, m: int, n: int, size: int) -> "GridShape":
        return cls.of(np.full((m, n), size, dtype=int))

    @classmethod
    def from_tensor_shape(cls, shape: Sequence[int], m: int, n: int) -> "GridShape":
        """Arrange a flat mode-size list onto an M x N grid, column-major."""
        shape = tuple(int(s) for s in shape)
        if len(shape) != m * n:
            raise ValueError(f"tensor order {len(shape)} does not fill a {m}x{n} grid")
        return cls.of([[shape[j * m + i] for j in range(n)] for i in range(m)])

    @property
    def M(self) -> int:
        return len(self.sizes)

    @property
    def N(self) -> int:
        return len(self.sizes[0])

    def size(self, m: int, n: int) -> int:
        return self.sizes[m][n]

    def mode_of(self, m: int, n: int) -> int:
        """Global tensor mode of site (m, n), both 0-based."""
        if not (0 <= m < self.M and 0 <= n < self.N):
            raise ValueError(f"site ({m}, {n}) outside {self.M}x{self.N} grid")
        return n * self.M + m

    def flat_shape(self) -> tuple[int, ...]:
        return tuple(self.sizes[m][n] for n in range(self.N) for m in range(self.M))

    def transposed(self) -> "GridShape":
        return GridShape.of(np.asarray(self.sizes).T)


@dataclass(frozen=True)
class TgRanks:
    """Bond sizes: ``row`` is M x (N-1) horizontal, ``col`` is (M-1) x N vertical."""

    row: tuple[tuple[int, ...], ...]
    col: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if any(r < 1 for block in (self.row, self.col) for line in block for r in line):
            raise ValueError("bond sizes must be >= 1")

    @classmethod
    def of(cls, row, col) -> "TgRanks":
        to_tuple = lambda a: tuple(tuple(int(v) for v in line) for line in a)
        return cls(to_tuple(row), to_tuple(col))

    @classmethod
    def uniform(cls, shape: GridShape, bond: int) -> "TgRanks":
        m, n = shape.M, shape.N
        return cls.of(
            np.full((m, max(n - 1, 0)), bond, dtype=int),
            np.full((max(m - 1, 0), n), bond, dtype=int),
        )

    def row_array(self) -> np.ndarray:
        return np.asarray(self.row, dtype=int).reshape(len(self.row), -1)

    def col_array(self) -> np.ndarray:
        return np.asarray(self.col, dtype=int).reshape(len(self.col), -1)

    def flat(self) -> np.ndarray:
        """Rank vector: horizontal bonds first (column-major), then vertical."""
        return np.concatenate(
            [self.row_array().ravel(order="F"), self.col_array().ravel(order="F")]
        )

    def fits_within(self, other: "TgRanks") -> bool:
        return bool(
            (self.row_array() <= other.row_array()).all()
            and (self.col_array() <= other.col_array()).all()
        )


class TensorGrid:
    """M x N lattice of 5-way cores with consistent shared bonds."""

    def __init__(self, shape: GridShape, cores: list[list[np.ndarray]]):
        self.shape = shape
        self.cores = cores
        self._validate()
        self.ranks = self._infer_ranks()

    def _validate(self) -> None:
        m, n = self.shape.M, self.shape.N
        if len(self.cores) != m or any(len(r) != n for r in self.cores):
            raise ValueError(f"core array must be {m}x{n}")
        for i in range(m):
            for j in range(n):
                c = self.cores[i][j]
                if c.ndim != 5:
                    raise ValueError(f"core ({i},{j}) must be 5-way")
                if c.shape[4] != self.shape.size(i, j):
                    raise ValueError(
                        f"core ({i},{j}) physical size {c.shape[4]} != {self.shape.size(i, j)}"
                    )
                if j == 0 and c.shape[0] != 1:
                    raise ValueError(f"core ({i},{j}) left boundary bond must be 1")
                if j == n - 1 and c.shape[1] != 1:
                    raise ValueError(f"core ({i},{j}) right boundary bond must be 1")
                if i == 0 and c.shape[2] != 1:
                    raise ValueError(f"core ({i},{j}) top boundary bond must be 1")
                if i == m - 1 and c.shape[3] != 1:
                    raise ValueError(f"core ({i},{j}) bottom boundary bond must be 1")
                if j + 1 < n and c.shape[1] != self.cores[i][j + 1].shape[0]:
                    raise ValueError(f"horizontal bond mismatch at ({i},{j})-({i},{j + 1})")
                if i + 1 < m and c.shape[3] != self.cores[i + 1][j].shape[2]:
                    raise ValueError(f"vertical bond mismatch at ({i},{j})-({i + 1},{j})")

    def _infer_ranks(self) -> TgRanks:
        m, n = self.shape.M, self.shape.N
        row = [[self.cores[i][j].shape[1] for j in range(n - 1)] for i in range(m)]
        col = [[self.cores[i][j].shape[3] for j in range(n)] for i in range(m - 1)]
        return TgRanks.of(
            np.asarray(row, dtype=int).reshape(m, n - 1),
            np.asarray(col, dtype=int).reshape(max(m - 1, 0), n),
        )

    def copy(self) -> "TensorGrid":
        return TensorGrid(self.shape, [[c.copy() for c in row] for row in self.cores])


def rank_upper_bounds(shape: GridShape) -> TgRanks:
    """Structural bond-size bounds from the split products of the mode sizes."""
    sizes = np.asarray(shape.sizes, dtype=object)
    m, n = shape.M, shape.N
    row = np.ones((m, max(n - 1, 0)), dtype=int)
    for i in range(m):
        for j in range(n - 1):
            row[i, j] = min(
                math.prod(shape.sizes[i][: j + 1]), math.prod(shape.sizes[i][j + 1 :])
            )
    col = np.ones((max(m - 1, 0), n), dtype=int)
    for i in range(m - 1):
        for j in range(n):
            col_sizes = [shape.sizes[k][j] for k in range(m)]
            col[i, j] = min(math.prod(col_sizes[: i + 1]), math.prod(col_sizes[i + 1 :]))
    return TgRanks.of(row, col)


def _bond_sizes(shape: GridShape, ranks: TgRanks, m: int, n: int) -> tuple[int, int, int, int]:
    row, col = ranks.row_array(), ranks.col_array()
    left = row[m, n - 1] if n > 0 else 1
    right = row[m, n] if n < shape.N - 1 else 1
    up = col[m - 1, n] if m > 0 else 1
    down = col[m, n] if m < shape.M - 1 else 1
    return int(left), int(right), int(up), int(down)


def tg_random(shape: GridShape, ranks: TgRanks, rng_seed: int = 0) -> TensorGrid:
    """Grid with i.i.d. standard-normal core entries, deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    cores = []
    for m in range(shape.M):
        row_cores = []
        for n in range(shape.N):
            l, r, u, d = _bond_sizes(shape, ranks, m, n)
            row_cores.append(rng.standard_normal((l, r, u, d, shape.size(m, n))))
        cores.append(row_cores)
    return TensorGrid(shape, cores)


def column_core(g: TensorGrid, n: int) -> np.ndarray:
    """Contract column ``n`` vertically into a (left, right, physical) 3-way core.

    Each merged axis combines the per-row components row-0 fastest.
    """
    acc = g.cores[0][n][:, :, 0, :, :]  # (l, r, down, phys)
    for i in range(1, g.shape.M):
        nxt = g.cores[i][n]
        acc = np.tensordot(acc, nxt, axes=([2], [2]))  # (L, R, P, l, r, d, p)
        acc = np.transpose(acc, (0, 3, 1, 4, 5, 2, 6))
        s = acc.shape
        acc = core.reshape(acc, (s[0] * s[1], s[2] * s[3], s[4], s[5] * s[6]))
    return acc[:, :, 0, :]  # (L, R, P)


def tg_contract(g: TensorGrid) -> np.ndarray:
    """Exact contraction of all bonds; output modes in grid column-major order."""
    cols = [column_core(g, n) for n in range(g.shape.N)]
    acc = np.transpose(cols[0][0], (1, 0))  # (P, R)
    for c in cols[1:]:
        acc = np.tensordot(acc, c, axes=([1], [0]))  # (P, R', P')
        acc = np.transpose(acc, (0, 2, 1))
        acc = core.reshape(acc, (acc.shape[0] * acc.shape[1], acc.shape[2]))
    return core.reshape(acc[:, 0], g.shape.flat_shape())


def extend_left_stack(stack: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Absorb one more column core into a left boundary stack.

    Stacks carry one merged physical axis per absorbed column followed by the
    merged open bond; the initial stack is ``ones((1,))``.
    """
    out = np.tensordot(stack, col, axes=([-1], [0]))  # (P..., R', P_new)
    return np.moveaxis(out, -2, -1)


def right_stacks(cols: list[np.ndarray]) -> list[np.ndarray]:
    """Suffix boundary stacks: entry j contracts columns j..N-1; entry N is ones."""
    n = len(cols)
    stacks: list[np.ndarray] = [np.ones((1,))] * (n + 1)
    for j in range(n - 1, -1, -1):
        stacks[j] = np.tensordot(cols[j], stacks[j + 1], axes=([1], [0]))
    return stacks


def _partial_column_top(col_cores: list[np.ndarray], m: int) -> np.ndarray:
    """Rows 0..m-1 of a column contracted vertically, per-row bonds kept open.

    Axes: (left bonds..., right bonds..., physical..., running down bond).
    """
    acc = np.ones((1,))
    for i in range(m):
        acc = np.tensordot(acc, col_cores[i], axes=([-1], [2]))
        # (b..., a..., q..., l, r, d, p) -> (b... l, a... r, q... p, d)
        k = i
        perm = (
            list(range(k)) + [3 * k]
            + list(range(k, 2 * k)) + [3 * k + 1]
            + list(range(2 * k, 3 * k)) + [3 * k + 3]
            + [3 * k + 2]
        )
        acc = np.transpose(acc, perm)
    return acc


def _partial_column_bottom(col_cores: list[np.ndarray], m: int) -> np.ndarray:
    """Rows m+1..M-1 contracted vertically, per-row bonds kept open.

    Axes: (running up bond, left bonds..., right bonds..., physical...).
    """
    total = len(col_cores)
    acc = np.ones((1,))
    for i in range(total - 1, m, -1):
        acc = np.tensordot(col_cores[i], acc, axes=([3], [0]))
        # (l, r, u, p, b..., a..., q...) -> (u, l b..., r a..., p q...)
        k = total - 1 - i
        perm = (
            [2, 0] + list(range(4, 4 + k))
            + [1] + list(range(4 + k, 4 + 2 * k))
            + [3] + list(range(4 + 2 * k, 4 + 3 * k))
        )
        acc = np.transpose(acc, perm)
    return acc


def environment_from_stacks(
    g: TensorGrid, m: int, n: int, left: np.ndarray, right: np.ndarray
) -> np.ndarray:
    """Environment of site (m, n) given boundary stacks for columns < n and > n."""
    mm, nn = g.shape.M, g.shape.N
    col = [g.cores[i][n] for i in range(mm)]
    lbonds = tuple(c.shape[0] for c in col)
    rbonds = tuple(c.shape[1] for c in col)
    left = core.reshape(left, left.shape[:-1] + lbonds)
    right = core.reshape(right, rbonds + right.shape[1:])
    top = _partial_column_top(col, m)
    bottom = _partial_column_bottom(col, m)

    # Integer einsum labels: phys per column, then per-row phys/bond labels.
    p = list(range(nn))
    q = list(range(nn, nn + mm))
    b = list(range(nn + mm, nn + 2 * mm))
    a = list(range(nn + 2 * mm, nn + 3 * mm))
    u, d = nn + 3 * mm, nn + 3 * mm + 1

    left_labels = [p[j] for j in range(n)] + b
    right_labels = a + [p[j] for j in range(n + 1, nn)]
    top_labels = b[:m] + a[:m] + q[:m] + [u]
    bottom_labels = [d] + b[m + 1 :] + a[m + 1 :] + q[m + 1 :]
    out_labels = (
        [b[m], a[m], u, d]
        + [p[j] for j in range(n)]
        + q[:m]
        + q[m + 1 :]
        + [p[j] for j in range(n + 1, nn)]
    )
    env = np.einsum(
        left, left_labels,
        top, top_labels,
        bottom, bottom_labels,
        right, right_labels,
        out_labels,
        optimize=True,
    )
    act = g.cores[m][n]
    rhat = act.shape[0] * act.shape[1] * act.shape[2] * act.shape[3]
    return core.reshape(env, (rhat, env.size // rhat))


def environment(g: TensorGrid, m: int, n: int) -> np.ndarray:
    """Contraction of every core except (m, n).

    Rows are the activated core's (left, right, up, down) bond multi-index,
    left fastest; columns are the remaining physical modes in ascending
    global-mode order. Multiplying the activated core's physical unfolding by
    this matrix reproduces the full contraction's mode unfolding.
    """
    if not (0 <= m < g.shape.M and 0 <= n < g.shape.N):
        raise ValueError(f"site ({m}, {n}) outside {g.shape.M}x{g.shape.N} grid")
    cols = [column_core(g, j) for j in range(g.shape.N)]
    left = np.ones((1,))
    for j in range(n):
        left = extend_left_stack(left, cols[j])
    right = right_stacks(cols)[n + 1]
    return environment_from_stacks(g, m, n, left, right)


def column_train(t: np.ndarray, shape: GridShape, target_ranks: TgRanks) -> tt.TensorTrain:
    """First phase of the spectral initializer: a horizontal train over
    column super-modes.

    Each column's M physical modes merge into one super-mode (a pure
    column-major reshape under the grid mode map); the train's bond caps are
    the products of that bond's per-row target sizes.
    """
    t = core.as_tensor(t)
    if t.shape != shape.flat_shape():
        raise ValueError(f"tensor shape {t.shape} does not match grid {shape.flat_shape()}")
    merged = [
        math.prod(shape.sizes[i][j] for i in range(shape.M)) for j in range(shape.N)
    ]
    row = target_ranks.row_array()
    caps = [int(np.prod(row[:, j])) for j in range(shape.N - 1)]
    return tt.tt_svd(core.reshape(t, merged), caps, rel_tol=0.0)


def _balanced_split(merged_rank: int, caps: Sequence[int]) -> list[int]:
    """Factor a merged bond into per-row sub-bond sizes.

    Starts from equal sizes ``ceil(merged_rank ** (1/M))``, caps each entry,
    then grows the smallest capped-under entries until the product covers the
    merged rank. Requires ``prod(caps) >= merged_rank``.
    """
    caps = [int(c) for c in caps]
    m = len(caps)
    s = 1
    while s**m < merged_rank:
        s += 1
    sizes = [min(s, c) for c in caps]
    while math.prod(sizes) < merged_rank:
        grow = [i for i in range(m) if sizes[i] < caps[i]]
        if not grow:
            raise ValueError(
                f"cannot split bond of size {merged_rank} under caps {caps}"
            )
        idx = min(grow, key=lambda i: sizes[i])
        sizes[idx] += 1
    return sizes


def two_stage_dmrg(
    t: np.ndarray,
    shape: GridShape,
    target_ranks: TgRanks,
    pad_sigma: float = 1e-2,
    rng_seed: int = 0,
) -> TensorGrid:
    """Spectral grid initialization by two nested trains of sequential SVDs.

    Phase one builds a horizontal train over merged column super-modes with
    bond caps at the per-bond products of the horizontal targets. Phase two
    splits each train core's merged bonds into balanced per-row sub-bonds
    (zero-embedding any surplus), interleaves bond and physical indices row
    by row, and decomposes vertically with the column targets as caps.
    Bonds that come out below target are finally padded with i.i.d.
    N(0, pad_sigma^2) entries.
    """
    t = core.as_tensor(t)
    bounds = rank_upper_bounds(shape)
    if not target_ranks.fits_within(bounds):
        raise ValueError("target ranks exceed the structural upper bounds")
    mm, nn = shape.M, shape.N
    train = column_train(t, shape, target_ranks)

    row = target_ranks.row_array()
    col = target_ranks.col_array()
    splits = [
        _balanced_split(train.ranks[j], row[:, j]) for j in range(nn - 1)
    ]
    cores: list[list[np.ndarray]] = [[None] * nn for _ in range(mm)]
    for n in range(nn):
        c = train.cores[n]
        ls = splits[n - 1] if n > 0 else [1] * mm
        rs = splits[n] if n < nn - 1 else [1] * mm
        phys = [shape.size(i, n) for i in range(mm)]
        emb = np.zeros((math.prod(ls), c.shape[1], math.prod(rs)))
        emb[: c.shape[0], :, : c.shape[2]] = c
        arr = core.reshape(emb, tuple(ls) + tuple(phys) + tuple(rs))
        interleave = [ax for i in range(mm) for ax in (i, mm + i, 2 * mm + i)]
        arr = np.transpose(arr, interleave)
        arr = core.reshape(arr, tuple(ls[i] * phys[i] * rs[i] for i in range(mm)))
        vertical = tt.tt_svd(arr, col[:, n], rel_tol=0.0)
        for i, vc in enumerate(vertical.cores):
            five = core.reshape(
                vc, (vc.shape[0], ls[i], phys[i], rs[i], vc.shape[2])
            )
            cores[i][n] = np.transpose(five, (1, 3, 0, 4, 2))

    _pad_to_targets(cores, shape, target_ranks, pad_sigma, rng_seed)
    return TensorGrid(shape, cores)


def _pad_to_targets(
    cores: list[list[np.ndarray]],
    shape: GridShape,
    target_ranks: TgRanks,
    pad_sigma: float,
    rng_seed: int,
) -> None:
    rng = np.random.default_rng(rng_seed)
    for m in range(shape.M):
        for n in range(shape.N):
            want = _bond_sizes(shape, target_ranks, m, n) + (shape.size(m, n),)
            have = cores[m][n].shape
            if have == want:
                continue
            padded = rng.normal(0.0, pad_sigma, size=want)
            padded[: have[0], : have[1], : have[2], : have[3], :] = cores[m][n]
            cores[m][n] = padded


def save_grid(path: str | Path, g: TensorGrid) -> None:
    """Write a grid as a directory: JSON manifest plus one file per core."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "M": g.shape.M,
        "N": g.shape.N,
        "sizes": [list(r) for r in g.shape.sizes],
        "row_ranks": g.ranks.row_array().tolist(),
        "col_ranks": g.ranks.col_array().tolist(),
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    for m in range(g.shape.M):
        for n in range(g.shape.N):
            tensor_io.write_tensor(path / f"core_{m}_{n}.tgt", g.cores[m][n])


def load_grid(path: str | Path) -> TensorGrid:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    shape = GridShape.of(manifest["sizes"])
    cores = [
        [tensor_io.read_tensor(path / f"core_{m}_{n}.tgt") for n in range(shape.N)]
        for m in range(shape.M)
    ]
    return TensorGrid(shape, cores)
