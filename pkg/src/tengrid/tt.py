"""Tensor-train decomposition via sequential SVD, contraction, random trains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tengrid import core


@dataclass
class TensorTrain:
    """Chain of 3-way cores; core ``k`` has shape (r_{k-1}, I_k, r_k).

    Boundary ranks r_0 and r_D are 1; adjacent cores share their bond size.
    """

    cores: list[np.ndarray]

    def __post_init__(self):
        if not self.cores:
            raise ValueError("a tensor train needs at least one core")
        for k, c in enumerate(self.cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} must be 3-way, got ndim={c.ndim}")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(self.cores) - 1):
            if self.cores[k].shape[2] != self.cores[k + 1].shape[0]:
                raise ValueError(
                    f"bond mismatch between cores {k} and {k + 1}: "
                    f"{self.cores[k].shape[2]} vs {self.cores[k + 1].shape[0]}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])


def tt_svd(
    x: np.ndarray, max_ranks: Sequence[int], rel_tol: float = 0.0
) -> TensorTrain:
    """Decompose a tensor into a train by D-1 sequential thin SVDs.

    At each bond the kept rank is ``min(max_rank, #{s_i >= rel_tol * s_1})``
    but at least 1; the discarded singular directions are truncated and the
    remainder ``diag(s) @ Vt`` is carried to the next split. With unbounded
    ranks and ``rel_tol=0`` the train reconstructs ``x`` exactly.
    """
    x = core.as_tensor(x)
    shape = x.shape
    d = x.ndim
    max_ranks = [int(r) for r in max_ranks]
    if len(max_ranks) != d - 1:
        raise ValueError(f"need {d - 1} rank caps for an order-{d} tensor, got {len(max_ranks)}")
    if any(r < 1 for r in max_ranks):
        raise ValueError("rank caps must be >= 1")
    if not 0.0 <= rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in [0, 1), got {rel_tol}")

    cores: list[np.ndarray] = []
    carry = core.reshape(x, (shape[0], x.size // shape[0])) if d > 1 else None
    if d == 1:
        return TensorTrain([x.reshape(1, shape[0], 1)])

    r_prev = 1
    for k in range(d - 1):
        mat = core.reshape(carry, (r_prev * shape[k], carry.size // (r_prev * shape[k])))
        U, s, Vt = core.svd(mat)
        if s[0] > 0:
            keep = int(np.count_nonzero(s >= rel_tol * s[0]))
        else:
            keep = 1
        r = max(1, min(max_ranks[k], keep))
        cores.append(core.reshape(U[:, :r], (r_prev, shape[k], r)))
        carry = s[:r, None] * Vt[:r]
        r_prev = r
    cores.append(core.reshape(carry, (r_prev, shape[-1], 1)))
    return TensorTrain(cores)


def tt_contract(t: TensorTrain) -> np.ndarray:
    """Contract the train left to right into the full tensor."""
    acc = t.cores[0][0]  # (I_1, r_1)
    for c in t.cores[1:]:
        acc = np.tensordot(acc, c, axes=([-1], [0]))
    return np.ascontiguousarray(acc[..., 0])


def tt_random(
    shape: Sequence[int], ranks: Sequence[int], rng_seed: int = 0
) -> TensorTrain:
    """Train with i.i.d. standard-normal core entries, deterministic per seed."""
    shape = [int(s) for s in shape]
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(shape) - 1:
        raise ValueError(f"need {len(shape) - 1} ranks for an order-{len(shape)} tensor, got {len(ranks)}")
    rng = np.random.default_rng(rng_seed)
    bonds = [1] + ranks + [1]
    cores = [
        rng.standard_normal((bonds[k], shape[k], bonds[k + 1]))
        for k in range(len(shape))
    ]
    return TensorTrain(cores)
