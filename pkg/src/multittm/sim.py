"""Logical execution of the atomic Multi-TTM algorithm on P simulated ranks.

Ranks run one after another in a single process.  Collectives move no data
between processes; they are word-counting bookkeeping around numpy slices.

Conventions:

* rank coordinates are ``(i_1..i_d, j_1..j_d)`` with ``i_k < p_k`` and
  ``j_k < q_k``; the rank id is their first-fastest linearization;
* every block is shared by a group of ranks, each owning a contiguous chunk
  of the block flattened in first-index-fastest order;
* an all-gather charges a rank the words it receives and a reduce-scatter
  the words it sends, i.e. ``w - chunk`` for a block of ``w`` words;
* reduce-scatter sums partial blocks in ascending rank id.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .problem import MultiTtmShape, ProcGrid, seq_mode_order

ORACLE_LIMIT = 10**7


class DimensionMismatchError(ValueError):
    pass


@dataclass
class FlopCounter:
    flops: int = 0


def _check_operands(X: np.ndarray, matrices: Sequence[np.ndarray]) -> None:
    if X.ndim != len(matrices):
        raise DimensionMismatchError(f"tensor has {X.ndim} modes but {len(matrices)} matrices given")
    for k, A in enumerate(matrices):
        if A.ndim != 2 or A.shape[0] != X.shape[k]:
            raise DimensionMismatchError(f"matrix {k} has shape {A.shape}, needs {X.shape[k]} rows")


def oracle_atomic(X: np.ndarray, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Direct (d+1)-ary summation over every input and output index."""
    _check_operands(X, matrices)
    n = math.prod(X.shape)
    r = math.prod(A.shape[1] for A in matrices)
    if n * r > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to n*r <= {ORACLE_LIMIT}, got {n * r}")
    d = X.ndim
    ins = string.ascii_lowercase[:d]
    outs = string.ascii_uppercase[:d]
    expr = ins + "," + ",".join(a + b for a, b in zip(ins, outs)) + "->" + outs
    return np.einsum(expr, X, *matrices, optimize=False)


def ttm(X: np.ndarray, A: np.ndarray, mode: int, counter: FlopCounter | None = None) -> np.ndarray:
    """Contract mode ``mode`` of X with the rows of A (``n_mode x r_mode``)."""
    if A.ndim != 2 or A.shape[0] != X.shape[mode]:
        raise DimensionMismatchError(f"matrix {A.shape} does not match mode {mode} of {X.shape}")
    Y = np.moveaxis(np.tensordot(X, A, axes=([mode], [0])), -1, mode)
    if counter is not None:
        counter.flops += 2 * Y.size * A.shape[0]
    return Y


def oracle_sequence(X: np.ndarray, matrices: Sequence[np.ndarray], order: Sequence[int] | None = None,
                    counter: FlopCounter | None = None) -> np.ndarray:
    _check_operands(X, matrices)
    Y = X
    for k in seq_mode_order(X.ndim, order):
        Y = ttm(Y, matrices[k], k, counter)
    return Y


def random_instance(shape: MultiTtmShape, seed: int = 42) -> tuple[np.ndarray, list[np.ndarray]]:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(shape.n)
    mats = [rng.standard_normal((a, b)) for a, b in zip(shape.n, shape.r)]
    return X, mats


@dataclass(frozen=True)
class CollectiveRecord:
    kind: str  # "all-gather" or "reduce-scatter"
    group: str
    Q: int
    words_per_rank: Fraction

    def trace_line(self) -> str:
        w = self.words_per_rank
        wtxt = str(w.numerator) if w.denominator == 1 else f"{float(w):.6g}"
        return f"{self.kind},{self.group},{self.Q},{wtxt}"


@dataclass
class SimResult:
    Y: np.ndarray
    per_rank_words: list[int]
    per_rank_flops: list[int]
    collectives: list[CollectiveRecord] = field(default_factory=list)

    @property
    def critical_path_words(self) -> int:
        return max(self.per_rank_words)

    def trace(self) -> str:
        return "\n".join(c.trace_line() for c in self.collectives)


def _chunks(w: int, Q: int) -> list[int]:
    base, extra = divmod(w, Q)
    return [base + (1 if t < extra else 0) for t in range(Q)]


def _lin(coord: Sequence[int], dims: Sequence[int]) -> int:
    idx, stride = 0, 1
    for c, m in zip(coord, dims):
        idx += c * stride
        stride *= m
    return idx


def _coords(dims: Sequence[int]):
    """All coordinates in first-index-fastest order."""
    for rev in itertools.product(*(range(m) for m in reversed(dims))):
        yield tuple(reversed(rev))


def _label(coord: Sequence[int]) -> str:
    return "[" + ".".join(map(str, coord)) + "]"


def _block(arr: np.ndarray, coord: Sequence[int], sizes: Sequence[int]) -> np.ndarray:
    return arr[tuple(slice(c * s, (c + 1) * s) for c, s in zip(coord, sizes))]


def simulate_alg(shape: MultiTtmShape, grid: ProcGrid, X: np.ndarray, matrices: Sequence[np.ndarray]) -> SimResult:
    grid.check_executable(shape)
    _check_operands(X, matrices)
    if tuple(X.shape) != shape.n or any(A.shape != (a, b) for A, a, b in zip(matrices, shape.n, shape.r)):
        raise DimensionMismatchError("operands do not match the shape")
    d = shape.d
    p, q = grid.p, grid.q
    P = grid.P
    bn = [a // b for a, b in zip(shape.n, p)]
    br = [a // b for a, b in zip(shape.r, q)]
    rank_dims = list(p) + list(q)
    words = [0] * P
    flops = [0] * P
    log: list[CollectiveRecord] = []

    def gather(kind_group: str, members: list[int], w: int):
        Q = len(members)
        for rk, c in zip(members, _chunks(w, Q)):
            words[rk] += w - c
        log.append(CollectiveRecord("all-gather", kind_group, Q, Fraction(w) * (Q - 1) / Q))

    # all-gather X blocks: block i is shared by every j
    q_coords = list(_coords(q))
    p_coords = list(_coords(p))
    for i in p_coords:
        members = [_lin(i + j, rank_dims) for j in q_coords]
        gather("X" + _label(i), members, math.prod(bn))
    # all-gather factor blocks: (i_k, j_k) of A^(k) is shared by ranks agreeing on both
    for k in range(d):
        for ik in range(p[k]):
            for jk in range(q[k]):
                members = [_lin(c, rank_dims) for c in _coords(rank_dims)
                           if c[k] == ik and c[d + k] == jk]
                gather(f"A{k + 1}" + _label((ik, jk)), members, bn[k] * br[k])

    # local computation on every rank
    partial: dict[int, np.ndarray] = {}
    for c in _coords(rank_dims):
        i, j = c[:d], c[d:]
        rk = _lin(c, rank_dims)
        T = _block(X, i, bn)
        counter = FlopCounter()
        for k in range(d):
            A = _block(matrices[k], (i[k], j[k]), (bn[k], br[k]))
            T = ttm(T, A, k, counter)
        flops[rk] += counter.flops
        partial[rk] = T

    # reduce-scatter output blocks over all i for each j
    Y = np.empty(shape.r)
    w = math.prod(br)
    for j in q_coords:
        members = sorted(_lin(i + j, rank_dims) for i in p_coords)
        Q = len(members)
        flat = [partial[rk].reshape(-1, order="F") for rk in members]
        total = flat[0].copy()
        for f in flat[1:]:
            total += f
        sizes = _chunks(w, Q)
        for rk, c in zip(members, sizes):
            words[rk] += w - c
            flops[rk] += (Q - 1) * c
        log.append(CollectiveRecord("reduce-scatter", "Y" + _label(j), Q, Fraction(w) * (Q - 1) / Q))
        Y[tuple(slice(jj * s, (jj + 1) * s) for jj, s in zip(j, br))] = total.reshape(br, order="F")
    return SimResult(Y, words, flops, log)


def relative_error(Y: np.ndarray, ref: np.ndarray) -> float:
    scale = float(np.max(np.abs(ref))) if ref.size else 0.0
    diff = float(np.max(np.abs(Y - ref))) if ref.size else 0.0
    return diff / scale if scale > 0 else diff


def simulate_and_verify(shape: MultiTtmShape, grid: ProcGrid, seed: int = 42,
                        rtol: float = 1e-12) -> tuple[SimResult, bool]:
    """Run the simulation on random data and compare with the atomic oracle."""
    X, mats = random_instance(shape, seed)
    res = simulate_alg(shape, grid, X, mats)
    ok = relative_error(res.Y, oracle_atomic(X, mats)) <= rtol
    return res, ok
