"""Analytic bandwidth, latency and flop counts.

Two algorithms are modelled: the atomic Multi-TTM on a ``p x q`` grid and the
TTM-in-sequence scheme with one processor-grid dimension per mode.  Integer
grids are evaluated in exact rational arithmetic; the float fields of the
breakdowns are conversions of those exact values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .problem import InvalidGridError, MultiTtmShape, ProcGrid, seq_mode_order


def _num(v):
    """Exact Fraction for ints, float otherwise."""
    return Fraction(v) if isinstance(v, (int, Fraction)) else float(v)


def _check_d(shape: MultiTtmShape, d: int) -> None:
    if d != shape.d:
        raise InvalidGridError(f"grid has {d} modes, shape has {shape.d}")


@dataclass(frozen=True)
class CostBreakdown:
    tensor_in: float
    tensor_out: float
    matrix_terms: tuple[float, ...]
    owned: float
    total_bandwidth: float
    latency: float
    flops: float
    tensor_words: float = 0.0  # tensor share of total_bandwidth
    matrix_words: float = 0.0
    ceil_blocks: bool = False  # set when a non-dividing integer grid forced ceil-sized blocks

    def to_dict(self) -> dict:
        return {
            "tensor_in": self.tensor_in, "tensor_out": self.tensor_out,
            "matrix_terms": list(self.matrix_terms), "owned": self.owned,
            "total_bandwidth": self.total_bandwidth, "latency": self.latency,
            "flops": self.flops, "tensor_words": self.tensor_words,
            "matrix_words": self.matrix_words, "ceil_blocks": self.ceil_blocks,
        }


@dataclass(frozen=True)
class SeqCostBreakdown:
    intermediate_terms: tuple[float, ...]
    matrix_terms: tuple[float, ...]
    owned: float
    total: float
    tensor_part: float = 0.0  # intermediate-tensor share of total
    matrix_part: float = 0.0


def _alg_terms(shape: MultiTtmShape, grid: ProcGrid):
    """Per-rank accessed words (exact when the grid divides the shape)."""
    _check_d(shape, grid.d)
    ceil_blocks = grid.is_integral() and not grid.divides(shape)
    if ceil_blocks:
        bn = [Fraction(-(-a // p)) for a, p in zip(shape.n, grid.p)]
        br = [Fraction(-(-b // q)) for b, q in zip(shape.r, grid.q)]
    else:
        bn = [_num(a) / _num(p) for a, p in zip(shape.n, grid.p)]
        br = [_num(b) / _num(q) for b, q in zip(shape.r, grid.q)]
    t_in = math.prod(bn)
    t_out = math.prod(br)
    mats = [x * y for x, y in zip(bn, br)]
    P = _num(grid.P) if grid.is_integral() else float(grid.P)
    owned = (shape.n_total + shape.r_total + sum(shape.matrix_sizes)) / P
    if ceil_blocks:
        ten = t_in + t_out - (shape.n_total + shape.r_total) / P
        mat = sum(mats) - sum(shape.matrix_sizes) / P
    else:
        # each collective moves (1 - 1/Q) of its block; this form keeps huge
        # real-valued shapes free of cancellation
        p_, q_ = _num(grid.p_total), _num(grid.q_total)
        ten = t_in * (1 - 1 / q_) + t_out * (1 - 1 / p_)
        mat = sum(m * (1 - _num(pi) * _num(qi) / P) for m, pi, qi in zip(mats, grid.p, grid.q))
    return t_in, t_out, mats, owned, ten, mat, ceil_blocks


def alg_words_exact(shape: MultiTtmShape, grid: ProcGrid) -> Fraction:
    """Critical-path words of the atomic algorithm on an integer grid, exactly."""
    if not grid.is_integral():
        raise InvalidGridError("exact word count needs an integer grid")
    _, _, _, _, ten, mat, _ = _alg_terms(shape, grid)
    return ten + mat


def alg_compute(shape: MultiTtmShape, grid: ProcGrid, order: Sequence[int] | None = None,
                exact: bool = False):
    """Local TTM-sequence flops plus reduce-scatter additions for one rank."""
    _check_d(shape, grid.d)
    order = seq_mode_order(shape.d, order)
    bn = [_num(a) / _num(p) for a, p in zip(shape.n, grid.p)]
    br = [_num(b) / _num(q) for b, q in zip(shape.r, grid.q)]
    dims = list(bn)
    flops = 0
    for j in order:
        flops += 2 * math.prod(dims) * br[j]
        dims[j] = br[j]
    q = _num(grid.q_total)
    P = _num(grid.P)
    flops += (1 - q / P) * (_num(shape.r_total) / q)
    return flops if exact else float(flops)


def alg_comm_cost(shape: MultiTtmShape, grid: ProcGrid) -> CostBreakdown:
    t_in, t_out, mats, owned, ten, mat, ceil_blocks = _alg_terms(shape, grid)
    total = ten + mat
    return CostBreakdown(
        tensor_in=float(t_in),
        tensor_out=float(t_out),
        matrix_terms=tuple(float(m) for m in mats),
        owned=float(owned),
        total_bandwidth=max(0.0, float(total)),
        latency=shape.d * math.log2(grid.P),
        flops=alg_compute(shape, grid),
        tensor_words=float(ten),
        matrix_words=float(mat),
        ceil_blocks=ceil_blocks,
    )


def seq_intermediate_sizes(shape: MultiTtmShape, mode_order: Sequence[int] | None = None) -> list[int]:
    """Size of the tensor produced by each TTM step."""
    order = seq_mode_order(shape.d, mode_order)
    dims = list(shape.n)
    out = []
    for j in order:
        dims[j] = shape.r[j]
        out.append(math.prod(dims))
    return out


def ttm_seq_comm_cost(shape: MultiTtmShape, tilde: Sequence, mode_order: Sequence[int] | None = None,
                      exact: bool = False) -> SeqCostBreakdown:
    """Cost of TTM-in-sequence where step ``j`` runs on a grid with ``tilde[j]`` rows.

    Each step reduce-scatters its output over ``tilde[j]`` ranks and reads its
    factor matrix split ``tilde[j]`` ways.
    """
    tilde = tuple(tilde)
    _check_d(shape, len(tilde))
    order = seq_mode_order(shape.d, mode_order)
    vals = [_num(t) for t in tilde]
    P = math.prod(vals)
    sizes = seq_intermediate_sizes(shape, order)
    inter = [T * vals[j] / P for T, j in zip(sizes, order)]
    mats = [shape.n[j] * shape.r[j] / vals[j] for j in order]
    # step j reduce-scatters over tilde_j ranks and gathers its factor over P / tilde_j
    ten = sum(t * (1 - 1 / vals[j]) for t, j in zip(inter, order))
    mat = sum(m * (1 - vals[j] / P) for m, j in zip(mats, order))
    owned = (sum(sizes) + sum(shape.matrix_sizes)) / P
    conv = (lambda v: v) if exact else float
    return SeqCostBreakdown(
        tuple(conv(v) for v in inter), tuple(conv(v) for v in mats),
        conv(owned), conv(ten + mat), conv(ten), conv(mat),
    )


def ttm_seq_compute(shape: MultiTtmShape, P, mode_order: Sequence[int] | None = None, exact: bool = False):
    order = seq_mode_order(shape.d, mode_order)
    dims = list(shape.n)
    flops = 0
    for j in order:
        flops += 2 * math.prod(dims) * shape.r[j]
        dims[j] = shape.r[j]
    val = Fraction(flops) / _num(P) if isinstance(P, int) else flops / float(P)
    return val if exact else float(val)


def comp_overhead(shape: MultiTtmShape, alg_grid: ProcGrid, P=None) -> float:
    """Extra flops of the atomic algorithm relative to TTM-in-sequence, in percent."""
    P = alg_grid.P if P is None else P
    alg = alg_compute(shape, alg_grid, exact=alg_grid.is_integral())
    seq = ttm_seq_compute(shape, P, exact=isinstance(P, int))
    return float(100 * (alg - seq) / seq)
