"""Communication lower bounds.

``multi_ttm_lb`` bounds any load-balanced atomic Multi-TTM algorithm.  The
TTM-in-sequence bounds sum per-step matrix-multiplication bounds, one per
single-mode TTM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .optsolve import CappedMinSumProblem, solve, solve_matrix_term, solve_tensor_term
from .problem import InvalidShapeError, MultiTtmShape, require_canonical, seq_mode_order


class LoadBalanceError(ValueError):
    """More processors than (d+1)-ary multiply terms."""


@dataclass(frozen=True)
class LbBreakdown:
    A: float
    B: float
    owned: float
    lb: float
    case_A: int
    case_B: int
    lb_matrix: float = 0.0
    lb_tensor: float = 0.0

    def to_dict(self) -> dict:
        return {
            "A": self.A, "B": self.B, "owned": self.owned, "lb": self.lb,
            "case_A": self.case_A, "case_B": self.case_B,
            "lb_matrix": self.lb_matrix, "lb_tensor": self.lb_tensor,
        }


def _check_P(shape: MultiTtmShape, P) -> None:
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    if P > shape.n_total * shape.r_total:
        raise LoadBalanceError(f"P={P} exceeds n*r={shape.n_total * shape.r_total}")


def _excess(x: Sequence[float], caps: Sequence[int], P) -> float:
    """``sum_j (x_j - caps_j / P)`` term by term.

    Subtracting the owned share per variable avoids the cancellation of
    forming ``sum x - sum caps / P`` when the arrays are huge.
    """
    return float(sum(xj - c / P for xj, c in zip(x, caps)))


def multi_ttm_lb(shape: MultiTtmShape, P) -> LbBreakdown:
    require_canonical(shape)
    _check_P(shape, P)
    mat = solve_matrix_term(shape, P)
    ten = solve_tensor_term(shape, P)
    owned = (shape.n_total + shape.r_total + sum(shape.matrix_sizes)) / P
    lb_m = _excess(mat.x_star, shape.matrix_sizes, P)
    lb_t = _excess(ten.x_star, (shape.r_total, shape.n_total), P)
    lb = max(0.0, lb_m + lb_t)
    return LbBreakdown(mat.objective, ten.objective, owned, lb, mat.case_index, ten.case_index,
                       lb_matrix=lb_m, lb_tensor=lb_t)


def _icbrt(v: int) -> int | None:
    c = round(v ** (1.0 / 3.0))
    for cand in (c - 1, c, c + 1):
        if cand >= 0 and cand**3 == v:
            return cand
    return None


def cubical_lb(n_total: int, r_total: int, P) -> float:
    """Closed-form bound for 3-way cubical tensors."""
    cn, cr = _icbrt(n_total), _icbrt(r_total)
    if cn is None or cr is None:
        raise InvalidShapeError(f"n={n_total} and r={r_total} must both be perfect cubes")
    if n_total < r_total:
        raise InvalidShapeError("cubical bound needs n >= r")
    n, r = n_total, r_total
    nr = n * r
    side = cn * cr  # (nr)^(1/3)
    if Fraction(P) < Fraction(n, r):
        val = 3 * (nr / P) ** (1 / 3) + r - (3 * side + r) / P
    else:
        val = 3 * (nr / P) ** (1 / 3) + 2 * (nr / P) ** 0.5 - (n + 3 * side + r) / P
    return max(0.0, val)


def matmul_lb(m: int, k: int, n: int, P) -> float:
    """Memory-independent bound for an ``m x k`` times ``k x n`` product on P ranks.

    With dims sorted ``d1 >= d2 >= d3`` a rank doing ``d1 d2 d3 / P``
    multiplies must touch at least its share of every matrix.  While
    ``P < d1 d2 / d3^2`` the largest matrix stays at that share and the two
    smaller ones solve the capped problem with divisor P; past it all three
    grow evenly to ``(d1 d2 d3 / P)^(2/3)``.
    """
    if min(m, k, n) < 1 or P < 1:
        raise ValueError("dimensions and P must be >= 1")
    d1, d2, d3 = sorted((m, k, n), reverse=True)
    big, mid, small = d1 * d2, d1 * d3, d2 * d3
    if Fraction(P) >= Fraction(big, d3 * d3):
        level = float(Fraction(d1 * d2 * d3) / Fraction(P)) ** (2 / 3)
        x = (level, level, level)
    else:
        x = solve(CappedMinSumProblem((small, mid), P)).x_star + (big / P,)
    return max(0.0, _excess(x, (small, mid, big), P))


def ttm_seq_steps(shape: MultiTtmShape, mode_order: Sequence[int] | None = None) -> list[tuple[int, int, int]]:
    """``(m, k, n)`` of each matrix product in a TTM sequence.

    Step for mode ``j`` multiplies the ``r_j x n_j`` factor with the mode-``j``
    unfolding, whose columns span the finished ``r`` dims and pending ``n`` dims.
    """
    order = seq_mode_order(shape.d, mode_order)
    dims = list(shape.n)
    steps = []
    for j in order:
        cols = math.prod(dims) // dims[j]
        steps.append((shape.r[j], shape.n[j], cols))
        dims[j] = shape.r[j]
    return steps


def ttm_seq_lb(shape: MultiTtmShape, P, mode_order: Sequence[int] | None = None,
               n_steps: int | None = None) -> float:
    """Sum of per-TTM matrix-multiplication bounds over the first ``n_steps`` steps (default all)."""
    steps = ttm_seq_steps(shape, mode_order)
    if n_steps is None:
        n_steps = len(steps)
    if not 0 <= n_steps <= len(steps):
        raise ValueError(f"n_steps must be in [0, {len(steps)}]")
    return sum(matmul_lb(m, k, n, P) for m, k, n in steps[:n_steps])


def first_ttm_lb(shape: MultiTtmShape, P, mode_order: Sequence[int] | None = None) -> float:
    return ttm_seq_lb(shape, P, mode_order, n_steps=1)
