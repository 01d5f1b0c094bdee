"""Processor grid construction.

``select_grid_real`` builds a real-valued grid whose cost is within 3x of the
lower bound; ``round_grid_pow2`` turns it into an integer power-of-two grid;
the ``exhaustive_*`` searches find exact optima for both algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .bounds import LoadBalanceError, multi_ttm_lb
from .costs import alg_comm_cost, alg_words_exact, ttm_seq_comm_cost, seq_intermediate_sizes
from .optsolve import solve_matrix_term
from .problem import (InvalidShapeError, MultiTtmShape, ProcGrid, is_pow2, log2_exact,
                      require_canonical, seq_mode_order)


class GridSearchError(RuntimeError):
    pass


class GridInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class AdjustmentStep:
    stage: str
    p: tuple[float, ...]
    q: tuple[float, ...]

    @property
    def p_total(self) -> float:
        return math.prod(self.p)

    @property
    def q_total(self) -> float:
        return math.prod(self.q)


@dataclass
class GridChoice:
    grid: ProcGrid
    scenario: str  # "I" when P < n/r, else "II"
    case_index: int
    log: list[AdjustmentStep] = field(default_factory=list)

    @property
    def fired(self) -> list[str]:
        return [s.stage for s in self.log if s.stage != "initial"]


_REL = 1e-9


def _record(log: list, stage: str, p, q) -> None:
    log.append(AdjustmentStep(stage, tuple(p), tuple(q)))


def _fix_lower(p: list, q: list, log: list) -> None:
    """Raise entries below one while keeping every ``p_j q_j`` and both totals."""
    below_q = math.prod(v for v in q if v < 1)
    below_p = math.prod(v for v in p if v < 1)
    if below_q == 1 and below_p == 1:
        return
    # The loop is written for the q^b <= p^b branch; swap roles for the other.
    a_side, b_side = (p, q) if below_q <= below_p else (q, p)
    a = 1.0
    for j in range(len(p)):
        if b_side[j] < 1:
            a *= b_side[j]
            a_side[j] *= b_side[j]
            b_side[j] = 1.0
        elif a_side[j] < 1:
            a /= a_side[j]
            b_side[j] *= a_side[j]
            a_side[j] = 1.0
    for j in range(len(p)):
        if b_side[j] > 1 and a < 1:
            prev = b_side[j]
            b_side[j] = max(1.0, a * b_side[j])
            ratio = prev / b_side[j]
            a *= ratio
            a_side[j] *= ratio
    _record(log, "min-fix", p, q)


def _fit_caps(x: list, y: list, caps: Sequence[int], total: float) -> None:
    """Move weight from ``x`` into ``y`` so that ``x_j <= caps_j`` and ``prod x == total``."""
    rem = total
    for j in range(len(x)):
        pair = x[j] * y[j]
        if math.isclose(pair, 1.0, rel_tol=_REL):
            continue
        if rem > 1 + _REL:
            x[j] = min(rem, caps[j], pair)
            rem /= x[j]
        else:
            x[j] = 1.0
        y[j] = pair / x[j]


def _fix_upper_pairs(shape: MultiTtmShape, p: list, q: list, log: list) -> None:
    over_p = any(pj > nj * (1 + _REL) for pj, nj in zip(p, shape.n))
    over_q = any(qj > rj * (1 + _REL) for qj, rj in zip(q, shape.r))
    if not (over_p and over_q):
        return
    active = [j for j in range(shape.d) if not math.isclose(p[j] * q[j], 1.0, rel_tol=_REL)]
    pt = math.prod(p[j] for j in active)
    qt = math.prod(q[j] for j in active)
    room_p = math.prod(min(shape.n[j], p[j] * q[j]) for j in active)
    room_q = math.prod(min(shape.r[j], p[j] * q[j]) for j in active)
    if pt <= room_p * (1 + _REL):
        _fit_caps(p, q, shape.n, pt)
        _record(log, "cap-fit-p", p, q)
    elif qt <= room_q * (1 + _REL):
        _fit_caps(q, p, shape.r, qt)
        _record(log, "cap-fit-q", p, q)
    else:
        raise GridInvariantError("neither p nor q fits under its caps")


def _clamp_side(x: list, caps: Sequence[int], total: float) -> bool:
    if not any(v > c * (1 + _REL) for v, c in zip(x, caps)):
        return False
    d = len(x)
    for _ in range(2):
        for j in reversed(range(d)):
            others = math.prod(x[l] for l in range(d) if l != j)
            x[j] = min(caps[j], total / others)
    return True


def select_grid_real(shape: MultiTtmShape, P) -> GridChoice:
    require_canonical(shape)
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    if P > shape.n_total * shape.r_total:
        raise LoadBalanceError(f"P={P} exceeds n*r")
    d, n, r = shape.d, shape.n_total, shape.r_total
    I = solve_matrix_term(shape, P).case_index
    big = range(d - I, d)
    N_I = math.prod(shape.n[j] for j in big)
    R_I = math.prod(shape.r[j] for j in big)
    p = [1.0] * d
    q = [1.0] * d
    if Fraction(P) < Fraction(n, r):
        scenario = "I"
        scale = (P / (N_I * R_I)) ** (1.0 / I)
        for j in big:
            p[j] = shape.n[j] * shape.r[j] * scale
    else:
        scenario = "II"
        fp = (n * P / (r * N_I**2)) ** (1.0 / (2 * I))
        fq = (r * P / (n * R_I**2)) ** (1.0 / (2 * I))
        for j in big:
            p[j] = shape.n[j] * fp
            q[j] = shape.r[j] * fq
    log: list[AdjustmentStep] = []
    _record(log, "initial", p, q)
    p_target, q_target = math.prod(p), math.prod(q)

    _fix_lower(p, q, log)
    _fix_upper_pairs(shape, p, q, log)
    if _clamp_side(p, shape.n, p_target):
        _record(log, "clamp-p", p, q)
    if _clamp_side(q, shape.r, q_target):
        _record(log, "clamp-q", p, q)

    for step in log:
        if not (math.isclose(step.p_total, p_target, rel_tol=_REL)
                and math.isclose(step.q_total, q_target, rel_tol=_REL)):
            raise GridInvariantError(f"stage {step.stage} changed the grid totals")
    tol = 1 + _REL
    if any(not (1 / tol <= v <= c * tol) for v, c in zip(p, shape.n)) or \
       any(not (1 / tol <= v <= c * tol) for v, c in zip(q, shape.r)):
        raise GridInvariantError(f"grid out of bounds: p={p} q={q}")
    grid = ProcGrid(tuple(p), tuple(q), P)
    return GridChoice(grid, scenario, I, log)


def three_x_check(shape: MultiTtmShape, grid: ProcGrid) -> tuple[bool, float, float]:
    """``(ok, cost, lb)`` for the 3x-of-lower-bound guarantee.

    ``cost`` already has the owned data subtracted.
    """
    c = alg_comm_cost(shape, grid)
    lb = multi_ttm_lb(shape, grid.P).lb
    # float slack scaled to the data volume; real grids carry rounding residue
    slack = 1e-9 * (lb + c.owned)
    return c.total_bandwidth <= 3 * lb + slack, c.total_bandwidth, lb


# -- power-of-two rounding -------------------------------------------------------

def _log2_snapped(v: float) -> float:
    x = math.log2(v)
    return float(round(x)) if abs(x - round(x)) < 1e-9 else x


def _round_exp(v: float) -> int:
    x = _log2_snapped(v)
    return math.floor(x + 0.5)


def _round_side(vals: list[float], target_exp: int) -> list[float]:
    """Round one side to powers of two with product ``2**target_exp``."""
    d = len(vals)
    cur = math.prod(vals)
    f = 2.0**target_exp / cur
    vals = [v * f ** (1.0 / d) for v in vals]
    for i in range(d - 1):
        new = 2.0 ** _round_exp(vals[i])
        change = vals[i] / new
        vals[i] = new
        rest = d - i - 1
        for j in range(i + 1, d):
            vals[j] *= change ** (1.0 / rest)
    vals[-1] = 2.0**target_exp / math.prod(vals[:-1])
    return vals


def _repair_exps(exps: list[int], caps: list[int]) -> list[int]:
    """Push exponents back into ``[0, caps]`` keeping their sum."""
    exps = list(exps)
    excess = 0
    for i, (e, c) in enumerate(zip(exps, caps)):
        if e > c:
            excess += e - c
            exps[i] = c
        elif e < 0:
            excess += e
            exps[i] = 0
    i = 0
    while excess > 0 and i < len(exps):
        room = caps[i] - exps[i]
        take = min(room, excess)
        exps[i] += take
        excess -= take
        i += 1
    i = len(exps) - 1
    while excess < 0 and i >= 0:
        take = min(exps[i], -excess)
        exps[i] -= take
        excess += take
        i -= 1
    if excess:
        raise GridInvariantError("exponents cannot fit their caps")
    return exps


def round_grid_pow2(real_choice: GridChoice | ProcGrid, shape: MultiTtmShape, P: int) -> ProcGrid:
    if not (shape.is_power_of_two() and is_pow2(P)):
        raise InvalidShapeError("power-of-two rounding needs power-of-two dims and P")
    grid = real_choice.grid if isinstance(real_choice, GridChoice) else real_choice
    L = log2_exact(P)
    p_exp = _round_exp(grid.p_total)
    p_exp = min(max(p_exp, 0), L)
    p = _round_side(list(grid.p), p_exp)
    q = _round_side(list(grid.q), L - p_exp)
    ep = [round(_log2_snapped(v)) for v in p]
    eq = [round(_log2_snapped(v)) for v in q]
    ep = _repair_exps(ep, [log2_exact(v) for v in shape.n])
    eq = _repair_exps(eq, [log2_exact(v) for v in shape.r])
    return ProcGrid(tuple(2**e for e in ep), tuple(2**e for e in eq), P)


def fast_grid(shape: MultiTtmShape, P: int) -> ProcGrid:
    return round_grid_pow2(select_grid_real(shape, P), shape, P)


# -- exhaustive search ---------------------------------------------------------------

def _compositions(total: int, caps: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Vectors ``0 <= e_i <= caps_i`` summing to ``total``, in lexicographic order."""
    caps = list(caps)
    suffix = [0] * (len(caps) + 1)
    for i in reversed(range(len(caps))):
        suffix[i] = suffix[i + 1] + caps[i]

    def rec(i, left, acc):
        if i == len(caps):
            if left == 0:
                yield tuple(acc)
            return
        lo = max(0, left - suffix[i + 1])
        for v in range(lo, min(caps[i], left) + 1):
            acc.append(v)
            yield from rec(i + 1, left - v, acc)
            acc.pop()

    if 0 <= total <= suffix[0]:
        yield from rec(0, total, [])


def _best_grid_pow2(shape: MultiTtmShape, P: int) -> tuple[ProcGrid, Fraction]:
    d = shape.d
    L = log2_exact(P)
    ln = [log2_exact(v) for v in shape.n]
    lr = [log2_exact(v) for v in shape.r]
    n, r = shape.n_total, shape.r_total
    kr = shape.matrix_sizes
    owned = n + r + sum(kr)
    best = None  # (scaled cost, key, ep, eq)
    for s in _compositions(L, [a + b for a, b in zip(ln, lr)]):
        lo_i = [max(0, si - b) for si, b in zip(s, lr)]
        hi_i = [min(si, a) for si, a in zip(s, ln)]
        lo, hi = sum(lo_i), sum(hi_i)
        mat = sum(k << (L - si) for k, si in zip(kr, s))
        # tensor part n*2^(L-a) + r*2^a is convex in a
        x2 = log2_exact(n) - log2_exact(r) + L
        cands = {min(max(c, lo), hi) for c in (x2 // 2, (x2 + 1) // 2)}
        for a in sorted(cands):
            cost = (n << (L - a)) + (r << a) + mat - owned
            if best is not None and cost > best[0]:
                continue
            ep, rest = [], a
            for i in range(d):
                e = max(lo_i[i], rest - sum(hi_i[i + 1:]))
                ep.append(e)
                rest -= e
            eq = [si - e for si, e in zip(s, ep)]
            key = tuple(ep) + tuple(eq)
            if best is None or cost < best[0] or key < best[1]:
                best = (cost, key, ep, eq)
    if best is None:
        raise GridSearchError(f"no power-of-two grid for P={P}")
    cost, _, ep, eq = best
    return ProcGrid(tuple(2**e for e in ep), tuple(2**e for e in eq), P), Fraction(cost, P)


def _divisors(v: int) -> list[int]:
    small = [k for k in range(1, math.isqrt(v) + 1) if v % k == 0]
    return sorted(set(small + [v // k for k in small]))


def _factorizations(P: int, choices: list[list[int]]) -> Iterator[tuple[int, ...]]:
    """Tuples with ``t_i`` from ``choices[i]`` multiplying to P, lexicographic."""
    def rec(i, left, acc):
        if i == len(choices):
            if left == 1:
                yield tuple(acc)
            return
        for c in choices[i]:
            if left % c == 0:
                acc.append(c)
                yield from rec(i + 1, left // c, acc)
                acc.pop()
    yield from rec(0, P, [])


def _best_grid_divisors(shape: MultiTtmShape, P: int) -> tuple[ProcGrid, Fraction]:
    d = shape.d
    choices = [_divisors(v) for v in shape.n] + [_divisors(v) for v in shape.r]
    best = None
    for t in _factorizations(P, choices):
        grid = ProcGrid(t[:d], t[d:], P)
        cost = alg_words_exact(shape, grid)
        if best is None or cost < best[1]:
            best = (grid, cost)
    if best is None:
        raise GridSearchError(f"no dividing grid of P={P} for {shape}")
    return best


def exhaustive_best_grid(shape: MultiTtmShape, P: int, method: str = "auto") -> tuple[ProcGrid, Fraction]:
    """Cheapest dividing integer grid; ties go to the lexicographically smallest ``(p, q)``.

    ``method`` is ``"pow2"`` (exponent enumeration), ``"divisors"`` (brute
    force over divisor tuples) or ``"auto"``.
    """
    require_canonical(shape)
    if not isinstance(P, int) or P < 1:
        raise ValueError(f"P must be a positive integer, got {P}")
    if method == "auto":
        method = "pow2" if shape.is_power_of_two() and is_pow2(P) else "divisors"
    if method == "pow2":
        return _best_grid_pow2(shape, P)
    if method == "divisors":
        return _best_grid_divisors(shape, P)
    raise ValueError(f"unknown method {method!r}")


def _seq_scaled_cost(shape: MultiTtmShape, exps, order, sizes, P: int, L: int) -> int:
    cost = 0
    for T, j in zip(sizes, order):
        cost += T << exps[j]
    for j in range(shape.d):
        cost += (shape.n[j] * shape.r[j]) << (L - exps[j])
    return cost - sum(sizes) - sum(shape.matrix_sizes)


def exhaustive_best_ttm_seq_grid(shape: MultiTtmShape, P: int, mode_order: Sequence[int] | None = None,
                                 method: str = "auto") -> tuple[tuple[int, ...], Fraction]:
    """Cheapest per-mode split ``p~`` for TTM-in-sequence, with ``p~_j <= n_j``."""
    if not isinstance(P, int) or P < 1:
        raise ValueError(f"P must be a positive integer, got {P}")
    order = seq_mode_order(shape.d, mode_order)
    if method == "auto":
        method = "pow2" if shape.is_power_of_two() and is_pow2(P) else "divisors"
    best = None
    if method == "pow2":
        L = log2_exact(P)
        sizes = seq_intermediate_sizes(shape, order)
        for e in _compositions(L, [log2_exact(v) for v in shape.n]):
            c = _seq_scaled_cost(shape, e, order, sizes, P, L)
            if best is None or c < best[1]:
                best = (tuple(2**x for x in e), c)
        if best is not None:
            best = (best[0], Fraction(best[1], P))
    elif method == "divisors":
        for t in _factorizations(P, [_divisors(v) for v in shape.n]):
            c = ttm_seq_comm_cost(shape, t, order, exact=True).total
            if best is None or c < best[1]:
                best = (t, c)
    else:
        raise ValueError(f"unknown method {method!r}")
    if best is None:
        raise GridSearchError(f"no TTM-in-sequence grid of P={P} for {shape}")
    return best
