"""Built-in experiment table and per-figure summary statistics."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

from .problem import MultiTtmShape, canonicalize, p_max, parse_int_list, parse_p_range
from .sweep import SweepRow, sweep, sweep_row


@dataclass(frozen=True)
class FigureSpec:
    fid: str
    kind: str  # "gap", "compare", "fixed-P", "seq-gap", "general"
    shape: MultiTtmShape | None
    P_list: tuple[int, ...]
    n_list: tuple[int, ...] = ()  # input dims swept by the fixed-P experiment
    r_fixed: int = 0
    P_fixed: int = 0
    d: int = 3


def _cube(n: int, r: int, d: int = 3) -> MultiTtmShape:
    return MultiTtmShape((n,) * d, (r,) * d)


def _pow2_range(lo: int, hi: int) -> tuple[int, ...]:
    return tuple(2**k for k in range(lo, hi + 1))


def _full_range(shape: MultiTtmShape) -> tuple[int, ...]:
    return _pow2_range(1, p_max(shape).bit_length() - 1)


def _build_table() -> dict[str, FigureSpec]:
    table: dict[str, FigureSpec] = {}
    mixed, _ = canonicalize(MultiTtmShape((2**12, 2**13, 2**19), (2**8, 2**13, 2**11)))
    table["4a"] = FigureSpec("4a", "gap", mixed, _pow2_range(1, 20))
    for fid, (a, b) in zip("bc", [(12, 4), (20, 8)]):
        s = _cube(2**a, 2**b)
        table["4" + fid] = FigureSpec("4" + fid, "gap", s, _full_range(s))
    for fid, (a, b) in zip("abc", [(12, 4), (13, 6), (20, 8)]):
        s = _cube(2**a, 2**b)
        table["5" + fid] = FigureSpec("5" + fid, "compare", s, _full_range(s))
        table["7" + fid] = FigureSpec("7" + fid, "seq-gap", s, _full_range(s))
    table["6"] = FigureSpec("6", "fixed-P", None, (2**12,), n_list=_pow2_range(6, 20),
                            r_fixed=2**6, P_fixed=2**12)
    for fid, d in zip("abc", [3, 4, 5]):
        s = _cube(2**20, 2**6, d)
        table["8" + fid] = FigureSpec("8" + fid, "general", s, _full_range(s), d=d)
    for fid, (d, b) in zip("abc", [(3, 4), (4, 3), (6, 2)]):
        s = _cube(2**10, 2**b, d)
        table["9" + fid] = FigureSpec("9" + fid, "general", s, _full_range(s), d=d)
    return table


FIGURES = _build_table()


def load_override(spec: FigureSpec, path) -> FigureSpec:
    """Replace the shape and/or P range of ``spec`` from an INI file.

    Recognised keys in the ``[experiment]`` section: ``n``, ``r`` and ``P``
    (``P`` accepts ``2^a..2^b``).
    """
    cp = configparser.ConfigParser()
    if not cp.read(Path(path)):
        raise FileNotFoundError(path)
    sec = cp["experiment"] if cp.has_section("experiment") else cp[cp.default_section]
    shape = spec.shape
    if "n" in sec and "r" in sec:
        shape, _ = canonicalize(MultiTtmShape(parse_int_list(sec["n"]), parse_int_list(sec["r"])))
    P_list = tuple(parse_p_range(sec["P"])) if "P" in sec else (
        _full_range(shape) if shape is not spec.shape else spec.P_list)
    return FigureSpec(spec.fid, spec.kind, shape, P_list, spec.n_list, spec.r_fixed, spec.P_fixed,
                      shape.d if shape is not None else spec.d)


def run_figure(spec: FigureSpec, jobs: int = 1) -> list[tuple[int | None, SweepRow]]:
    """Rows as ``(swept n_i or None, row)``."""
    if spec.kind == "fixed-P":
        out = []
        for ni in spec.n_list:
            s = _cube(ni, spec.r_fixed, spec.d)
            out.append((ni, sweep_row(s, spec.P_fixed)))
        return out
    return [(None, row) for row in sweep(spec.shape, spec.P_list, jobs=jobs)]


def _exp(v: int) -> str:
    return f"2^{v.bit_length() - 1}"


def _argmax(pairs):
    """Largest value and every key attaining it (ties within 1e-12 relative)."""
    top = max(v for v, _ in pairs)
    keys = [k for v, k in pairs if math.isclose(v, top, rel_tol=1e-12)]
    return top, keys


def summarize(spec: FigureSpec, rows: list[tuple[int | None, SweepRow]]) -> dict:
    rs = [row for _, row in rows]
    stats: dict = {"figure": spec.fid}
    if spec.kind == "gap":
        top, at = _argmax([((r.alg_best - r.lb) / r.lb * 100, r.P) for r in rs])
        stats.update(max_gap_pct=top, at_P=at)
    elif spec.kind in ("compare", "general"):
        ratio, at = _argmax([(r.ttmseq / r.alg_best, r.P) for r in rs])
        better = [r for r in rs if r.alg_best < r.ttmseq]
        stats.update(max_ratio=ratio, at_P=at,
                     alg_better_P=[r.P for r in better],
                     alg_le_ttmseq_all=all(r.alg_best <= r.ttmseq for r in rs),
                     max_overhead_pct=max((r.comp_overhead_pct for r in rs), default=0.0),
                     max_overhead_where_better_pct=max((r.comp_overhead_pct for r in better), default=0.0))
        greatest = max(rs, key=lambda r: r.ttmseq / r.alg_best)
        stats["overhead_at_max_ratio_pct"] = greatest.comp_overhead_pct
    elif spec.kind == "seq-gap":
        gap, at = _argmax([((r.ttmseq - r.ttmseq_lb) / r.ttmseq_lb * 100, r.P) for r in rs])
        stats.update(fast_equals_best=all(r.alg_fast == r.alg_best for r in rs),
                     ttmseq_gap_pct=gap, at_P=at,
                     min_first_ttm_ratio=min(r.first_ttm_lb / r.ttmseq_lb for r in rs))
    elif spec.kind == "fixed-P":
        stats.update(ratio_by_n={ni: row.ttmseq / row.alg_best for ni, row in rows},
                     overhead_by_n={ni: row.comp_overhead_pct for ni, row in rows},
                     ttmseq_cheaper_n=[ni for ni, row in rows if row.ttmseq < row.alg_best])
    return stats


def summary_line(spec: FigureSpec, stats: dict) -> str:
    k = spec.kind
    if k == "gap":
        return f"max_gap_pct={stats['max_gap_pct']:.2f} at P={_exp(stats['at_P'][-1])}"
    if k in ("compare", "general"):
        return (f"max_ratio={stats['max_ratio']:.3f} at P={_exp(stats['at_P'][-1])} "
                f"alg_le_ttmseq_all={str(stats['alg_le_ttmseq_all']).lower()} "
                f"max_overhead_where_better_pct={stats['max_overhead_where_better_pct']:.2f} "
                f"overhead_at_max_ratio_pct={stats['overhead_at_max_ratio_pct']:.2f}")
    if k == "seq-gap":
        return (f"fast_equals_best={str(stats['fast_equals_best']).lower()} "
                f"ttmseq_gap_pct={stats['ttmseq_gap_pct']:.2f} at P={_exp(stats['at_P'][-1])} "
                f"min_first_ttm_ratio={stats['min_first_ttm_ratio']:.3f}")
    ratios = stats["ratio_by_n"]
    tail = max(ratios)
    return (f"ratio_at_n={_exp(tail)}:{ratios[tail]:.3f} "
            f"overhead_at_n=2^13:{stats['overhead_by_n'].get(2**13, float('nan')):.2f} "
            f"ttmseq_cheaper_up_to_n={_exp(max(stats['ttmseq_cheaper_n'])) if stats['ttmseq_cheaper_n'] else 'none'}")


def validate_rows(rows: list[tuple[int | None, SweepRow]]) -> list[str]:
    """Invariant failures: 3x guarantee and lower bound validity, per row."""
    problems = []
    for ni, r in rows:
        tag = f"P={r.P}" + (f" n_i={ni}" if ni is not None else "")
        if not r.three_x_ok:
            problems.append(f"{tag}: constructed grid exceeds 3x the lower bound")
        if r.alg_best < r.lb * (1 - 1e-9) - 1e-9:
            problems.append(f"{tag}: best cost {r.alg_best} below lower bound {r.lb}")
    return problems
