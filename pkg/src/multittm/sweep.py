"""Strong-scaling sweeps: one row of costs and bounds per processor count."""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .bounds import first_ttm_lb, multi_ttm_lb, ttm_seq_lb
from .costs import alg_comm_cost, comp_overhead, ttm_seq_comm_cost
from .gridsel import (exhaustive_best_grid, exhaustive_best_ttm_seq_grid, fast_grid, select_grid_real,
                      three_x_check)
from .problem import MultiTtmShape, is_pow2, p_max, require_canonical

CSV_COLUMNS = (
    "P", "lb", "lb_tensor", "lb_matrix", "alg_best", "alg_best_tensor", "alg_best_matrix",
    "alg_fast", "ttmseq", "ttmseq_tensor", "ttmseq_matrix", "ttmseq_lb", "first_ttm_lb",
    "comp_overhead_pct",
)


@dataclass(frozen=True)
class SweepRow:
    P: int
    lb: float
    lb_tensor: float
    lb_matrix: float
    alg_best: float
    alg_best_tensor: float
    alg_best_matrix: float
    alg_fast: float
    ttmseq: float
    ttmseq_tensor: float
    ttmseq_matrix: float
    ttmseq_lb: float
    first_ttm_lb: float
    comp_overhead_pct: float
    best_grid: str = ""
    fast_grid: str = ""
    ttmseq_grid: str = ""
    three_x_ok: bool = True

    def csv_values(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def sweep_row(shape: MultiTtmShape, P: int) -> SweepRow:
    lb = multi_ttm_lb(shape, P)
    best, _ = exhaustive_best_grid(shape, P)
    bc = alg_comm_cost(shape, best)
    if shape.is_power_of_two() and is_pow2(P):
        fg = fast_grid(shape, P)
        fast_cost, fast_txt = alg_comm_cost(shape, fg).total_bandwidth, str(fg)
    else:
        fast_cost, fast_txt = math.nan, ""
    ok, _, _ = three_x_check(shape, select_grid_real(shape, P).grid)
    tilde, _ = exhaustive_best_ttm_seq_grid(shape, P)
    sc = ttm_seq_comm_cost(shape, tilde)
    return SweepRow(
        P=P,
        lb=lb.lb,
        lb_tensor=lb.lb_tensor,
        lb_matrix=lb.lb_matrix,
        alg_best=bc.total_bandwidth,
        alg_best_tensor=bc.tensor_words,
        alg_best_matrix=bc.matrix_words,
        alg_fast=fast_cost,
        ttmseq=sc.total,
        ttmseq_tensor=sc.tensor_part,
        ttmseq_matrix=sc.matrix_part,
        # the reported TTM-in-sequence bound sums every step except the last
        ttmseq_lb=ttm_seq_lb(shape, P, n_steps=shape.d - 1),
        first_ttm_lb=first_ttm_lb(shape, P),
        comp_overhead_pct=comp_overhead(shape, best, P),
        best_grid=str(best),
        fast_grid=fast_txt,
        ttmseq_grid="p~=" + ",".join(map(str, tilde)),
        three_x_ok=ok,
    )


def _row_job(args):
    return sweep_row(*args)


def sweep(shape: MultiTtmShape, P_list: Sequence[int], jobs: int = 1) -> list[SweepRow]:
    """Rows ordered as ``P_list`` regardless of how they were computed."""
    require_canonical(shape)
    limit = p_max(shape)
    for P in P_list:
        if P > limit:
            raise ValueError(f"P={P} exceeds p_max={limit} for {shape}")
    if jobs > 1 and len(P_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_row_job, [(shape, P) for P in P_list]))
    return [sweep_row(shape, P) for P in P_list]


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row.csv_values()])
    return buf.getvalue()


def git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def rows_to_json(rows: Sequence[SweepRow], shape: MultiTtmShape, extra: dict | None = None) -> str:
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    meta = {"shape": shape.to_dict(), "version": __version__, "git": git_hash()}
    if extra:
        meta.update(extra)
    body = [{k: clean(v) for k, v in asdict(r).items()} for r in rows]
    return json.dumps({"metadata": meta, "rows": body}, indent=2)


def column_names() -> list[str]:
    return [f.name for f in fields(SweepRow)]
