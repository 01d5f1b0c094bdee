"""Command-line driver.

Exit status: 0 on success, 2 on invalid input, 1 when an internal invariant
check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import LoadBalanceError, multi_ttm_lb
from .costs import alg_comm_cost, comp_overhead, ttm_seq_comm_cost
from .figures import FIGURES, load_override, run_figure, summarize, summary_line, validate_rows
from .gridsel import (GridInvariantError, GridSearchError, exhaustive_best_grid, round_grid_pow2,
                      select_grid_real, three_x_check)
from .optsolve import CertificateInvalidError, InfeasibleDivisorError
from .problem import (InvalidGridError, InvalidShapeError, MultiTtmShape, canonicalize, is_pow2,
                      load_shape_config, parse_grid, parse_int, parse_int_list, parse_p_range)
from .sim import DimensionMismatchError, simulate_and_verify
from .sweep import rows_to_csv, rows_to_json, sweep

INPUT_ERRORS = (InvalidShapeError, InvalidGridError, LoadBalanceError, InfeasibleDivisorError,
                DimensionMismatchError, GridSearchError, ValueError, FileNotFoundError, KeyError)
INVARIANT_ERRORS = (GridInvariantError, CertificateInvalidError, AssertionError)


class InvariantFailure(RuntimeError):
    pass


def _shape_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", help="input dims, e.g. 4,8,64 or 2^12,2^12,2^12")
    sp.add_argument("--r", help="output dims")
    sp.add_argument("--config", help="INI file with a [shape] section holding n and r")


def _shape(args) -> MultiTtmShape:
    if args.config:
        shape, _ = load_shape_config(args.config)
        return shape
    if not (args.n and args.r):
        raise ValueError("give --n and --r, or --config")
    return MultiTtmShape(parse_int_list(args.n), parse_int_list(args.r))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_lb(args) -> int:
    shape, _ = canonicalize(_shape(args))
    P = parse_int(args.P)
    b = multi_ttm_lb(shape, P)
    print(f"shape {shape} P={P}")
    print(f"A={b.A!r} B={b.B!r} owned={b.owned!r} lb={b.lb!r}")
    print(f"case_A={b.case_A} case_B={b.case_B} lb_matrix={b.lb_matrix!r} lb_tensor={b.lb_tensor!r}")
    return 0


def cmd_grid(args) -> int:
    raw = _shape(args)
    shape, cmap = canonicalize(raw)
    P = parse_int(args.P)
    lb = multi_ttm_lb(shape, P).lb
    choice = select_grid_real(shape, P)
    ok, cost, _ = three_x_check(shape, choice.grid)
    print(f"shape {shape} P={P} lb={lb:.6g}")
    print(f"real   {cmap.to_original_grid(choice.grid)} cost={cost:.6g} scenario={choice.scenario} "
          f"case={choice.case_index} adjustments={','.join(choice.fired) or 'none'}")
    if shape.is_power_of_two() and is_pow2(P):
        fg = round_grid_pow2(choice, shape, P)
        print(f"fast   {cmap.to_original_grid(fg)} cost={alg_comm_cost(shape, fg).total_bandwidth:.6g}")
    bg, bc = exhaustive_best_grid(shape, P)
    print(f"best   {cmap.to_original_grid(bg)} cost={float(bc):.6g}")
    print(f"3xLB check: {'pass' if ok else 'FAIL'}")
    if not ok:
        raise InvariantFailure("constructed grid exceeds 3x the lower bound")
    return 0


def cmd_cost(args) -> int:
    shape = _shape(args)
    if args.grid:
        grid = parse_grid(args.grid)
        c = alg_comm_cost(shape, grid)
        print(f"grid {grid} P={grid.P}")
        print(f"tensor_in={c.tensor_in:.6g} tensor_out={c.tensor_out:.6g} "
              f"matrix={','.join(f'{m:.6g}' for m in c.matrix_terms)} owned={c.owned:.6g}")
        print(f"total_bandwidth={c.total_bandwidth:.6g} latency={c.latency:.6g} flops={c.flops:.6g} "
              f"overhead_pct={comp_overhead(shape, grid):.4g}" + (" ceil_blocks=true" if c.ceil_blocks else ""))
    if args.tilde:
        tilde = parse_int_list(args.tilde)
        s = ttm_seq_comm_cost(shape, tilde)
        print(f"ttmseq p~={','.join(map(str, tilde))} total={s.total:.6g} "
              f"tensor={s.tensor_part:.6g} matrix={s.matrix_part:.6g}")
    if not (args.grid or args.tilde):
        raise ValueError("give --grid and/or --tilde")
    return 0


def cmd_simulate(args) -> int:
    shape = _shape(args)
    grid = parse_grid(args.grid)
    res, ok = simulate_and_verify(shape, grid, seed=args.seed)
    words = set(res.per_rank_words)
    wtxt = str(words.pop()) if len(words) == 1 else f"max:{res.critical_path_words}"
    print(f"words_per_rank={wtxt} verified={'true' if ok else 'false'}")
    if args.trace:
        Path(args.trace).write_text("kind,group,Q,words_per_rank\n" + res.trace() + "\n")
    if not ok:
        raise InvariantFailure("simulated output differs from the oracle")
    return 0


def cmd_sweep(args) -> int:
    shape, _ = canonicalize(_shape(args))
    rows = sweep(shape, parse_p_range(args.P), jobs=args.jobs)
    text = rows_to_json(rows, shape) if args.format == "json" else rows_to_csv(rows)
    _emit(text, args.out)
    return 0


def cmd_repro(args) -> int:
    if args.figure not in FIGURES:
        raise ValueError(f"unknown figure {args.figure!r}; known: {', '.join(FIGURES)}")
    spec = FIGURES[args.figure]
    if args.override:
        spec = load_override(spec, args.override)
    rows = run_figure(spec, jobs=args.jobs)
    stats = summarize(spec, rows)
    if args.format == "json":
        body = json.loads(rows_to_json([r for _, r in rows], spec.shape or MultiTtmShape((2, 2), (2, 2)),
                                       {"figure": spec.fid}))
        if spec.kind == "fixed-P":
            for item, (ni, _) in zip(body["rows"], rows):
                item["n_i"] = ni
        text = json.dumps(body, indent=2)
    else:
        text = rows_to_csv([r for _, r in rows])
        if spec.kind == "fixed-P":
            lines = text.splitlines()
            lines = ["n_i," + lines[0]] + [f"{ni},{ln}" for (ni, _), ln in zip(rows, lines[1:])]
            text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    print(f"summary {spec.fid}: {summary_line(spec, stats)}", file=sys.stderr if not args.out else sys.stdout)
    problems = validate_rows(rows)
    if problems:
        raise InvariantFailure("; ".join(problems))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multittm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("lb", help="communication lower bound")
    _shape_args(sp)
    sp.add_argument("--P", required=True)
    sp.set_defaults(func=cmd_lb)

    sp = sub.add_parser("grid", help="real, rounded and exhaustive grids")
    _shape_args(sp)
    sp.add_argument("--P", required=True)
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("cost", help="cost of a given grid")
    _shape_args(sp)
    sp.add_argument("--grid", help='e.g. "p=2,2,2;q=1,1,1"')
    sp.add_argument("--tilde", help="TTM-in-sequence grid, e.g. 1,1,8")
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("simulate", help="run the simulator on random data")
    _shape_args(sp)
    sp.add_argument("--grid", required=True)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--trace", help="write one line per collective to this file")
    sp.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("sweep", cmd_sweep, "sweep over processor counts"),
                              ("repro", cmd_repro, "reproduce a built-in experiment")):
        sp = sub.add_parser(name, help=help_)
        if name == "sweep":
            _shape_args(sp)
            sp.add_argument("--P", required=True, help="list or range such as 2^1..2^12")
        else:
            sp.add_argument("figure", help=", ".join(FIGURES))
            sp.add_argument("--override", help="INI file with an [experiment] section (n, r, P)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out")
        sp.add_argument("--jobs", type=int, default=1)
        sp.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except INVARIANT_ERRORS + (InvariantFailure,) as e:
        print(f"invariant failure: {e}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
