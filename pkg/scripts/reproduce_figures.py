"""Write one CSV per built-in experiment and print its summary line.

    python scripts/reproduce_figures.py --out results/ [--figures 5a 7c] [--jobs 4]
"""

import argparse
import sys
import time
from pathlib import Path

from multittm.figures import FIGURES, run_figure, summarize, summary_line, validate_rows
from multittm.sweep import rows_to_csv


def write_csv(path: Path, rows, fixed_p: bool) -> None:
    text = rows_to_csv([r for _, r in rows])
    if fixed_p:
        lines = text.splitlines()
        lines = ["n_i," + lines[0]] + [f"{ni},{ln}" for (ni, _), ln in zip(rows, lines[1:])]
        text = "\n".join(lines) + "\n"
    path.write_text(text)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--figures", nargs="*", default=list(FIGURES))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for fid in args.figures:
        spec = FIGURES[fid]
        t0 = time.perf_counter()
        rows = run_figure(spec, jobs=args.jobs)
        write_csv(out / f"fig{fid}.csv", rows, spec.kind == "fixed-P")
        problems = validate_rows(rows)
        failures += bool(problems)
        status = "ok" if not problems else "INVARIANT FAILURE: " + "; ".join(problems)
        print(f"{fid:>3} [{time.perf_counter() - t0:5.2f}s] {summary_line(spec, summarize(spec, rows))} {status}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
