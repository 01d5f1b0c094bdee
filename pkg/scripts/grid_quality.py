"""Random-shape study of the constructed grids.

For random canonical power-of-two shapes, reports how far the real-valued
grid, its power-of-two rounding and the exhaustive best grid sit above the
lower bound, and which adjustment stages fired.

    python scripts/grid_quality.py --samples 2000 --seed 0
"""

import argparse
from collections import Counter

import numpy as np

from multittm.bounds import multi_ttm_lb
from multittm.costs import alg_comm_cost
from multittm.gridsel import exhaustive_best_grid, round_grid_pow2, select_grid_real
from multittm.problem import MultiTtmShape, canonicalize, p_max


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-d", type=int, default=5)
    ap.add_argument("--max-exp", type=int, default=10)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    ratios = {"real": [], "rounded": [], "best": []}
    stages = Counter()
    rounded_worse = 0
    for _ in range(args.samples):
        d = int(rng.integers(2, args.max_d + 1))
        n = tuple(int(2 ** rng.integers(1, args.max_exp + 1)) for _ in range(d))
        r = tuple(int(2 ** rng.integers(1, args.max_exp + 1)) for _ in range(d))
        shape, _ = canonicalize(MultiTtmShape(n, r))
        P = int(2 ** rng.integers(1, p_max(shape).bit_length()))
        lb = multi_ttm_lb(shape, P).lb
        if lb <= 0:
            continue
        choice = select_grid_real(shape, P)
        stages.update(choice.fired)
        rounded = alg_comm_cost(shape, round_grid_pow2(choice, shape, P)).total_bandwidth
        _, best = exhaustive_best_grid(shape, P)
        ratios["real"].append(alg_comm_cost(shape, choice.grid).total_bandwidth / lb)
        ratios["rounded"].append(rounded / lb)
        ratios["best"].append(float(best) / lb)
        rounded_worse += rounded > float(best) * (1 + 1e-12)

    for name, vals in ratios.items():
        v = np.array(vals)
        print(f"{name:>8}: cost/lb median {np.median(v):.3f}  p99 {np.quantile(v, 0.99):.3f}  max {v.max():.3f}")
    print(f"rounded grid strictly worse than best in {rounded_worse}/{len(ratios['best'])} cases")
    print("adjustment stages fired:", dict(stages) or "none")


if __name__ == "__main__":
    main()
