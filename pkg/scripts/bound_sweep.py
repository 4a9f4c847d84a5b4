"""Selection cost against the worst-case bound on random time matrices.

For each alpha, draws random configuration-by-query time matrices, runs
configuration selection in the simulator and reports how often the argmin was
found and how the total trial time compares with k * alpha * C_best.

    python3 scripts/bound_sweep.py --trials 300 --alphas 2 4 10
"""

from __future__ import annotations

import argparse
import math
import random
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from helpers import matrix_scenario, plain_configs, plain_workload, random_times  # noqa: E402
from lttune.executor import SimExecutor  # noqa: E402
from lttune.selector import config_select  # noqa: E402


def trial(times, alpha, t0):
    ex = SimExecutor(matrix_scenario(times))
    best = config_select(plain_workload(len(times[0])), plain_configs(len(times)), t0, alpha, ex)
    sums = [math.fsum(r) for r in times]
    c_best = min(sums)
    return sums[best.config.id] == c_best, ex.clock.query_time / (len(times) * alpha * c_best)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--alphas", type=float, nargs="+", default=[2.0, 4.0, 10.0])
    ap.add_argument("--t0", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"{'alpha':>6} {'argmin':>8} {'ratio_mean':>11} {'ratio_p95':>10} {'ratio_max':>10}")
    for alpha in args.alphas:
        rng = random.Random(args.seed)
        hits, ratios = 0, []
        for _ in range(args.trials):
            ok, ratio = trial(random_times(rng), alpha, args.t0)
            hits += ok
            ratios.append(ratio)
        ratios.sort()
        p95 = ratios[int(0.95 * (len(ratios) - 1))]
        print(f"{alpha:>6g} {hits / args.trials:>8.1%} {statistics.fmean(ratios):>11.3f} "
              f"{p95:>10.3f} {ratios[-1]:>10.3f}")


if __name__ == "__main__":
    main()
