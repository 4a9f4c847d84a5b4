"""Covered join value and token use of the compressed workload across token budgets.

"charged" is what the solver counts against the budget; "text" is the
tokenizer run on the rendered output.

    python3 scripts/budget_sweep.py data/job_sample --budgets 0 25 50 100 196 400 2000
"""

from __future__ import annotations

import argparse
import time

from lttune.compressor import compress, render_compressed
from lttune.workload import UniformCostProvider, load_workload, pair_values, token_cost


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("workload")
    ap.add_argument("--budgets", type=int, nargs="+", default=[0, 25, 50, 100, 196, 400, 2000])
    args = ap.parse_args(argv)

    values = pair_values(load_workload(args.workload), UniformCostProvider())
    total = sum(values.values())
    print(f"{len(values)} join pairs, total value {total:g}")
    print(f"{'budget':>7} {'charged':>8} {'text':>6} {'lines':>6} {'value':>8} {'share':>6} {'solve_s':>8}")
    for b in args.budgets:
        start = time.perf_counter()
        sel = compress(values, b)
        elapsed = time.perf_counter() - start
        text = render_compressed(sel)
        lines = len(text.splitlines())
        share = sel.objective / total if total else 0.0
        print(f"{b:>7} {sel.tokens_used:>8} {token_cost(text):>6} {lines:>6} {sel.objective:>8g} {share:>6.1%} {elapsed:>8.2f}")


if __name__ == "__main__":
    main()
