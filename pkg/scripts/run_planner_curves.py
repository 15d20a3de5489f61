#!/usr/bin/env python3
"""Planner weight-curve demo: compile three overlapping sketch variants and
print per-line weights plus the crossover line of each plan.

    python scripts/run_planner_curves.py --sigma 1.0
"""

from __future__ import annotations

import argparse
import sys

from plugblend.planning import SketchSet, compile_plan, crossover_index


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--n-lines", type=int, default=10)
    parser.add_argument("--variance-mode", choices=["literal", "proportional"], default="literal")
    args = parser.parse_args()

    for science_start in (4, 5, 6):
        sketch_set = SketchSet.from_jsonable(
            {
                "n_lines": args.n_lines,
                "sigma": args.sigma,
                "variance_mode": args.variance_mode,
                "sketches": [
                    {"code": "Sports", "start": 0, "end": 5},
                    {"code": "Science", "start": science_start, "end": args.n_lines},
                ],
            }
        )
        plan = compile_plan(sketch_set)
        crossover = crossover_index(plan, "Sports", "Science")
        print(f"\nScience starting at line {science_start} (crossover at {crossover}):")
        print(f"{'line':>4}  {'Sports':>12}  {'Science':>12}")
        for n in range(plan.n_lines):
            print(
                f"{n:>4}  {plan.curves['Sports'][n]:12.6f}  {plan.curves['Science'][n]:12.6f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
