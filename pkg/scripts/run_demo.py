#!/usr/bin/env python3
"""Run the default four-speaker scenario end to end and emit figures."""

import argparse
import sys

from gestkin.harness import ScenarioConfig, run_scenario
from gestkin.plots import emit_plots


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-perm", type=int, default=10000)
    args = ap.parse_args()

    config = ScenarioConfig(seed=args.seed)
    report = run_scenario(config, args.out, n_perm=args.n_perm)
    analysis = report["analysis"]
    for cond, cls in analysis["classification"].items():
        print(f"{cond}: {cls['label']}")
    figures = emit_plots(report["files"]["tokens"], f"{args.out}/figures")
    for name, path in figures.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
