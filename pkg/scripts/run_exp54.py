#!/usr/bin/env python3
"""Run the three-part blending/offset/eccentric comparison.

Part A sweeps velar blending strength with equal stiffness and no eccentric
delay: the detected lag contrast stays flat while TB retraction grows with
the weight, so blending strength alone cannot produce the observed lag.
Part B couples the palatal gesture to the labial offset instead: the lag then
tracks first-gesture duration and the run classifies as SEQUENCE.
Part C is the default eccentric-delay scenario: flat slope, positive lag
contrast, COMPLEX classification for both onset-coupled conditions.
"""

import argparse
import json
import sys

from gestkin.harness import ScenarioConfig, experiment_54


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="exp54_out")
    ap.add_argument("--parts", default="ABC")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-perm", type=int, default=10000)
    args = ap.parse_args()

    config = ScenarioConfig(seed=args.seed)
    report = experiment_54(
        config, args.out, parts=tuple(args.parts), n_perm=args.n_perm
    )
    print(json.dumps({k: report[k] for k in args.parts if k in report}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
