#!/usr/bin/env python3
"""Blocking probability versus licensed budget for all three policies.

Needs out/ddqn_static.ckpt (see scripts/train_checkpoints.py). Writes one
CSV per policy under out/ and prints the per-budget mean blocking table.
Run from the repository root:

    python3 scripts/blocking_sweep.py
    python3 scripts/blocking_sweep.py --policies ddqn threshold
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from slsched.harness import load_spec, run_sweep

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--configs-dir", default=str(REPO / "configs"), help="preset directory"
    )
    parser.add_argument(
        "--policies",
        nargs="+",
        choices=["ddqn", "threshold", "random"],
        default=["ddqn", "threshold", "random"],
    )
    args = parser.parse_args()

    table = {}
    budgets = None
    for policy in args.policies:
        spec = load_spec(Path(args.configs_dir) / f"sweep_{policy}.json")
        Path(spec.output_path).parent.mkdir(parents=True, exist_ok=True)
        rows = run_sweep(spec)
        means = [
            (row.licensed_bps, row.blocking_prob, row.mean_throughput_bps)
            for row in rows
            if row.seed == "mean"
        ]
        budgets = [b for b, _, _ in means]
        table[policy] = means
        print(f"wrote {spec.output_path}", flush=True)

    header = "policy     " + "".join(f"{b / 1e6:>10.0f}M" for b in budgets)
    print("\nmean blocking probability")
    print(header)
    for policy, means in table.items():
        print(f"{policy:<11}" + "".join(f"{p:>11.4f}" for _, p, _ in means))
    print("\nmean throughput (Mbit/s)")
    print(header)
    for policy, means in table.items():
        print(f"{policy:<11}" + "".join(f"{t / 1e6:>11.1f}" for _, _, t in means))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
