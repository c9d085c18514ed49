#!/usr/bin/env python3
"""Compare agents trained under static versus per-packet channel variation.

Each checkpoint is evaluated under its own training condition across the
budget sweep; the CSV carries the paired static-minus-dynamic blocking
difference. Needs both checkpoints from scripts/train_checkpoints.py.
Run from the repository root:

    python3 scripts/channel_mode_comparison.py
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from slsched.harness import load_spec, run_channel_mode_comparison

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--configs-dir", default=str(REPO / "configs"), help="preset directory"
    )
    args = parser.parse_args()

    spec = load_spec(Path(args.configs_dir) / "compare_channel.json")
    Path(spec.output_path).parent.mkdir(parents=True, exist_ok=True)
    rows = run_channel_mode_comparison(spec)
    print(f"wrote {spec.output_path}\n")
    print(f"{'budget':>8} {'static':>9} {'dynamic':>9} {'static-dynamic':>15}")
    means = [row for row in rows if row.seed == "mean"]
    for static_row, dynamic_row in zip(means[::2], means[1::2]):
        print(
            f"{static_row.licensed_bps / 1e6:>7.0f}M "
            f"{static_row.blocking_prob:>9.4f} "
            f"{dynamic_row.blocking_prob:>9.4f} "
            f"{static_row.blocking_diff_static_minus_dynamic:>15.4f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
