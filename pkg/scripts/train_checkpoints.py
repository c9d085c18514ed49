#!/usr/bin/env python3
"""Train the static- and dynamic-channel scheduler checkpoints.

Runs the two training presets from configs/ and writes checkpoints, meta
sidecars, and training logs under the output directory. Run from the
repository root:

    python3 scripts/train_checkpoints.py
    python3 scripts/train_checkpoints.py --only static --epochs 100000
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from slsched.harness import load_spec, run_training

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--configs-dir", default=str(REPO / "configs"), help="preset directory"
    )
    parser.add_argument(
        "--only",
        choices=["static", "dynamic"],
        default=None,
        help="train just one of the two checkpoints",
    )
    parser.add_argument(
        "--epochs", type=int, default=None, help="override train_epochs from the preset"
    )
    parser.add_argument("--seed", type=int, default=None, help="override the training seed")
    args = parser.parse_args()

    names = [args.only] if args.only else ["static", "dynamic"]
    for name in names:
        spec = load_spec(Path(args.configs_dir) / f"train_{name}.json")
        if args.epochs is not None:
            spec = replace(spec, train_epochs=args.epochs)
        if args.seed is not None:
            spec = replace(spec, seeds=(args.seed,))
        Path(spec.output_path).parent.mkdir(parents=True, exist_ok=True)
        print(f"training {name} agent: {spec.train_epochs} epochs ...", flush=True)
        result = run_training(spec)
        print(
            f"  wrote {result.checkpoint_path} (meta {result.meta_path}, "
            f"log {result.log_path}, final epsilon {result.final_epsilon:.3f})"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
