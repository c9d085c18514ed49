"""Command line front end.

Subcommands map one-to-one onto the runner functions in harness.py. The
subcommand decides the run mode; the JSON config supplies everything else,
with --seed and --out as narrow overrides so a single config can be reused
across seeds and output locations. Exit codes: 0 success, 2 configuration
error, 3 file I/O error, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import replace

from .env import ConfigError
from .harness import (
    EventDump,
    run_channel_mode_comparison,
    run_queue_validation,
    run_sweep,
    run_training,
    spec_from_dict,
)

_RUN_MODES = ("train", "evaluate", "sweep", "compare-channel", "validate-queue")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slsched",
        description="Train and evaluate sidelink band-allocation schedulers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "train": "train a DDQN scheduler and write a checkpoint",
        "evaluate": "evaluate one policy at the config's licensed budget",
        "sweep": "evaluate one policy across licensed-budget points",
        "compare-channel": "evaluate static- and dynamic-channel checkpoints side by side",
        "validate-queue": "check the queue simulator against the M/M/1/K closed form",
    }
    for command in _RUN_MODES:
        cmd = sub.add_parser(command, help=helps[command])
        cmd.add_argument("--config", required=True, help="path to a JSON experiment spec")
        cmd.add_argument("--seed", type=int, default=None,
                         help="replace the config's seed list with this one seed")
        cmd.add_argument("--out", default=None,
                         help="override the config's output_path")
        if command != "validate-queue":
            cmd.add_argument("--dump-events", default=None, metavar="PATH",
                             help="also write raw per-epoch records as JSON lines")
    return parser


def _load_for_command(path: str, command: str):
    """Parse a JSON spec with the subcommand as its mode.

    The mode is fixed before validation so a config written for one
    subcommand (say train, which needs no checkpoint) is not judged by
    another mode's requirements.
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as bad:
            raise ConfigError(f"config is not valid JSON: {bad}") from None
    if not isinstance(data, dict):
        raise ConfigError("experiment spec must be a JSON object")
    data = dict(data)
    data["mode"] = command
    return spec_from_dict(data)


def _dispatch(args: argparse.Namespace) -> None:
    spec = _load_for_command(args.config, args.command)
    if args.seed is not None:
        spec = replace(spec, seeds=(args.seed,))
    if args.out is not None:
        spec = replace(spec, output_path=args.out)
    spec.validate()

    dump_path = getattr(args, "dump_events", None)
    dump = EventDump(dump_path) if dump_path is not None else None
    try:
        if args.command == "train":
            result = run_training(spec, dump)
            print(
                f"trained {result.steps} epochs -> {result.checkpoint_path} "
                f"(meta {result.meta_path}, log {result.log_path})"
            )
        elif args.command in ("evaluate", "sweep"):
            rows = run_sweep(spec, dump)
            print(f"wrote {spec.output_path} ({len(rows)} rows)")
        elif args.command == "compare-channel":
            rows = run_channel_mode_comparison(spec, dump)
            print(f"wrote {spec.output_path} ({len(rows)} rows)")
        else:
            rows = run_queue_validation(spec)
            worst = max(abs(row.z_score) for row in rows)
            print(f"wrote {spec.output_path} ({len(rows)} rows, max |z| = {worst:.2f})")
    finally:
        if dump is not None:
            dump.close()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _dispatch(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
