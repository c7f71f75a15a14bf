"""Command-line driver.

Commands: train-online, sweep, gen-dataset, train-offline, eval-ips,
eval-rollout. Shared flags: --config PATH, --seed N (repeatable),
--out DIR, --override key=value (dotted keys, repeatable).

Exit codes: 0 success, 2 config error, 3 feasibility refusal, 4 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys

from . import pipelines
from .config import load_config
from .errors import ConfigError, FeasibilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FEASIBILITY = 3
EXIT_RUNTIME = 4

COMMANDS = {
    "train-online": pipelines.run_train_online,
    "sweep": pipelines.run_sweep,
    "gen-dataset": pipelines.run_gen_dataset,
    "train-offline": pipelines.run_train_offline,
    "eval-ips": pipelines.run_eval_ips,
    "eval-rollout": pipelines.run_eval_rollout,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopmarl",
        description="Cooperative multi-agent RL training and evaluation pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="random seed (repeatable)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--override", action="append", default=None, metavar="KEY=VALUE",
                       help="dotted config override, e.g. agent.kind=maddpg")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, cli_overrides=args.override,
                          seeds=args.seed, out=args.out)
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = COMMANDS[args.command](cfg)
    except FeasibilityError as e:
        print(f"feasibility refusal: {e}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # runtime failure: surface, do not mask
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote outputs to {result['out']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
