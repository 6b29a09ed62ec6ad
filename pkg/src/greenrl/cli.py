"""Command-line entry points.

    greenrl run <config.json>
    greenrl compare <configA.json> <configB.json> [...]
    greenrl sweep <config.json> --param cloud.inner_steps --values 1,8,64

Exit codes: 0 success, 1 runtime failure, 2 configuration error.  The output
root comes from each config's ``out_dir``, else the GREENRL_OUTPUT_ROOT
environment variable, else ./results.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import ConfigError, GreenRLError
from .runner import compare_agents, run_experiment, sweep


def _parse_values(raw: str) -> list:
    values = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError:
            values.append(token)
    if not values:
        raise ConfigError("--values must list at least one value")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")

    p_cmp = sub.add_parser("compare", help="run several configs on one scenario and rank agents")
    p_cmp.add_argument("configs", nargs="+")

    p_sweep = sub.add_parser("sweep", help="re-run one config across values of one field")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="dotted field path, e.g. cloud.inner_steps")
    p_sweep.add_argument("--values", required=True, help="comma-separated JSON scalars")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            result = run_experiment(load_config(args.config))
            print(f"run complete: {result['run_dir']}")
            if "terminal_reward_mean" in result:
                print(f"terminal reward mean: {result['terminal_reward_mean']:.4f}")
        elif args.command == "compare":
            report = compare_agents([load_config(p) for p in args.configs])
            print(f"comparison written: {report['out_dir']}")
            for name in report["ranking"]:
                entry = report["agents"][name]
                print(f"  {name}: {entry['mean']:.4f} (agent={entry['agent']})")
        elif args.command == "sweep":
            report = sweep(load_config(args.config), args.param, _parse_values(args.values))
            print(f"sweep written: {report['out_dir']}")
            for row in report["rows"]:
                print(
                    f"  {args.param}={row['value']}: reward={row['terminal_reward_mean']:.4f}"
                    f" bytes={row['bytes_total_mean']:.0f}"
                )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GreenRLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
