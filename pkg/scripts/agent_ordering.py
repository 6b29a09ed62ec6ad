#!/usr/bin/env python3
# Usage:
#   python scripts/agent_ordering.py --seeds 12 --slots 15000 --out results
#
# Runs the cloud-trained DQN, the local tabular learner, and the load-estimate
# baseline on identical seeds and traffic, then prints the eval-reward ranking
# with paired significance. Full artifacts (per-seed CSVs, compare_report.json)
# land under --out.

import argparse

from greenrl.config import config_from_dict
from greenrl.runner import compare_agents


def build_configs(args):
    seeds = list(range(args.seeds))
    shared = {
        "scenario": "rach",
        "seeds": seeds,
        "total_slots": args.slots,
        "eval_slots": args.eval_slots,
        "out_dir": args.out,
        "rach": {"traffic_p": 0.08},
    }
    dqn = dict(
        shared,
        name="rach-dqn",
        agent="dqn",
        cloud={
            "inner_steps": 2,
            "lr": 0.001,
            "batch_size": 128,
            "target_sync_every": 100,
            "eps_decay_steps": 2500,
            "replay_capacity": 8000,
        },
    )
    laq = dict(
        shared,
        name="rach-la-q",
        agent="la-q",
        cloud={"inner_steps": 2},
        agent_params={"eps_decay_steps": 6000},
    )
    leurc = dict(shared, name="rach-le-urc", agent="le-urc", cloud={"inner_steps": 2})
    return [config_from_dict(d) for d in (dqn, laq, leurc)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--slots", type=int, default=15000)
    ap.add_argument("--eval-slots", type=int, default=3000)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    report = compare_agents(build_configs(args))
    print(f"report: {report['out_dir']}")
    print("ranking by eval reward:")
    for name in report["ranking"]:
        entry = report["agents"][name]
        lo, hi = entry["ci95"]
        print(f"  {name:12s} mean={entry['mean']:.4f} ci95=[{lo:.4f}, {hi:.4f}]")
    print("pairwise one-sided p-values:")
    for pair, res in report["pairwise"].items():
        print(f"  {pair:28s} diff={res['mean_diff']:+.4f} p={res['p_one_sided']}")


if __name__ == "__main__":
    main()
