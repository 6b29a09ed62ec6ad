#!/usr/bin/env python3
# Usage:
#   python scripts/transfer_speedup.py --seeds 12 --out results
#
# Two base stations learn on overlapping cells of one traffic field. Each seed
# runs once with cross-station weight transfer and once without; the script
# prints rounds-to-threshold medians, the measured demand correlation, and the
# paired test for terminal-reward degradation.

import argparse

from greenrl.config import config_from_dict
from greenrl.runner import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--slots", type=int, default=1600)
    ap.add_argument("--threshold", type=float, default=9.0)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    cfg = config_from_dict(
        {
            "name": "transfer-speedup",
            "scenario": "transfer",
            "agent": "dqn",
            "seeds": list(range(args.seeds)),
            "total_slots": args.slots,
            "reward_threshold": args.threshold,
            "threshold_window": 25,
            "out_dir": args.out,
            "cloud": {
                "inner_steps": 4,
                "lr": 0.0025,
                "batch_size": 128,
                "target_sync_every": 100,
                "eps_decay_steps": 250,
                "replay_capacity": 3000,
            },
        }
    )
    summary = run_experiment(cfg)
    rtt = summary["rounds_to_threshold"]
    term = summary["terminal_reward"]
    print(f"run: {summary['run_dir']}")
    print(f"demand correlation between stations: {summary['estimated_correlation_mean']:.4f}")
    print(
        f"rounds to threshold: transfer median={rtt['transfer_median']} "
        f"baseline median={rtt['baseline_median']} (mean {rtt['transfer_mean']:.1f} "
        f"vs {rtt['baseline_mean']:.1f})"
    )
    print(
        f"terminal reward: transfer={term['transfer_mean']:.4f} "
        f"baseline={term['baseline_mean']:.4f} p(drop)={term['p_transfer_drop']} "
        f"effect d={term['effect_size_d']:.3f}"
    )


if __name__ == "__main__":
    main()
