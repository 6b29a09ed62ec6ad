#!/usr/bin/env python3
# Usage:
#   python scripts/compression_savings.py --seeds 3 --out results
#
# Trains a dense session and a pruned/quantized one per seed, then prints the
# ledger ratios (compressed over dense) and the reward left at each sparsity
# level probed on the dense final network.

import argparse
import csv
import os
from collections import defaultdict

from greenrl.config import config_from_dict
from greenrl.runner import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--slots", type=int, default=2000)
    ap.add_argument("--prune-quantile", type=float, default=0.5)
    ap.add_argument("--quant-bits", type=int, default=8)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    cfg = config_from_dict(
        {
            "name": "compression-savings",
            "scenario": "compression",
            "agent": "dqn",
            "seeds": list(range(args.seeds)),
            "total_slots": args.slots,
            "out_dir": args.out,
            "cloud": {"batch_fp16": True, "eps_decay_steps": 200},
            "compression": {
                "prune_quantile": args.prune_quantile,
                "quant_bits": args.quant_bits,
            },
        }
    )
    summary = run_experiment(cfg)
    print(f"run: {summary['run_dir']}")
    for row in summary["per_seed"]:
        ratios = " ".join(f"{k}={v:.3f}" for k, v in row["ledger_ratios"].items())
        print(
            f"seed {row['seed']}: reward dense={row['dense_terminal_reward']:.3f} "
            f"compressed={row['compressed_terminal_reward']:.3f}  {ratios}"
        )

    by_level = defaultdict(list)
    with open(os.path.join(summary["run_dir"], "sparsity_reward.csv")) as fh:
        for row in csv.DictReader(fh):
            by_level[float(row["sparsity_target"])].append(float(row["reward"]))
    print("reward by pruned fraction of the dense net:")
    for level in sorted(by_level):
        vals = by_level[level]
        print(f"  {int(level * 100):3d}%: {sum(vals) / len(vals):.4f}")


if __name__ == "__main__":
    main()
