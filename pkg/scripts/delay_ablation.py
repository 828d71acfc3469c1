#!/usr/bin/env python3
"""Communication-delay grid: the overlap advantage as the window grows.

At zero delay the three sparse methods coincide exactly, so only positive
delays are informative.
"""

import argparse
import collections

import numpy as np

from overlap_sgd.config import validate_config
from overlap_sgd.runner import run_suite

DELAYS = (12, 48)
METHODS = ("local_sparse", "overlap_overwrite", "overlap_delay_corrected")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/delay-ablation")
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    args = parser.parse_args()

    for delay in DELAYS:
        raw = {
            "name": f"delay-{delay}",
            "dataset": {"synthetic": {"dim": 100, "n_examples": 8000, "separation": 2.0, "seed": 7}},
            "normalize": True,
            "val_fraction": 0.1,
            "partition": {"mode": "shared"},
            "step_times": [1, 2, 3, 6],
            "compute_periods": 3,
            "comm_seconds": delay,
            "methods": list(METHODS),
            "stepsize": 0.1,
            "batch_size": 256,
            "sparsity": 0.3,
            "rounds": 20,
            "seeds": list(args.seeds),
            "output_dir": f"{args.out}/zeta{delay}",
        }
        config, issues = validate_config(raw)
        if issues:
            raise SystemExit("\n".join(str(i) for i in issues))
        result = run_suite(config)
        losses = collections.defaultdict(list)
        for run in result.runs:
            losses[run.method].append(run.records[-1].train_loss)
        print(f"\ncommunication window {delay}s:")
        for method in METHODS:
            print(f"  {method:26s} mean final train loss {np.mean(losses[method]):.6f}")


if __name__ == "__main__":
    main()
