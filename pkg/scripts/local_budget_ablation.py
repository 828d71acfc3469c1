#!/usr/bin/env python3
"""Local-compute-budget grid: how the compute window affects progress per
unit logical time for each sparse method."""

import argparse
import collections

import numpy as np

from overlap_sgd.config import validate_config
from overlap_sgd.runner import run_suite

BUDGETS = (1, 4, 16, 64)
METHODS = ("local_sparse", "overlap_overwrite", "overlap_delay_corrected")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/local-budget-ablation")
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    args = parser.parse_args()

    rows = collections.defaultdict(dict)
    for budget in BUDGETS:
        raw = {
            "name": f"budget-{budget}",
            "dataset": {"synthetic": {"dim": 100, "n_examples": 8000, "separation": 2.0, "seed": 7}},
            "normalize": True,
            "val_fraction": 0.1,
            "partition": {"mode": "shared"},
            "step_times": [1, 2, 3, 6],
            "compute_periods": budget,
            "comm_seconds": 6,
            "methods": list(METHODS),
            "stepsize": 0.1,
            "batch_size": 256,
            "sparsity": 0.3,
            "rounds": 20,
            "seeds": list(args.seeds),
            "output_dir": f"{args.out}/M{budget}",
        }
        config, issues = validate_config(raw)
        if issues:
            raise SystemExit("\n".join(str(i) for i in issues))
        result = run_suite(config)
        losses = collections.defaultdict(list)
        elapsed = {}
        for run in result.runs:
            losses[run.method].append(run.records[-1].train_loss)
            elapsed[run.method] = run.records[-1].logical_time
        for method in METHODS:
            rows[method][budget] = (np.mean(losses[method]), elapsed[method])

    print("\nfinal mean train loss after 20 rounds (logical seconds elapsed):")
    print("method".ljust(26) + "".join(f"M={b}".rjust(20) for b in BUDGETS))
    for method in METHODS:
        cells = "".join(f"{rows[method][b][0]:.4f} ({rows[method][b][1]}s)".rjust(20) for b in BUDGETS)
        print(method.ljust(26) + cells)


if __name__ == "__main__":
    main()
