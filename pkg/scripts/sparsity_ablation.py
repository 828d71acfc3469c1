#!/usr/bin/env python3
"""Sparsity grid: final loss and cumulative bits per communicated fraction.

Each sparse method is rerun at every sparsity level with everything else
held fixed, so the bit axis shifts while the loss trajectory changes only
mildly.
"""

import argparse
import collections

import numpy as np

from overlap_sgd.config import validate_config
from overlap_sgd.runner import run_suite

LEVELS = (0.001, 0.01, 0.1, 1.0)
METHODS = ("local_sparse", "overlap_overwrite", "overlap_delay_corrected")


def run_level(sparsity: float, out_root: str, seeds):
    raw = {
        "name": f"sparsity-{sparsity}",
        "dataset": {"synthetic": {"dim": 100, "n_examples": 8000, "separation": 2.0, "seed": 7}},
        "normalize": True,
        "val_fraction": 0.1,
        "partition": {"mode": "shared"},
        "step_times": [1, 2, 3, 6],
        "compute_periods": 4,
        "comm_seconds": 6,
        "methods": list(METHODS),
        "stepsize": 0.1,
        "batch_size": 256,
        "sparsity": sparsity,
        "rounds": 20,
        "seeds": list(seeds),
        "output_dir": f"{out_root}/p{sparsity}",
    }
    config, issues = validate_config(raw)
    if issues:
        raise SystemExit("\n".join(str(i) for i in issues))
    return run_suite(config)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/sparsity-ablation")
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    args = parser.parse_args()

    table = collections.defaultdict(dict)
    for level in LEVELS:
        result = run_level(level, args.out, args.seeds)
        losses = collections.defaultdict(list)
        bits = {}
        for run in result.runs:
            losses[run.method].append(run.records[-1].train_loss)
            bits[run.method] = run.records[-1].comm_bits
        for method in METHODS:
            table[method][level] = (np.mean(losses[method]), bits[method])

    header = "method".ljust(26) + "".join(f"p={lv}".rjust(22) for lv in LEVELS)
    print("\nfinal mean train loss (cumulative bits per run):")
    print(header)
    for method in METHODS:
        cells = "".join(
            f"{table[method][lv][0]:.4f} ({table[method][lv][1]:.1e}b)".rjust(22) for lv in LEVELS
        )
        print(method.ljust(26) + cells)


if __name__ == "__main__":
    main()
