#!/usr/bin/env python3
"""Reconstruction-accuracy sweep: mean total-variation distances d_F and d_S
over a grid of measurement strength and filter-initialization error.

Usage: python scripts/run_accuracy_sweep.py [OUT_DIR] [RUNS] [WORKERS]
"""

import sys

from gsmooth import ScenarioConfig, emit_artifacts, sweep_grid


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "artifacts/accuracy_sweep"
    runs = int(sys.argv[2]) if len(sys.argv) > 2 else 20
    workers = int(sys.argv[3]) if len(sys.argv) > 3 else 1
    base = ScenarioConfig(n_bar_R=5.0, seed=20250809)
    axes = {
        "kappa": [0.01, 0.05, 0.1, 0.5, 1.0, 2.0],
        "n_bar_F": [1.0, 3.0, 5.0, 10.0, 20.0, 50.0],
    }
    sweep = sweep_grid(base, axes, n_runs=runs, workers=workers)
    emit_artifacts([sweep], out)
    for cell in sweep.cells:
        print(f"kappa={cell.values['kappa']:g} n_bar_F={cell.values['n_bar_F']:g}: "
              f"d_F={cell.metrics['d_F']:.1f} d_S={cell.metrics['d_S']:.1f}")


if __name__ == "__main__":
    main()
