#!/usr/bin/env python3
"""Impulse-detection rate sweeps: (a) measurement strength x filter error at
fixed strong pulses, (b) pulse height x width at fixed kappa.

Usage: python scripts/run_detection_sweep.py [OUT_DIR] [RUNS] [WORKERS]
"""

import sys

from gsmooth import DriveConfig, ScenarioConfig, emit_artifacts, sweep_grid


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "artifacts/detection_sweep"
    runs = int(sys.argv[2]) if len(sys.argv) > 2 else 20
    workers = int(sys.argv[3]) if len(sys.argv) > 3 else 1

    base = ScenarioConfig(
        n_bar_R=5.0, n_bar_F=5.0, seed=20250809,
        drive=DriveConfig(n_impulses=5, s=50.0, w=0.15),
    )
    strength_axes = {
        "kappa": [0.01, 0.05, 0.1, 0.5, 1.0, 2.0],
        "n_bar_F": [1.0, 5.0, 20.0, 50.0],
    }
    sweep_a = sweep_grid(base, strength_axes, n_runs=runs, workers=workers)
    emit_artifacts([sweep_a], f"{out}/strength")
    for cell in sweep_a.cells:
        print(f"kappa={cell.values['kappa']:g} n_bar_F={cell.values['n_bar_F']:g}: "
              f"fraction={cell.metrics['detection_fraction']:.2f} "
              f"fpr={cell.metrics['fpr']:.2f}")

    pulse_axes = {
        "s": [5.0, 10.0, 15.0, 25.0, 50.0, 100.0],
        "w": [0.01, 0.015, 0.02, 0.05, 0.15, 0.3],
    }
    pulse_base = ScenarioConfig(
        kappa=0.1, n_bar_R=5.0, n_bar_F=5.0, seed=20250809,
        drive=DriveConfig(n_impulses=5, s=50.0, w=0.15),
    )
    sweep_b = sweep_grid(pulse_base, pulse_axes, n_runs=runs, workers=workers)
    emit_artifacts([sweep_b], f"{out}/pulse")
    for cell in sweep_b.cells:
        print(f"s={cell.values['s']:g} w={cell.values['w']:g}: "
              f"fraction={cell.metrics['detection_fraction']:.2f} "
              f"fpr={cell.metrics['fpr']:.2f}")


if __name__ == "__main__":
    main()
