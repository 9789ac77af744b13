#!/usr/bin/env python3
"""Pooled ROC curves for two short/weak pulse settings.

Usage: python scripts/run_roc.py [OUT_DIR] [RUNS]
"""

import os
import sys

import numpy as np

from gsmooth import DriveConfig, ScenarioConfig, pooled_roc, run_scenario
from gsmooth.harness import run_seed


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "artifacts/roc"
    runs = int(sys.argv[2]) if len(sys.argv) > 2 else 20
    alphas = np.round(np.linspace(0.05, 1.0, 20), 3)
    for tag, s, w in (("s10_w0.015", 10.0, 0.015), ("s15_w0.02", 15.0, 0.02)):
        results = []
        for k in range(runs):
            cfg = ScenarioConfig(
                kappa=0.1, n_bar_R=5.0, n_bar_F=5.0,
                drive=DriveConfig(n_impulses=5, s=s, w=w),
                seed=run_seed(20250809, 0, k),
            )
            results.append(run_scenario(cfg))
        rows = pooled_roc(results, alphas)
        os.makedirs(out, exist_ok=True)
        path = f"{out}/roc_{tag}.csv"
        with open(path, "w") as fh:
            fh.write("alpha,fpr,tpr\n")
            for row in rows:
                fh.write(f"{row['alpha']!r},{row['fpr']!r},{row['tpr']!r}\n")
        print(f"{tag}: wrote {path}")
        for row in rows[:: max(1, len(rows) // 5)]:
            print(f"  alpha={row['alpha']:.2f} tpr={row['tpr']:.2f} fpr={row['fpr']:.2f}")


if __name__ == "__main__":
    main()
