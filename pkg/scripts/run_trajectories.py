#!/usr/bin/env python3
"""Sample trajectories of all four systems (R, F, B, S) without external
forcing, for two measurement strengths. Writes one artifact directory per
kappa value.

Usage: python scripts/run_trajectories.py [OUT_DIR]
"""

import sys

from gsmooth import ScenarioConfig, run_scenario


def main() -> None:
    out_root = sys.argv[1] if len(sys.argv) > 1 else "artifacts/trajectories"
    for kappa in (0.1, 2.0):
        cfg = ScenarioConfig(kappa=kappa, n_bar_R=5.0, n_bar_F=3.0, seed=20250809)
        out = f"{out_root}/kappa_{kappa:g}"
        res = run_scenario(cfg, out_dir=out)
        print(f"kappa={kappa:g}: d_F={res.d_F:.1f} d_S={res.d_S:.1f} -> {out}")


if __name__ == "__main__":
    main()
