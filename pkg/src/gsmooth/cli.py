"""Command-line interface.

Subcommands: simulate (one scenario), sweep (Monte Carlo grid), roc (pooled
ROC over repeated runs). Exit codes: 0 success, 1 validation error,
2 numerical-instability error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .errors import NumericalInstabilityError, ValidationError
from .harness import (
    ScenarioConfig,
    emit_artifacts,
    pooled_roc,
    run_scenario,
    run_seed,
    sweep_grid,
)


def _parse_axes(specs: list[str]) -> dict[str, list[float]]:
    axes: dict[str, list[float]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ValidationError(f"axis spec {spec!r} must look like name=v1,v2,...")
        name, _, values = spec.partition("=")
        name = name.strip()
        try:
            axes[name] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(f"axis spec {spec!r} has a non-numeric value") from exc
        if not axes[name]:
            raise ValidationError(f"axis spec {spec!r} lists no values")
    return axes


def _parse_alphas(spec: str) -> list[float]:
    try:
        alphas = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"--alphas {spec!r} has a non-numeric value") from exc
    if not alphas:
        raise ValidationError("--alphas lists no values")
    return alphas


def _load_config(path: str, seed: int | None) -> ScenarioConfig:
    config = ScenarioConfig.from_json_file(path)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def cmd_simulate(args) -> None:
    config = _load_config(args.config, args.seed)
    result = run_scenario(config, out_dir=args.out)
    print(f"scenario done: {len(result.report.matches)}/{len(result.truth)} impulses matched, "
          f"d_F={result.d_F:.4g}, d_S={result.d_S:.4g}")
    if args.out:
        print(f"artifacts written to {args.out}")


def cmd_sweep(args) -> None:
    config = _load_config(args.config, args.seed)
    axes = _parse_axes(args.axes or [])
    sweep = sweep_grid(config, axes, n_runs=args.runs, workers=args.workers)
    if args.out:
        emit_artifacts([sweep], args.out)
        print(f"sweep artifacts written to {args.out}")
    for cell in sweep.cells:
        label = ", ".join(f"{k}={v}" for k, v in cell.values.items()) or "(base)"
        print(f"{label}: detection_fraction={cell.metrics['detection_fraction']:.3f} "
              f"fpr={cell.metrics['fpr']:.3f} d_F={cell.metrics['d_F']:.4g} "
              f"d_S={cell.metrics['d_S']:.4g} failed={cell.n_failed}")


def cmd_roc(args) -> None:
    config = _load_config(args.config, args.seed)
    alphas = _parse_alphas(args.alphas)
    results = []
    for k in range(args.runs):
        cfg = replace(config, seed=run_seed(config.seed, 0, k))
        results.append(run_scenario(cfg))
    rows = pooled_roc(results, alphas)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "roc.csv")
        with open(path, "w", newline="") as fh:
            fh.write("alpha,fpr,tpr\n")
            for row in rows:
                fh.write(f"{row['alpha']!r},{row['fpr']!r},{row['tpr']!r}\n")
        with open(os.path.join(args.out, "manifest.json"), "w") as fh:
            json.dump({"files": ["roc.csv"], "runs": args.runs}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"roc artifacts written to {args.out}")
    for row in rows:
        print(f"alpha={row['alpha']:.3f}: tpr={row['tpr']:.3f} fpr={row['fpr']:.3f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsmooth",
        description="Gaussian filtering/smoothing of a monitored oscillator "
                    "and impulse-force detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario")
    p_sim.add_argument("--config", required=True, help="JSON scenario config")
    p_sim.add_argument("--seed", type=int, default=None, help="override config seed")
    p_sim.add_argument("--out", default=None, help="artifact output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axes", action="append", default=[],
                         help="axis as name=v1,v2,... (repeatable)")
    p_sweep.add_argument("--runs", type=int, default=20, help="runs per cell")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_roc = sub.add_parser("roc", help="pooled ROC curve over repeated runs")
    p_roc.add_argument("--config", required=True)
    p_roc.add_argument("--alphas", required=True, help="comma-separated thresholds")
    p_roc.add_argument("--runs", type=int, default=20)
    p_roc.add_argument("--seed", type=int, default=None)
    p_roc.add_argument("--out", default=None)
    p_roc.set_defaults(func=cmd_roc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalInstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
