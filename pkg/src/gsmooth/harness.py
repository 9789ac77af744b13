"""Scenario orchestration: configured single runs, Monte Carlo sweeps, and
artifact emission.

A scenario simulates the reference system with a random impulse train, feeds
its measurement record to the forward filter and backward effect (both track
the same drive), smooths, runs the impulse detector on the smoothed position,
and scores reconstruction accuracy against the reference. Seeding is fully
deterministic: every run's generator derives from
SeedSequence([master, cell_index, run_index]).
"""

from __future__ import annotations

import hashlib
import json
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .detection import (
    DetectionConfig,
    DetectionReport,
    apply_edge_guard,
    detect_impulses,
    match_detections,
    threshold_detect,
)
from .errors import ValidationError
from .model import (
    DriveSignal,
    Impulse,
    LinearGaussianModel,
    position_monitored_oscillator,
    thermal_state,
)
from .propagation import (
    TrajectoryBundle,
    run_backward,
    run_forward_filter,
    simulate_reference,
)
from .smoothing import SmoothedTrajectory, smooth_trajectory, tv_distance_timeseries, x_marginals

_MAX_PLACEMENT_TRIES = 10_000


@dataclass(frozen=True)
class DriveConfig:
    """Impulse-train settings: n pulses of height s and width w, randomly
    placed unless explicit centers are given."""

    n_impulses: int = 0
    s: float = 50.0
    w: float = 0.15
    placement: str = "random"
    centers: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_impulses < 0:
            raise ValidationError(f"n_impulses must be >= 0, got {self.n_impulses}")
        if self.placement not in ("random", "fixed"):
            raise ValidationError(f"unknown placement {self.placement!r}")
        if self.placement == "fixed" and self.centers is None and self.n_impulses > 0:
            raise ValidationError("fixed placement requires explicit centers")
        if self.centers is not None:
            object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment cell; JSON configs mirror these field names."""

    omega_a: float = 10.0
    kappa: float = 0.1
    eta: float = 1.0
    n_bar_R: float = 5.0
    n_bar_F: float = 3.0
    t0: float = 0.0
    t1: float = 6.0
    dt: float = 1e-3
    nu: float = 1e6
    seed: int | tuple[int, ...] = 0
    drive: DriveConfig = field(default_factory=DriveConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)

    def __post_init__(self) -> None:
        for name in ("omega_a", "kappa", "dt", "nu"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("n_bar_R", "n_bar_F"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta must be in [0, 1], got {self.eta}")
        if isinstance(self.seed, list):
            object.__setattr__(self, "seed", tuple(int(s) for s in self.seed))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        drive = data.pop("drive", None)
        detection = data.pop("detection", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if drive is not None:
            kwargs["drive"] = DriveConfig(**drive)
        if detection is not None:
            kwargs["detection"] = DetectionConfig(**detection)
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seed"] = list(self.seed) if isinstance(self.seed, tuple) else self.seed
        if out["drive"]["centers"] is not None:
            out["drive"]["centers"] = list(out["drive"]["centers"])
        return out


@dataclass(frozen=True)
class ScenarioResult:
    """Everything one scenario produced."""

    config: ScenarioConfig
    bundle: TrajectoryBundle
    smoothed: SmoothedTrajectory
    report: DetectionReport
    d_F: float
    d_S: float
    processed: np.ndarray
    truth: tuple[float, ...]


@dataclass(frozen=True)
class SweepCell:
    indices: tuple[int, ...]
    values: dict
    n_runs: int
    n_failed: int
    metrics: dict


@dataclass(frozen=True)
class SweepResult:
    axis_names: tuple[str, ...]
    axis_values: tuple[tuple[float, ...], ...]
    n_runs: int
    cells: tuple[SweepCell, ...]

    def to_long_rows(self) -> list[dict]:
        rows = []
        for cell in self.cells:
            for metric, value in sorted(cell.metrics.items()):
                row = dict(cell.values)
                row["metric"] = metric
                row["value"] = value
                row["n_runs"] = cell.n_runs - cell.n_failed
                rows.append(row)
        return rows


def random_impulse_train(
    n_impulses: int,
    s: float,
    w: float,
    window: tuple[float, float],
    rng: np.random.Generator,
) -> DriveSignal:
    """Uniformly placed pulses in [t0 + 2w, t1 - 2w], centers >= 2w apart."""
    if n_impulses == 0:
        return DriveSignal()
    t0, t1 = window
    lo, hi = t0 + 2.0 * w, t1 - 2.0 * w
    if hi <= lo or (hi - lo) < (n_impulses - 1) * 2.0 * w:
        raise ValidationError(
            f"window [{t0}, {t1}] cannot hold {n_impulses} pulses of width {w}"
        )
    for _ in range(_MAX_PLACEMENT_TRIES):
        centers = np.sort(rng.uniform(lo, hi, n_impulses))
        if n_impulses < 2 or np.diff(centers).min() >= 2.0 * w:
            return DriveSignal(tuple(Impulse(float(c), w, s) for c in centers))
    raise ValidationError(
        f"could not place {n_impulses} pulses of width {w} in [{t0}, {t1}] "
        f"after {_MAX_PLACEMENT_TRIES} attempts"
    )


def build_drive(config: ScenarioConfig, rng: np.random.Generator) -> DriveSignal:
    d = config.drive
    if d.n_impulses == 0:
        return DriveSignal()
    if d.placement == "fixed":
        return DriveSignal(tuple(Impulse(c, d.w, d.s) for c in d.centers))
    return random_impulse_train(d.n_impulses, d.s, d.w, (config.t0, config.t1), rng)


def build_model(config: ScenarioConfig) -> LinearGaussianModel:
    return position_monitored_oscillator(config.omega_a, config.kappa, config.eta)


def run_scenario(config: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Full R -> record -> F, B -> S pipeline with detection and accuracy metrics."""
    model = build_model(config)
    ss = np.random.SeedSequence(config.seed)
    ss_drive, ss_noise = ss.spawn(2)
    drive = build_drive(config, np.random.default_rng(ss_drive))

    reference, record = simulate_reference(
        model, thermal_state(config.n_bar_R), drive, config.dt, config.t1,
        np.random.default_rng(ss_noise), t0=config.t0,
    )
    forward = run_forward_filter(model, thermal_state(config.n_bar_F), drive, record)
    backward = run_backward(model, drive, record, nu=config.nu)
    smoothed = smooth_trajectory(forward, backward)

    det_cfg = config.detection.resolve(config.drive.w, config.dt)
    detected, processed = detect_impulses(smoothed.x, config.dt, det_cfg, t0=config.t0)
    truth = tuple(float(c) for c in drive.centers)
    report = match_detections(detected, truth, det_cfg.match_tolerance, alpha=det_cfg.alpha)

    d_F = tv_distance_timeseries(x_marginals(forward), x_marginals(reference))
    d_S = tv_distance_timeseries(x_marginals(smoothed), x_marginals(reference))

    result = ScenarioResult(
        config=config,
        bundle=TrajectoryBundle(
            t=reference.t, reference=reference, forward=forward,
            backward=backward, record=record,
        ),
        smoothed=smoothed,
        report=report,
        d_F=d_F,
        d_S=d_S,
        processed=processed,
        truth=truth,
    )
    if out_dir is not None:
        emit_artifacts([result], out_dir)
    return result


_AXIS_FIELDS = {"omega_a", "kappa", "eta", "n_bar_R", "n_bar_F", "t1", "dt", "nu"}
_DRIVE_AXIS_FIELDS = {"s", "w", "n_impulses"}


def _with_axis(config: ScenarioConfig, name: str, value) -> ScenarioConfig:
    if name in _AXIS_FIELDS:
        return replace(config, **{name: value})
    if name in _DRIVE_AXIS_FIELDS:
        if name == "n_impulses":
            value = int(value)
        return replace(config, drive=replace(config.drive, **{name: value}))
    raise ValidationError(f"unknown sweep axis {name!r}")


def run_seed(master_seed, cell_index: int, run_index: int) -> tuple[int, ...]:
    """Stable per-run seed tuple: hashed via SeedSequence([master, cell, run])."""
    if isinstance(master_seed, (tuple, list)):
        return tuple(master_seed) + (cell_index, run_index)
    return (int(master_seed), cell_index, run_index)


def _run_cell_task(args) -> tuple[int, int, dict | None, str | None]:
    cell_index, run_index, config = args
    try:
        res = run_scenario(config)
        metrics = {
            "matched": len(res.report.matches),
            "truth": len(res.truth),
            "detections": len(res.report.detected),
            "d_F": res.d_F,
            "d_S": res.d_S,
        }
        return cell_index, run_index, metrics, None
    except Exception as exc:  # noqa: BLE001 - cell failures are recorded, not fatal
        return cell_index, run_index, None, f"{type(exc).__name__}: {exc}"


def sweep_grid(
    base_config: ScenarioConfig,
    axes: dict[str, list],
    n_runs: int,
    workers: int = 1,
) -> SweepResult:
    """Run n_runs scenarios per grid cell and aggregate.

    Per-cell aggregates: detection_fraction (pooled matched truth / total
    truth), fpr (pooled unmatched detections / total detections), mean d_F,
    mean d_S. Failed runs are recorded per cell and skipped in aggregates.
    """
    if n_runs < 1:
        raise ValidationError(f"n_runs must be >= 1, got {n_runs}")
    axis_names = tuple(axes.keys())
    axis_values = tuple(tuple(v) for v in axes.values())
    grid = list(itertools.product(*axis_values)) if axis_names else [()]

    tasks = []
    for cell_index, combo in enumerate(grid):
        cfg = base_config
        for name, value in zip(axis_names, combo):
            cfg = _with_axis(cfg, name, value)
        for run_index in range(n_runs):
            run_cfg = replace(cfg, seed=run_seed(base_config.seed, cell_index, run_index))
            tasks.append((cell_index, run_index, run_cfg))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell_task, tasks))
    else:
        outcomes = [_run_cell_task(t) for t in tasks]
    outcomes.sort(key=lambda o: (o[0], o[1]))

    cells = []
    for cell_index, combo in enumerate(grid):
        runs = [o for o in outcomes if o[0] == cell_index]
        ok = [o[2] for o in runs if o[2] is not None]
        n_failed = len(runs) - len(ok)
        matched = sum(m["matched"] for m in ok)
        truth = sum(m["truth"] for m in ok)
        dets = sum(m["detections"] for m in ok)
        metrics = {
            "detection_fraction": matched / truth if truth else 0.0,
            "fpr": (dets - matched) / dets if dets else 0.0,
            "d_F": float(np.mean([m["d_F"] for m in ok])) if ok else float("nan"),
            "d_S": float(np.mean([m["d_S"] for m in ok])) if ok else float("nan"),
        }
        values = {name: value for name, value in zip(axis_names, combo)}
        cells.append(SweepCell(
            indices=(cell_index,),
            values=values,
            n_runs=n_runs,
            n_failed=n_failed,
            metrics=metrics,
        ))
    return SweepResult(
        axis_names=axis_names,
        axis_values=axis_values,
        n_runs=n_runs,
        cells=tuple(cells),
    )


def pooled_roc(
    results: list[ScenarioResult],
    alphas,
) -> list[dict]:
    """Per-threshold detection stats pooled across scenario runs."""
    rows = []
    for a in sorted(set(float(a) for a in alphas)):
        matched = truth = dets = 0
        for res in results:
            det_cfg = res.config.detection.resolve(res.config.drive.w, res.config.dt)
            guarded = apply_edge_guard(res.processed, res.config.dt, det_cfg.edge_guard)
            det = threshold_detect(
                guarded, res.config.dt, a,
                min_separation=det_cfg.min_separation,
                t0=res.config.t0, t_half=det_cfg.t_half,
            )
            rep = match_detections(det, res.truth, det_cfg.match_tolerance, alpha=a)
            matched += len(rep.matches)
            truth += len(rep.truth)
            dets += len(rep.detected)
        rows.append({
            "alpha": a,
            "tpr": matched / truth if truth else 0.0,
            "fpr": (dets - matched) / dets if dets else 0.0,
        })
    return rows


# ---------------------------------------------------------------------------
# artifacts

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_trajectories_csv(path, result: ScenarioResult) -> None:
    b = result.bundle
    S = result.smoothed
    cols = ["t", "x_R", "p_R", "x_F", "p_F", "x_B", "p_B", "x_S", "p_S",
            "V11", "V22", "U11", "U22"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(b.t):
            row = [
                format(t, ".9g"),
                _fmt(b.reference.mean[i, 0]), _fmt(b.reference.mean[i, 1]),
                _fmt(b.forward.mean[i, 0]), _fmt(b.forward.mean[i, 1]),
                _fmt(b.backward.mean[i, 0]), _fmt(b.backward.mean[i, 1]),
                _fmt(S.mean[i, 0]), _fmt(S.mean[i, 1]),
                _fmt(b.forward.cov[i, 0, 0]), _fmt(b.forward.cov[i, 1, 1]),
                _fmt(b.backward.cov_approx[i, 0, 0]), _fmt(b.backward.cov_approx[i, 1, 1]),
            ]
            fh.write(",".join(row) + "\n")


def _write_sweep_csv(path, sweep: SweepResult) -> None:
    cols = list(sweep.axis_names) + ["metric", "value", "n_runs"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in sweep.to_long_rows():
            cells = [_fmt(row[n]) if isinstance(row[n], float) else str(row[n])
                     for n in sweep.axis_names]
            cells += [row["metric"], _fmt(row["value"]), str(row["n_runs"])]
            fh.write(",".join(cells) + "\n")


def _config_hash(config: ScenarioConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def emit_artifacts(results, out_dir) -> dict:
    """Write CSV/JSON artifacts and a manifest; returns the manifest dict.

    Accepts an iterable of ScenarioResult and/or SweepResult. Outputs are
    byte-deterministic for fixed inputs.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    manifest: dict = {"versions": {"gsmooth": __version__, "numpy": np.__version__},
                      "files": [], "configs": []}
    for res in results:
        if isinstance(res, ScenarioResult):
            traj_path = os.path.join(out_dir, "trajectories.csv")
            _write_trajectories_csv(traj_path, res)
            det_path = os.path.join(out_dir, "detections.json")
            with open(det_path, "w") as fh:
                json.dump(res.report.to_json_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            manifest["files"] += ["trajectories.csv", "detections.json"]
            manifest["configs"].append(_config_hash(res.config))
        elif isinstance(res, SweepResult):
            sweep_path = os.path.join(out_dir, "sweep.csv")
            _write_sweep_csv(sweep_path, res)
            manifest["files"].append("sweep.csv")
        else:
            raise ValidationError(f"cannot emit artifacts for {type(res).__name__}")
    manifest["files"] = sorted(set(manifest["files"]))
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
