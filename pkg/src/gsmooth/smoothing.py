"""Combining forward states with backward effects, and distribution metrics.

The smoothed distribution is the normalized product of the state and effect
Gaussians. With P the effect's information matrix the combination is computed
as cov_s = (I + V P)^-1 V and mean_s = (I + V P)^-1 (m_F + V P Y), which needs
no inversion of V and is exact at the terminal identity effect (P = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateCombinationError, ValidationError
from .model import EffectState, GaussianState
from .propagation import EffectTrajectory, StateTrajectory


@dataclass(frozen=True)
class SmoothedEstimate:
    """Mean and covariance of the normalized state-effect Gaussian product."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    @property
    def position_mean(self) -> float:
        return float(self.mean[0])

    @property
    def position_var(self) -> float:
        return float(self.cov[0, 0])


@dataclass(frozen=True)
class SmoothedTrajectory:
    """Per-step smoothed estimates on the shared grid."""

    t: NDArray[np.float64]
    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def estimate_at(self, i: int) -> SmoothedEstimate:
        return SmoothedEstimate(mean=self.mean[i], cov=self.cov[i])

    @property
    def x(self) -> NDArray[np.float64]:
        return self.mean[:, 0]


def combine_gaussians(state: GaussianState, effect: EffectState) -> SmoothedEstimate:
    """Normalized Gaussian product of a state (mean, V) and an effect (Y, P)."""
    V = state.cov
    P = effect.info
    d = V.shape[0]
    if P.shape != (d, d):
        raise ValidationError(f"state dim {d} does not match effect dim {P.shape[0]}")
    M = np.eye(d) + V @ P
    try:
        cov = np.linalg.solve(M, V)
        mean = np.linalg.solve(M, state.mean + V @ (P @ effect.mean))
    except np.linalg.LinAlgError as exc:
        raise DegenerateCombinationError(
            "state covariance and effect information share a null direction"
        ) from exc
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise DegenerateCombinationError(
            "state covariance and effect information share a null direction"
        )
    return SmoothedEstimate(mean=mean, cov=0.5 * (cov + cov.T))


def smooth_trajectory(forward: StateTrajectory, backward: EffectTrajectory) -> SmoothedTrajectory:
    """Pointwise Gaussian product along a whole run (batched)."""
    if forward.t.shape != backward.t.shape or not np.allclose(forward.t, backward.t):
        raise ValidationError("forward and backward trajectories use different grids")
    V = forward.cov
    P = backward.info
    d = V.shape[-1]
    M = np.eye(d) + V @ P
    cov = np.linalg.solve(M, V)
    VP_Y = (V @ P @ backward.mean[..., None])[..., 0]
    mean = np.linalg.solve(M, (forward.mean + VP_Y)[..., None])[..., 0]
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    return SmoothedTrajectory(t=forward.t, mean=mean, cov=cov)


def smoothed_quadrature(x_F: float, V11: float, x_E: float, U11: float) -> tuple[float, float]:
    """Scalar smoothing of one quadrature.

    mean = U11/(V11+U11) x_F + V11/(V11+U11) x_E, var = 1/(1/V11 + 1/U11).
    """
    if V11 <= 0 or U11 <= 0:
        raise ValidationError(f"variances must be positive, got V11={V11}, U11={U11}")
    w_f = U11 / (V11 + U11)
    mean = w_f * x_F + (1.0 - w_f) * x_E
    var = 1.0 / (1.0 / V11 + 1.0 / U11)
    return mean, var


def position_pdf(source, x_grid: np.ndarray) -> NDArray[np.float64]:
    """Marginal density of the first quadrature on a strictly increasing grid."""
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or np.any(np.diff(x_grid) <= 0):
        raise ValidationError("x_grid must be 1-d and strictly increasing")
    mean = float(np.asarray(source.mean).reshape(-1)[0])
    var = float(np.asarray(source.cov)[0, 0])
    return gaussian_pdf(mean, var, x_grid)


def gaussian_pdf(mean: float, var: float, x_grid: np.ndarray) -> NDArray[np.float64]:
    if var <= 0:
        raise ValidationError(f"variance must be positive, got {var}")
    z = (np.asarray(x_grid, dtype=float) - mean)
    return np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * np.pi * var)


@dataclass(frozen=True)
class MarginalSeries:
    """Per-step scalar Gaussian marginals (used by the accuracy metrics)."""

    t: NDArray[np.float64]
    mean: NDArray[np.float64]
    var: NDArray[np.float64]


def x_marginals(traj: StateTrajectory | SmoothedTrajectory) -> MarginalSeries:
    return MarginalSeries(t=traj.t, mean=traj.mean[:, 0], var=traj.cov[:, 0, 0])


def tv_distance_timeseries(
    series_a: MarginalSeries,
    series_b: MarginalSeries,
    x_grid: np.ndarray | None = None,
    n_points: int = 2001,
    chunk: int = 512,
) -> float:
    """Sum over time of the trapezoid integral of |pdf_a - pdf_b| in x.

    With x_grid=None each step uses its own grid spanning the union of
    mean +- 8 sigma of the two marginals (n_points samples). The sum is not
    normalized by the number of steps.
    """
    if series_a.t.shape != series_b.t.shape or not np.allclose(series_a.t, series_b.t):
        raise ValidationError("marginal series use different time grids")
    ma, va = series_a.mean, series_a.var
    mb, vb = series_b.mean, series_b.var
    n = ma.shape[0]
    total = 0.0
    if x_grid is not None:
        x_grid = np.asarray(x_grid, dtype=float)
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            pa = _pdf_block(ma[lo:hi], va[lo:hi], x_grid[None, :])
            pb = _pdf_block(mb[lo:hi], vb[lo:hi], x_grid[None, :])
            total += float(np.trapezoid(np.abs(pa - pb), x_grid, axis=1).sum())
        return total
    base = np.linspace(0.0, 1.0, n_points)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        sa = 8.0 * np.sqrt(va[lo:hi])
        sb = 8.0 * np.sqrt(vb[lo:hi])
        gmin = np.minimum(ma[lo:hi] - sa, mb[lo:hi] - sb)
        gmax = np.maximum(ma[lo:hi] + sa, mb[lo:hi] + sb)
        grid = gmin[:, None] + (gmax - gmin)[:, None] * base[None, :]
        pa = _pdf_block(ma[lo:hi], va[lo:hi], grid)
        pb = _pdf_block(mb[lo:hi], vb[lo:hi], grid)
        dx = (gmax - gmin) / (n_points - 1)
        integrand = np.abs(pa - pb)
        steps = np.trapezoid(integrand, dx=1.0, axis=1) * dx
        total += float(steps.sum())
    return total


def _pdf_block(mean: np.ndarray, var: np.ndarray, grid: np.ndarray) -> np.ndarray:
    z = grid - mean[:, None]
    return np.exp(-0.5 * z * z / var[:, None]) / np.sqrt(2.0 * np.pi * var[:, None])
