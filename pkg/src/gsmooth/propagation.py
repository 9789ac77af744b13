"""Fixed-step propagation of the reference system, forward filter, and
backward effect.

The mean equations are integrated with Euler-Maruyama, the covariance V and
information matrix P with classical RK4 (their equations are noise-free), and
the nu-initialized effect covariance U with an exact matrix-fraction step of
its Riccati flow (an explicit stepper is unstable from U(T) = nu I at the
production step size).

Measurement convention: the record increment over [t, t+dt) is
dI = <x>(t) dt + dW/sqrt(8 kappa), and both conditioned systems are driven by
innovations dW = (dI - <x> dt) sqrt(8 kappa) evaluated with the stored mean at
the increment's own time label t (for the backward pass this makes the stiff
feedback through the near-terminal effect covariance implicit).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from . import _kernels
from .errors import NumericalInstabilityError, ValidationError
from .model import DriveSignal, EffectState, GaussianState, LinearGaussianModel

_GRID_RTOL = 1e-9


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _n_steps(t0: float, t1: float, dt: float) -> int:
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if t1 < t0:
        raise ValidationError(f"need t1 >= t0, got [{t0}, {t1}]")
    n = int(round((t1 - t0) / dt))
    if abs(n * dt - (t1 - t0)) > _GRID_RTOL * max(1.0, t1 - t0):
        raise ValidationError(f"dt={dt} does not divide the window [{t0}, {t1}]")
    return n


def _drive_matrix(model: LinearGaussianModel, drive, t_grid: np.ndarray) -> np.ndarray:
    """B u(t) sampled on the grid, shape (len(t_grid), 2n)."""
    m = model.n_drives
    if drive is None:
        return np.zeros((t_grid.shape[0], model.dim))
    signals = [drive] if isinstance(drive, DriveSignal) else list(drive)
    if len(signals) != m:
        raise ValidationError(f"model has {m} drive column(s), got {len(signals)} signal(s)")
    u = np.stack([s.sample(t_grid) for s in signals], axis=1)
    return u @ model.B.T


@dataclass(frozen=True)
class MeasurementRecord:
    """Homodyne record on a fixed grid: dI[i] covers [t0 + i dt, t0 + (i+1) dt).

    dW_true holds the Wiener increments that generated a synthetic record and
    is absent for records of unknown origin.
    """

    dt: float
    t0: float
    t1: float
    dI: NDArray[np.float64]
    dW_true: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        n = _n_steps(self.t0, self.t1, self.dt)
        dI = np.asarray(self.dI, dtype=float)
        if dI.shape != (n,):
            raise ValidationError(f"dI must have length {n}, got {dI.shape}")
        object.__setattr__(self, "dI", dI)
        if self.dW_true is not None:
            dW = np.asarray(self.dW_true, dtype=float)
            if dW.shape != (n,):
                raise ValidationError(f"dW_true must have length {n}, got {dW.shape}")
            object.__setattr__(self, "dW_true", dW)

    @property
    def n_steps(self) -> int:
        return self.dI.shape[0]

    @property
    def times(self) -> NDArray[np.float64]:
        """Left edge of each increment interval."""
        return self.t0 + self.dt * np.arange(self.n_steps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.dW_true is None:
                writer.writerow(["t", "dI"])
                for t, di in zip(self.times, self.dI):
                    writer.writerow([format(t, ".9g"), repr(float(di))])
            else:
                writer.writerow(["t", "dI", "dW_true"])
                for t, di, dw in zip(self.times, self.dI, self.dW_true):
                    writer.writerow([format(t, ".9g"), repr(float(di)), repr(float(dw))])

    @classmethod
    def from_csv(cls, path, dt: float | None = None) -> "MeasurementRecord":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["t", "dI"]:
                raise ValidationError(f"unexpected record header {header}")
            has_dw = len(header) > 2 and header[2] == "dW_true"
            t, dI, dW = [], [], []
            for row in reader:
                t.append(float(row[0]))
                dI.append(float(row[1]))
                if has_dw:
                    dW.append(float(row[2]))
        t = np.asarray(t)
        if dt is None:
            if len(t) < 2:
                raise ValidationError("cannot infer dt from a single-row record")
            dt = float(t[1] - t[0])
        return cls(
            dt=dt,
            t0=float(t[0]),
            t1=float(t[-1]) + dt,
            dI=np.asarray(dI),
            dW_true=np.asarray(dW) if has_dw else None,
        )


@dataclass(frozen=True)
class StateTrajectory:
    """Per-step means and covariances of one forward-evolving system."""

    t: NDArray[np.float64]
    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def state_at(self, i: int) -> GaussianState:
        return GaussianState(mean=self.mean[i], cov=self.cov[i])

    @property
    def x(self) -> NDArray[np.float64]:
        return self.mean[:, 0]


@dataclass(frozen=True)
class EffectTrajectory:
    """Per-step backward effect: location Y, information P, nu-approximated U."""

    t: NDArray[np.float64]
    mean: NDArray[np.float64]
    info: NDArray[np.float64]
    cov_approx: NDArray[np.float64]
    nu: float
    info_terminal: str = "ideal"

    def effect_at(self, i: int) -> EffectState:
        return EffectState(mean=self.mean[i], info=self.info[i], cov_approx=self.cov_approx[i])

    @property
    def x(self) -> NDArray[np.float64]:
        return self.mean[:, 0]


@dataclass(frozen=True)
class TrajectoryBundle:
    """The systems produced by one scenario, on a shared time grid."""

    t: NDArray[np.float64]
    reference: StateTrajectory | None = None
    forward: StateTrajectory | None = None
    backward: EffectTrajectory | None = None
    record: MeasurementRecord | None = None


# ---------------------------------------------------------------------------
# rate functions (public so fixed-point residuals can be evaluated directly)

def forward_cov_rate(V: np.ndarray, model: LinearGaussianModel) -> np.ndarray:
    """dV/dt = A V + V Aᵀ + D - eta (V Cᵀ + Γᵀ)(C V + Γ)."""
    V = np.asarray(V, dtype=float)
    g = V @ model.C.T + model.Gamma.T
    AV = model.A @ V
    return AV + AV.T + model.D - model.eta * (g @ g.T)


def backward_cov_rate(U: np.ndarray, model: LinearGaussianModel) -> np.ndarray:
    """dU/ds = -A U - U Aᵀ + D - eta (U Cᵀ - Γᵀ)(C U - Γ), s backward time."""
    U = np.asarray(U, dtype=float)
    g = U @ model.C.T - model.Gamma.T
    AU = model.A @ U
    return -(AU + AU.T) + model.D - model.eta * (g @ g.T)


def info_rate(P: np.ndarray, model: LinearGaussianModel) -> np.ndarray:
    """dP/ds = P A + Aᵀ P - P D P + eta (Cᵀ - P Γᵀ)(C - Γ P), s backward time."""
    P = np.asarray(P, dtype=float)
    w = model.C.T - P @ model.Gamma.T
    PA = P @ model.A
    return PA + PA.T - P @ model.D @ P + model.eta * (w @ w.T)


def effect_flow_propagator(model: LinearGaussianModel, dt: float) -> tuple[np.ndarray, ...]:
    """One-step matrix-fraction propagator blocks for the backward U flow.

    Writing the flow as dU/ds = Ã U + U Ãᵀ + Q̃ - U S U with
    Ã = -A + eta Γᵀ C, Q̃ = D - eta Γᵀ Γ, S = eta Cᵀ C, the step is
    U -> (F21 + F22 U)(F11 + F12 U)^-1 with F = expm(dt [[-Ãᵀ, S], [Q̃, Ã]]).
    """
    d = model.dim
    At = -model.A + model.eta * (model.Gamma.T @ model.C)
    Qt = model.D - model.eta * (model.Gamma.T @ model.Gamma)
    S = model.eta * (model.C.T @ model.C)
    M = np.block([[-At.T, S], [Qt, At]])
    F = expm(M * dt)
    return (
        np.ascontiguousarray(F[:d, :d]),
        np.ascontiguousarray(F[:d, d:]),
        np.ascontiguousarray(F[d:, :d]),
        np.ascontiguousarray(F[d:, d:]),
    )


# ---------------------------------------------------------------------------
# single steps

def _instability(what: str) -> NumericalInstabilityError:
    return NumericalInstabilityError(
        f"{what} lost positive semidefiniteness beyond tolerance; "
        "the integration is unstable at this step size, try a smaller dt"
    )


def _cov_scratch(d: int):
    return tuple(np.empty((d, d)) for _ in range(5)) + (np.empty(d),)


def forward_step(
    state: GaussianState,
    model: LinearGaussianModel,
    u: float | np.ndarray,
    dW: float,
    dt: float,
) -> GaussianState:
    """One Euler-Maruyama/RK4 step of the conditioned state, t -> t + dt."""
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    d = model.dim
    u_vec = np.atleast_1d(np.asarray(u, dtype=float))
    g = model.eta ** 0.5 * (state.cov @ model.C.T + model.Gamma.T)[:, 0]
    mean = state.mean + (model.A @ state.mean + model.B @ u_vec) * dt + g * dW
    V = state.cov.copy()
    _kernels._rk4_cov_step(V, model.A, model.C[0], model.Gamma[0], model.D,
                           model.eta, dt, *_cov_scratch(d))
    if not _kernels._posdef_step_check(V):
        raise _instability("forward covariance")
    return GaussianState(mean=mean, cov=V)


def backward_information_step(P: np.ndarray, model: LinearGaussianModel, dt: float) -> np.ndarray:
    """One RK4 step of the information matrix, t -> t - dt."""
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    d = model.dim
    P = np.array(P, dtype=float)
    scratch = tuple(np.empty((d, d)) for _ in range(5)) + (np.empty(d), np.empty((d, d)))
    _kernels._rk4_info_step(P, model.A, model.C[0], model.Gamma[0], model.D,
                            model.eta, dt, *scratch)
    if not _kernels._posdef_step_check(P):
        raise _instability("information matrix")
    return P


def backward_effect_step(
    effect: EffectState,
    model: LinearGaussianModel,
    u: float | np.ndarray,
    dW: float,
    dt: float,
    y_noise_cov: np.ndarray | None = None,
) -> EffectState:
    """One backward step of the effect, t -> t - dt, with exogenous noise dW.

    The location update is Y(t-dt) = Y(t) - [A Y + B u] dt + sqrt(eta)(U Cᵀ - Γᵀ) dW
    with U = y_noise_cov if given, else the effect's own cov_approx. cov_approx
    advances by the exact matrix-fraction step; info by RK4.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    u_vec = np.atleast_1d(np.asarray(u, dtype=float))
    U_y = effect.cov_approx if y_noise_cov is None else np.asarray(y_noise_cov, dtype=float)
    g = model.eta ** 0.5 * (U_y @ model.C.T - model.Gamma.T)[:, 0]
    mean = effect.mean - (model.A @ effect.mean + model.B @ u_vec) * dt + g * dW

    F11, F12, F21, F22 = effect_flow_propagator(model, dt)
    U = np.linalg.solve((F11 + F12 @ effect.cov_approx).T,
                        (F21 + F22 @ effect.cov_approx).T).T
    U = 0.5 * (U + U.T)
    if not _kernels._posdef_step_check(U):
        raise _instability("effect covariance")
    P = backward_information_step(effect.info, model, dt)
    return EffectState(mean=mean, info=P, cov_approx=U)


def innovation(dI: float, x_pred: float, dt: float, kappa: float) -> float:
    """dW = (dI - x_pred dt) sqrt(8 kappa), the noise consistent with a prediction."""
    if kappa <= 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    return (dI - x_pred * dt) * np.sqrt(8.0 * kappa)


# ---------------------------------------------------------------------------
# whole-record runs

def integrate_covariance(
    model: LinearGaussianModel,
    V0: np.ndarray,
    dt: float,
    n_steps: int,
) -> np.ndarray:
    """RK4 flow of the forward covariance over n_steps; returns the final V."""
    if dt <= 0 or n_steps < 0:
        raise ValidationError("need dt > 0 and n_steps >= 0")
    V = np.array(V0, dtype=float)
    bad = _kernels.integrate_cov_kernel(V, model.A, model.C[0], model.Gamma[0],
                                        model.D, model.eta, dt, n_steps)
    if bad:
        raise _instability(f"forward covariance (step {bad - 1})")
    return V


def simulate_reference(
    model: LinearGaussianModel,
    init: GaussianState,
    drive,
    dt: float,
    t1: float,
    rng_seed,
    t0: float = 0.0,
) -> tuple[StateTrajectory, MeasurementRecord]:
    """Evolve the reference system with fresh Wiener noise and emit its record."""
    kappa = model.kappa
    if kappa <= 0:
        raise ValidationError(
            "simulate_reference requires a monitored channel (kappa > 0); "
            f"model has kappa = {kappa}"
        )
    n = _n_steps(t0, t1, dt)
    t = t0 + dt * np.arange(n + 1)
    Bu = _drive_matrix(model, drive, t[:-1])
    rng = _as_rng(rng_seed)
    dW = rng.normal(0.0, np.sqrt(dt), n)

    d = model.dim
    means = np.empty((n + 1, d))
    covs = np.empty((n + 1, d, d))
    dI = np.empty(n)
    bad = _kernels.reference_loop(
        init.mean.copy(), init.cov.copy(), model.A, Bu, model.C[0],
        model.Gamma[0], model.D, model.eta, dt, dW, np.sqrt(8.0 * kappa),
        means, covs, dI,
    )
    if bad:
        raise _instability(f"reference covariance (step {bad - 1})")
    traj = StateTrajectory(t=t, mean=means, cov=covs)
    record = MeasurementRecord(dt=dt, t0=t0, t1=t1, dI=dI, dW_true=dW)
    return traj, record


def run_forward_filter(
    model: LinearGaussianModel,
    init_F: GaussianState,
    drive,
    record: MeasurementRecord,
) -> StateTrajectory:
    """Condition a Gaussian state on the record via innovations."""
    kappa = model.kappa
    if kappa <= 0:
        raise ValidationError("run_forward_filter requires kappa > 0")
    n = record.n_steps
    dt = record.dt
    t = record.t0 + dt * np.arange(n + 1)
    Bu = _drive_matrix(model, drive, t[:-1])

    d = model.dim
    means = np.empty((n + 1, d))
    covs = np.empty((n + 1, d, d))
    bad = _kernels.filter_loop(
        init_F.mean.copy(), init_F.cov.copy(), model.A, Bu, model.C[0],
        model.Gamma[0], model.D, model.eta, dt, record.dI, np.sqrt(8.0 * kappa),
        means, covs,
    )
    if bad:
        raise _instability(f"filter covariance (step {bad - 1})")
    return StateTrajectory(t=t, mean=means, cov=covs)


def run_backward(
    model: LinearGaussianModel,
    drive,
    record: MeasurementRecord,
    nu: float = 1e6,
    info_terminal: str = "ideal",
) -> EffectTrajectory:
    """Propagate the measurement effect backward over the record.

    Terminal conditions at t1: Y = 0, U = nu I, and P = 0 for the ideal
    identity effect (info_terminal="ideal") or P = I/nu matching the
    nu-approximated U ("matched", useful to cross-check the two covariance
    propagations against each other).
    """
    if nu <= 0:
        raise ValidationError(f"nu must be positive, got {nu}")
    if info_terminal not in ("ideal", "matched"):
        raise ValidationError(f"unknown info_terminal {info_terminal!r}")
    kappa = model.kappa
    if kappa <= 0:
        raise ValidationError("run_backward requires kappa > 0")
    n = record.n_steps
    dt = record.dt
    t = record.t0 + dt * np.arange(n + 1)
    Bu = _drive_matrix(model, drive, t[:-1])

    d = model.dim
    Y = np.empty((n + 1, d))
    P = np.empty((n + 1, d, d))
    U = np.empty((n + 1, d, d))
    P_terminal = np.zeros((d, d)) if info_terminal == "ideal" else np.eye(d) / nu
    F11, F12, F21, F22 = effect_flow_propagator(model, dt)
    bad = _kernels.backward_loop(
        model.A, Bu, model.C[0], model.Gamma[0], model.D, model.eta, dt,
        record.dI, np.sqrt(8.0 * kappa), nu, F11, F12, F21, F22, P_terminal,
        Y, P, U,
    )
    if bad:
        what = "effect covariance" if bad > 0 else "information matrix"
        raise _instability(f"{what} (step {abs(bad) - 1})")
    return EffectTrajectory(t=t, mean=Y, info=P, cov_approx=U, nu=nu,
                            info_terminal=info_terminal)
