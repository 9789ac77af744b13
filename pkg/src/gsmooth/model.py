"""Linear Gaussian system description for a continuously monitored oscillator.

Builds the drift/diffusion matrices of the conditional moment equations from
the physical inputs (Hamiltonian quadratic form G, drive coupling B, complex
measurement row C̃, efficiency η) and defines the value types shared by the
propagation, smoothing, and detection layers.

Conventions: quadratures are ordered (x_1, p_1, ..., x_n, p_n); rates are in
1/ms and times in ms, so a "10 kHz" oscillator is omega_a = 10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ValidationError

_SYM_TOL = 1e-10
_PSD_TOL = -1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=a.dtype, copy=True)
    out.flags.writeable = False
    return out


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    """Return the 2n x 2n symplectic form, block-diagonal in [[0,1],[-1,0]]."""
    if n_modes < 1:
        raise ValidationError(f"n_modes must be >= 1, got {n_modes}")
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    return omega


def derive_dynamics_matrices(
    G: np.ndarray,
    C_tilde: np.ndarray,
    Omega: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Build the moment-dynamics matrices (A, C, D, Gamma).

    A = Omega (G + Im[C̃† C̃]),  C = 2 Re[C̃],
    D = Omega Re[C̃† C̃] Omegaᵀ,  Gamma = -Im[C̃] Omegaᵀ,
    with Re/Im taken element-wise on the rank-1 matrix C̃† C̃ and on C̃.

    Parameters
    ----------
    G:
        Real symmetric 2n x 2n Hamiltonian quadratic form (1/ms).
    C_tilde:
        Complex measurement-operator row, shape (2n,) or (1, 2n), 1/sqrt(ms).
    Omega:
        Optional precomputed symplectic form; derived from G's size otherwise.
    """
    G = np.asarray(G, dtype=float)
    c = np.asarray(C_tilde, dtype=complex).reshape(-1)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] % 2 != 0:
        raise ValidationError(f"G must be square with even size, got {G.shape}")
    if c.shape[0] != G.shape[0]:
        raise ValidationError(
            f"C_tilde length {c.shape[0]} does not match G size {G.shape[0]}"
        )
    if not np.allclose(G, G.T, atol=_SYM_TOL, rtol=0.0):
        raise ValidationError("G must be symmetric")
    if Omega is None:
        Omega = symplectic_form(G.shape[0] // 2)

    cdc = np.outer(c.conj(), c)
    A = Omega @ (G + cdc.imag)
    C = 2.0 * c.real[np.newaxis, :]
    D = Omega @ cdc.real @ Omega.T
    Gamma = -c.imag[np.newaxis, :] @ Omega.T
    return A, C, D, Gamma


@dataclass(frozen=True)
class LinearGaussianModel:
    """Physical parameters and derived matrices of one monitored linear system.

    Use :meth:`build` (or :func:`position_monitored_oscillator`) rather than
    the raw constructor so the derived matrices stay consistent with the
    physical inputs. Instances are immutable and safe to share across threads.
    """

    n_modes: int
    G: NDArray[np.float64]
    B: NDArray[np.float64]
    C_tilde: NDArray[np.complex128]
    eta: float
    Omega: NDArray[np.float64] = field(repr=False)
    A: NDArray[np.float64] = field(repr=False)
    C: NDArray[np.float64] = field(repr=False)
    D: NDArray[np.float64] = field(repr=False)
    Gamma: NDArray[np.float64] = field(repr=False)

    @classmethod
    def build(
        cls,
        G: np.ndarray,
        B: np.ndarray,
        C_tilde: np.ndarray,
        eta: float = 1.0,
    ) -> "LinearGaussianModel":
        G = np.asarray(G, dtype=float)
        n_modes = G.shape[0] // 2 if G.ndim == 2 else 0
        if n_modes < 1:
            raise ValidationError(f"G must be at least 2x2, got shape {G.shape}")
        if not 0.0 <= eta <= 1.0:
            raise ValidationError(f"eta must be in [0, 1], got {eta}")
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, np.newaxis]
        if B.shape[0] != 2 * n_modes:
            raise ValidationError(
                f"B must have {2 * n_modes} rows, got shape {B.shape}"
            )
        Omega = symplectic_form(n_modes)
        A, C, D, Gamma = derive_dynamics_matrices(G, C_tilde, Omega)
        c_row = np.asarray(C_tilde, dtype=complex).reshape(1, -1)
        return cls(
            n_modes=n_modes,
            G=_readonly(G),
            B=_readonly(B),
            C_tilde=_readonly(c_row),
            eta=float(eta),
            Omega=_readonly(Omega),
            A=_readonly(A),
            C=_readonly(C),
            D=_readonly(D),
            Gamma=_readonly(Gamma),
        )

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    @property
    def n_drives(self) -> int:
        return self.B.shape[1]

    @property
    def kappa(self) -> float:
        """Measurement-channel rate, |C̃|^2 / 2 (equals kappa for C̃ = (sqrt(2k), 0))."""
        return float(np.real(np.vdot(self.C_tilde, self.C_tilde)) / 2.0)


def position_monitored_oscillator(
    omega_a: float,
    kappa: float,
    eta: float = 1.0,
) -> LinearGaussianModel:
    """Single mode with H = (omega_a/4)(x^2 + p^2) + u(t) x and L0 = sqrt(2 kappa) x.

    G = (omega_a/2) I so that (1/2) Xᵀ G X reproduces the Hamiltonian, and
    B = (0, -1)ᵀ so the mean drift obeys Hamilton's equations (d<p> = -u dt).
    """
    if kappa < 0:
        raise ValidationError(f"kappa must be nonnegative, got {kappa}")
    G = (omega_a / 2.0) * np.eye(2)
    B = np.array([0.0, -1.0])
    C_tilde = np.array([np.sqrt(2.0 * kappa), 0.0], dtype=complex)
    return LinearGaussianModel.build(G=G, B=B, C_tilde=C_tilde, eta=eta)


def _check_cov(cov: np.ndarray, name: str) -> None:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {cov.shape}")
    asym = np.abs(cov - cov.T).max() if cov.size else 0.0
    if asym > _SYM_TOL:
        raise ValidationError(f"{name} asymmetry {asym:.2e} exceeds {_SYM_TOL}")
    if np.linalg.eigvalsh(cov).min() < _PSD_TOL:
        raise ValidationError(f"{name} has eigenvalue below {_PSD_TOL}")


@dataclass(frozen=True)
class GaussianState:
    """Mean vector <X> and covariance V of a forward-evolving Gaussian state."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValidationError(
                f"cov shape {cov.shape} does not match mean length {mean.shape[0]}"
            )
        _check_cov(cov, "cov")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "cov", _readonly(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class EffectState:
    """Backward-evolving measurement effect.

    mean is the effect location Y, info the information matrix P (inverse of
    the effect covariance, exactly zero at the terminal identity effect), and
    cov_approx the covariance U propagated from the large-nu terminal
    condition U(T) = nu * I.
    """

    mean: NDArray[np.float64]
    info: NDArray[np.float64]
    cov_approx: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        info = np.asarray(self.info, dtype=float)
        cov_approx = np.asarray(self.cov_approx, dtype=float)
        d = mean.shape[0]
        if info.shape != (d, d) or cov_approx.shape != (d, d):
            raise ValidationError(
                f"info {info.shape} / cov_approx {cov_approx.shape} "
                f"do not match mean length {d}"
            )
        _check_cov(info, "info")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "info", _readonly(info))
        object.__setattr__(self, "cov_approx", _readonly(0.5 * (cov_approx + cov_approx.T)))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class Impulse:
    """Square pulse of height s (1/ms) and width w (ms) centered at t_k (ms)."""

    center: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if self.width < 0:
            raise ValidationError(f"impulse width must be nonnegative, got {self.width}")
        if self.height < 0:
            raise ValidationError(f"impulse height must be nonnegative, got {self.height}")


@dataclass(frozen=True)
class DriveSignal:
    """Drive u(t) given by a train of square pulses; overlapping pulses add."""

    impulses: tuple[Impulse, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "impulses", tuple(self.impulses))

    @classmethod
    def from_impulses(cls, pulses) -> "DriveSignal":
        """Build from an iterable of Impulse or (center, width, height) triples."""
        out = []
        for p in pulses:
            out.append(p if isinstance(p, Impulse) else Impulse(*p))
        return cls(impulses=tuple(out))

    @property
    def centers(self) -> NDArray[np.float64]:
        return np.array([p.center for p in self.impulses])

    def value_at(self, t: float) -> float:
        """u(t): sum of the heights of all pulses whose support contains t."""
        u = 0.0
        for p in self.impulses:
            if abs(t - p.center) < p.width / 2.0:
                u += p.height
        return u

    def sample(self, t: np.ndarray) -> NDArray[np.float64]:
        """Vectorized u(t) on a time grid."""
        t = np.asarray(t, dtype=float)
        u = np.zeros_like(t)
        for p in self.impulses:
            u += np.where(np.abs(t - p.center) < p.width / 2.0, p.height, 0.0)
        return u


def drive_eval(signal: DriveSignal, t: float) -> float:
    """Evaluate the drive at one time point."""
    return signal.value_at(t)


def thermal_state(n_bar: float, n_modes: int = 1) -> GaussianState:
    """Zero-mean state with covariance (2 n_bar + 1) I."""
    if n_bar < 0:
        raise ValidationError(f"n_bar must be nonnegative, got {n_bar}")
    dim = 2 * n_modes
    return GaussianState(mean=np.zeros(dim), cov=(2.0 * n_bar + 1.0) * np.eye(dim))
