"""Compiled inner loops for trajectory propagation.

All kernels operate on plain float64 arrays; the public wrappers in
`propagation` own validation, dataclasses, and error reporting. Status code
0 means success; k > 0 means the covariance/information matrix lost
positivity beyond tolerance at step k-1.

Eigenvalue policy per step: min eigenvalue < -1e-6 aborts, values in
(-1e-9, 0) are clipped to zero, the band between is left untouched.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EIG_ABORT = -1e-6
EIG_CLIP = -1e-9


@njit(cache=True)
def _sym(M):
    d = M.shape[0]
    for i in range(d):
        for j in range(i + 1, d):
            m = 0.5 * (M[i, j] + M[j, i])
            M[i, j] = m
            M[j, i] = m


@njit(cache=True)
def _min_eig_sym(M):
    d = M.shape[0]
    if d == 2:
        tr = M[0, 0] + M[1, 1]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            disc = 0.0
        return 0.5 * (tr - np.sqrt(disc))
    return np.linalg.eigvalsh(M)[0]


@njit(cache=True)
def _clip_psd(M):
    """Zero out negative eigenvalues (called only when slightly indefinite)."""
    w, v = np.linalg.eigh(M)
    d = M.shape[0]
    for k in range(d):
        if w[k] < 0.0:
            w[k] = 0.0
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += v[i, k] * w[k] * v[j, k]
            M[i, j] = s
    _sym(M)


@njit(cache=True)
def _posdef_step_check(M):
    """Returns False if M is beyond repair; clips tiny negatives in place."""
    ev = _min_eig_sym(M)
    if ev < EIG_ABORT:
        return False
    if EIG_CLIP < ev < 0.0:
        _clip_psd(M)
    return True


@njit(cache=True)
def _cov_rate_into(out, V, A, Cv, Gv, D, eta, g):
    """out = A V + V Aᵀ + D - eta (V Cᵀ + Γᵀ)(C V + Γ); g is scratch (d,).

    Backward covariance flow uses the same form with A -> -A, Γᵀ -> -Γᵀ.
    """
    d = V.shape[0]
    for i in range(d):
        s = Gv[i]
        for j in range(d):
            s += V[i, j] * Cv[j]
        g[i] = s
    for i in range(d):
        for j in range(d):
            av = 0.0
            va = 0.0
            for k in range(d):
                av += A[i, k] * V[k, j]
                va += V[i, k] * A[j, k]
            out[i, j] = av + va + D[i, j] - eta * g[i] * g[j]


@njit(cache=True)
def _info_rate_into(out, P, A, Cv, Gv, D, eta, w, PD):
    """out = P A + Aᵀ P - P D P + eta (Cᵀ - P Γᵀ)(C - Γ P); w, PD scratch."""
    d = P.shape[0]
    for i in range(d):
        s = Cv[i]
        for j in range(d):
            s -= P[i, j] * Gv[j]
        w[i] = s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += P[i, k] * D[k, j]
            PD[i, j] = s
    for i in range(d):
        for j in range(d):
            pa = 0.0
            ap = 0.0
            pdp = 0.0
            for k in range(d):
                pa += P[i, k] * A[k, j]
                ap += A[k, i] * P[k, j]
                pdp += PD[i, k] * P[k, j]
            out[i, j] = pa + ap - pdp + eta * w[i] * w[j]


@njit(cache=True)
def _rk4_cov_step(V, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, g):
    d = V.shape[0]
    _cov_rate_into(k1, V, A, Cv, Gv, D, eta, g)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = V[i, j] + 0.5 * dt * k1[i, j]
    _cov_rate_into(k2, tmp, A, Cv, Gv, D, eta, g)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = V[i, j] + 0.5 * dt * k2[i, j]
    _cov_rate_into(k3, tmp, A, Cv, Gv, D, eta, g)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = V[i, j] + dt * k3[i, j]
    _cov_rate_into(k4, tmp, A, Cv, Gv, D, eta, g)
    for i in range(d):
        for j in range(d):
            V[i, j] += (dt / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    _sym(V)


@njit(cache=True)
def _rk4_info_step(P, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, w, PD):
    d = P.shape[0]
    _info_rate_into(k1, P, A, Cv, Gv, D, eta, w, PD)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = P[i, j] + 0.5 * dt * k1[i, j]
    _info_rate_into(k2, tmp, A, Cv, Gv, D, eta, w, PD)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = P[i, j] + 0.5 * dt * k2[i, j]
    _info_rate_into(k3, tmp, A, Cv, Gv, D, eta, w, PD)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = P[i, j] + dt * k3[i, j]
    _info_rate_into(k4, tmp, A, Cv, Gv, D, eta, w, PD)
    for i in range(d):
        for j in range(d):
            P[i, j] += (dt / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    _sym(P)


@njit(cache=True)
def integrate_cov_kernel(V, A, Cv, Gv, D, eta, dt, n_steps):
    """RK4 flow of the covariance equation, in place. Returns failing step or 0."""
    d = V.shape[0]
    k1 = np.empty((d, d))
    k2 = np.empty((d, d))
    k3 = np.empty((d, d))
    k4 = np.empty((d, d))
    tmp = np.empty((d, d))
    g = np.empty(d)
    for step in range(n_steps):
        _rk4_cov_step(V, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, g)
        if not _posdef_step_check(V):
            return step + 1
    return 0


@njit(cache=True)
def reference_loop(mean, V, A, Bu, Cv, Gv, D, eta, dt, dW, sq8k,
                   out_means, out_covs, out_dI):
    """Reference trajectory: fresh noise dW drives the mean, dI is emitted.

    dI[i] = <x>(t_i) dt + dW[i]/sqrt(8 kappa); Euler-Maruyama mean update,
    RK4 covariance update per step. Arrays out_* must have length N+1 (dI: N).
    """
    d = mean.shape[0]
    n = dW.shape[0]
    k1 = np.empty((d, d)); k2 = np.empty((d, d)); k3 = np.empty((d, d))
    k4 = np.empty((d, d)); tmp = np.empty((d, d)); g = np.empty(d)
    new = np.empty(d)
    se = np.sqrt(eta)
    out_means[0] = mean
    out_covs[0] = V
    for i in range(n):
        out_dI[i] = mean[0] * dt + dW[i] / sq8k
        for r in range(d):
            s = Gv[r]
            for c in range(d):
                s += V[r, c] * Cv[c]
            g[r] = s
        for r in range(d):
            drift = Bu[i, r]
            for c in range(d):
                drift += A[r, c] * mean[c]
            new[r] = mean[r] + drift * dt + se * g[r] * dW[i]
        for r in range(d):
            mean[r] = new[r]
        _rk4_cov_step(V, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, g)
        if not _posdef_step_check(V):
            return i + 1
        out_means[i + 1] = mean
        out_covs[i + 1] = V
    return 0


@njit(cache=True)
def filter_loop(mean, V, A, Bu, Cv, Gv, D, eta, dt, dI, sq8k,
                out_means, out_covs):
    """Forward filter driven by innovations dW = (dI[i] - <x>(t_i) dt) sq8k."""
    d = mean.shape[0]
    n = dI.shape[0]
    k1 = np.empty((d, d)); k2 = np.empty((d, d)); k3 = np.empty((d, d))
    k4 = np.empty((d, d)); tmp = np.empty((d, d)); g = np.empty(d)
    new = np.empty(d)
    se = np.sqrt(eta)
    out_means[0] = mean
    out_covs[0] = V
    for i in range(n):
        dW = (dI[i] - mean[0] * dt) * sq8k
        for r in range(d):
            s = Gv[r]
            for c in range(d):
                s += V[r, c] * Cv[c]
            g[r] = s
        for r in range(d):
            drift = Bu[i, r]
            for c in range(d):
                drift += A[r, c] * mean[c]
            new[r] = mean[r] + drift * dt + se * g[r] * dW
        for r in range(d):
            mean[r] = new[r]
        _rk4_cov_step(V, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, g)
        if not _posdef_step_check(V):
            return i + 1
        out_means[i + 1] = mean
        out_covs[i + 1] = V
    return 0


@njit(cache=True)
def backward_loop(A, Bu, Cv, Gv, D, eta, dt, dI, sq8k, nu,
                  F11, F12, F21, F22, P_terminal,
                  out_Y, out_P, out_U):
    """Backward pass from t1 to t0, filling index i with the state at t_i.

    Per step (consuming dI[i], which covers [t_i, t_i+dt)):
      - Y: Euler-Maruyama with innovation noise; the innovation uses the
        post-step mean (dW = (dI - Y_1(t_i) dt) sq8k), which makes the stiff
        feedback through the huge near-terminal effect covariance implicit
        and reduces to a scalar linear solve.
      - U (cov_approx): exact matrix-fraction step U -> (F21 + F22 U)(F11 + F12 U)^-1
        of the backward covariance flow; stable from U(T) = nu I.
      - P (info): RK4 step of the information-matrix equation.
    The noise covariance for Y uses P^-1 where P is safely invertible
    (min eig > 1/(0.01 nu)) and the nu-propagated U otherwise.
    """
    d = A.shape[0]
    n = dI.shape[0]
    k1 = np.empty((d, d)); k2 = np.empty((d, d)); k3 = np.empty((d, d))
    k4 = np.empty((d, d)); tmp = np.empty((d, d)); w = np.empty(d); PD = np.empty((d, d))
    g = np.empty(d)
    yd = np.empty(d)
    se = np.sqrt(eta)
    inv_thresh = 1.0 / (0.01 * nu)

    Y = np.zeros(d)
    U = nu * np.eye(d)
    P = P_terminal.copy()
    out_Y[n] = Y
    out_U[n] = U
    out_P[n] = P
    for i in range(n - 1, -1, -1):
        # effect noise covariance for the mean update
        if _min_eig_sym(P) > inv_thresh:
            Ueff = np.linalg.inv(P)
        else:
            Ueff = U
        for r in range(d):
            s = -Gv[r]
            for c in range(d):
                s += Ueff[r, c] * Cv[c]
            g[r] = se * s
        # drift part of the backward mean increment
        for r in range(d):
            drift = Bu[i, r]
            for c in range(d):
                drift += A[r, c] * Y[c]
            yd[r] = Y[r] - drift * dt
        dW = sq8k * (dI[i] - yd[0] * dt) / (1.0 + sq8k * dt * g[0])
        for r in range(d):
            Y[r] = yd[r] + g[r] * dW
        # covariance via matrix fraction
        W1 = F11 + F12 @ U
        W2 = F21 + F22 @ U
        U = np.linalg.solve(W1.T, W2.T).T
        _sym(U)
        if not _posdef_step_check(U):
            return i + 1
        # information matrix via RK4
        _rk4_info_step(P, A, Cv, Gv, D, eta, dt, k1, k2, k3, k4, tmp, w, PD)
        if not _posdef_step_check(P):
            return -(i + 1)
        out_Y[i] = Y
        out_U[i] = U
        out_P[i] = P
    return 0


def warmup(dim: int = 2) -> None:
    """Compile the kernels for float64 inputs of the given dimension."""
    d = dim
    A = np.zeros((d, d))
    Cv = np.zeros(d)
    Gv = np.zeros(d)
    D = np.eye(d)
    V = np.eye(d)
    integrate_cov_kernel(V.copy(), A, Cv, Gv, D, 1.0, 1e-3, 1)
    Bu = np.zeros((1, d))
    dW = np.zeros(1)
    means = np.zeros((2, d))
    covs = np.zeros((2, d, d))
    dI = np.zeros(1)
    reference_loop(np.zeros(d), V.copy(), A, Bu, Cv, Gv, D, 1.0, 1e-3, dW, 1.0,
                   means, covs, dI)
    filter_loop(np.zeros(d), V.copy(), A, Bu, Cv, Gv, D, 1.0, 1e-3, dI, 1.0,
                means, covs)
    eye = np.eye(d)
    backward_loop(A, Bu, Cv, Gv, D, 1.0, 1e-3, dI, 1.0, 1e6,
                  eye, np.zeros((d, d)), np.zeros((d, d)), eye, np.zeros((d, d)),
                  np.zeros((2, d)), np.zeros((2, d, d)), np.zeros((2, d, d)))
