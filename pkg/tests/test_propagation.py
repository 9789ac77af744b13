import numpy as np
import pytest
from scipy.linalg import expm, solve_continuous_are

from gsmooth import (
    DriveSignal,
    EffectState,
    GaussianState,
    Impulse,
    LinearGaussianModel,
    MeasurementRecord,
    NumericalInstabilityError,
    ValidationError,
    backward_cov_rate,
    backward_effect_step,
    backward_information_step,
    forward_cov_rate,
    forward_step,
    info_rate,
    innovation,
    integrate_covariance,
    position_monitored_oscillator,
    run_backward,
    run_forward_filter,
    simulate_reference,
    thermal_state,
)


def stationary_cov_oracle(model):
    """Forward steady state via the algebraic Riccati equation (scipy)."""
    return solve_continuous_are(
        model.A.T, model.C.T, model.D, np.array([[1.0 / model.eta]])
    )


def stationary_info_oracle(model):
    """Fixed point of the information-matrix flow via the Riccati equation."""
    # info flow (Gamma = 0): P A + Aᵀ P - P D P + eta Cᵀ C = 0
    w, v = np.linalg.eigh(model.D)
    b = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    return solve_continuous_are(model.A, b, model.eta * (model.C.T @ model.C), np.eye(model.dim))


class TestForwardStep:
    def test_rotation_drift(self, rotation_model):
        state = GaussianState(mean=[1.0, 0.0], cov=np.eye(2))
        out = forward_step(state, rotation_model, u=0.0, dW=0.0, dt=0.01)
        assert np.allclose(out.mean, [1.0, -0.01], atol=1e-15)

    def test_covariance_rate_by_hand(self):
        # kappa = 0.5, G = I: rate at V = I is diag(-4, 1)
        model = LinearGaussianModel.build(
            G=np.eye(2), B=np.zeros(2),
            C_tilde=np.array([1.0, 0.0], dtype=complex), eta=1.0,
        )
        assert np.allclose(model.D, np.diag([0.0, 1.0]))
        rate = forward_cov_rate(np.eye(2), model)
        assert np.allclose(rate, np.diag([-4.0, 1.0]), atol=1e-12)

    def test_unmonitored_reduces_to_lyapunov(self, rotation_model):
        V = np.array([[2.0, 0.3], [0.3, 1.0]])
        rate = forward_cov_rate(V, rotation_model)
        A = rotation_model.A
        assert np.allclose(rate, A @ V + V @ A.T, atol=1e-14)

    def test_rate_is_symmetric(self, oscillator):
        rng = np.random.default_rng(5)
        for _ in range(10):
            M = rng.normal(size=(2, 2))
            V = M @ M.T
            rate = forward_cov_rate(V, oscillator)
            assert np.abs(rate - rate.T).max() < 1e-6

    def test_instability_raises(self):
        model = position_monitored_oscillator(10.0, 100.0)
        state = GaussianState(mean=np.zeros(2), cov=np.eye(2))
        with pytest.raises(NumericalInstabilityError):
            forward_step(state, model, u=0.0, dW=0.0, dt=0.01)

    def test_unmonitored_rotation_matches_matrix_exponential(self, rotation_model):
        dt, n = 1e-4, 5000
        state = GaussianState(mean=[1.0, 0.0], cov=np.eye(2))
        for _ in range(n):
            state = forward_step(state, rotation_model, u=0.0, dW=0.0, dt=dt)
        exact = expm(rotation_model.A * (dt * n)) @ np.array([1.0, 0.0])
        # Euler-Maruyama mean drift is first order: global error O(dt)
        assert np.abs(state.mean - exact).max() < 50 * dt


class TestBackwardSteps:
    def test_effect_drift(self, rotation_model):
        effect = EffectState(mean=[1.0, 0.0], info=np.zeros((2, 2)), cov_approx=np.zeros((2, 2)))
        out = backward_effect_step(effect, rotation_model, u=0.0, dW=0.0, dt=0.01)
        assert np.allclose(out.mean, [1.0, 0.01], atol=1e-15)

    def test_diffusion_injection_at_zero_cov(self, oscillator):
        dt = 1e-4
        effect = EffectState(mean=np.zeros(2), info=np.zeros((2, 2)), cov_approx=np.zeros((2, 2)))
        out = backward_effect_step(effect, oscillator, u=0.0, dW=0.0, dt=dt)
        assert np.allclose(out.cov_approx, oscillator.D * dt, atol=1e-8)

    def test_noise_linearity(self, oscillator):
        U = 0.7 * np.eye(2)
        effect = EffectState(mean=[0.5, -0.2], info=np.linalg.inv(U), cov_approx=U)
        base = backward_effect_step(effect, oscillator, 0.0, 0.0, 1e-3).mean
        one = backward_effect_step(effect, oscillator, 0.0, 0.03, 1e-3).mean
        two = backward_effect_step(effect, oscillator, 0.0, 0.06, 1e-3).mean
        assert np.allclose(two - base, 2.0 * (one - base), atol=1e-12)

    def test_info_step_from_zero(self, oscillator):
        dt = 1e-3
        P = backward_information_step(np.zeros((2, 2)), oscillator, dt)
        # rate at P = 0 is eta Cᵀ C = diag(8 kappa, 0)
        assert np.allclose(P, np.diag([0.8 * dt, 0.0]), atol=5e-6)
        assert np.allclose(info_rate(np.zeros((2, 2)), oscillator),
                           np.diag([0.8, 0.0]), atol=1e-14)

    def test_info_stationary_point_matches_riccati_oracle(self, oscillator):
        P = np.zeros((2, 2))
        for _ in range(80000):
            P = backward_information_step(P, oscillator, 1e-3)
        assert np.linalg.norm(info_rate(P, oscillator)) < 1e-8
        assert np.allclose(P, stationary_info_oracle(oscillator), atol=1e-6)

    def test_backward_cov_rate_sign(self, oscillator):
        # at U = 0 the backward flow injects diffusion at rate D
        assert np.allclose(backward_cov_rate(np.zeros((2, 2)), oscillator), oscillator.D)


class TestInnovation:
    def test_perfect_prediction(self):
        dt = 1e-3
        assert innovation(0.5 * dt, 0.5, dt, kappa=2.0) == 0.0

    def test_arithmetic(self):
        assert abs(innovation(0.0, 1.0, 1e-3, kappa=2.0) - (-0.004)) < 1e-15

    def test_kappa_positive_required(self):
        with pytest.raises(ValidationError):
            innovation(0.0, 0.0, 1e-3, kappa=0.0)


class TestSimulateReference:
    def test_record_identity(self, oscillator):
        traj, record = simulate_reference(
            oscillator, thermal_state(5.0), None, dt=1e-3, t1=1.0, rng_seed=42)
        sq8k = np.sqrt(8 * oscillator.kappa)
        expected = traj.mean[:-1, 0] * record.dt + record.dW_true / sq8k
        assert np.allclose(record.dI, expected, atol=1e-15)

    def test_record_arithmetic_example(self):
        # <x> = 0.5, dt = 1e-3, dW = 0.02, kappa = 2: dI = 5e-4 + 0.02/4
        kappa, dt, x, dW = 2.0, 1e-3, 0.5, 0.02
        dI = x * dt + dW / np.sqrt(8 * kappa)
        assert abs(dI - 0.0055) < 1e-15

    def test_determinism(self, oscillator):
        a = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 2.0, 7)[1]
        b = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 2.0, 7)[1]
        assert np.array_equal(a.dI, b.dI)
        assert np.array_equal(a.dW_true, b.dW_true)

    def test_kappa_required(self, rotation_model):
        with pytest.raises(ValidationError):
            simulate_reference(rotation_model, thermal_state(0.0), None, 1e-3, 1.0, 0)

    def test_mean_response_linearity(self, oscillator):
        u1 = DriveSignal((Impulse(0.5, 0.1, 20.0),))
        u2 = DriveSignal((Impulse(1.2, 0.2, 10.0),))
        both = DriveSignal(u1.impulses + u2.impulses)
        runs = {}
        for key, drive in [("0", None), ("1", u1), ("2", u2), ("12", both)]:
            traj, _ = simulate_reference(
                oscillator, thermal_state(5.0), drive, 1e-3, 2.0, rng_seed=11)
            runs[key] = traj.mean
        lhs = runs["12"] - runs["0"]
        rhs = (runs["1"] - runs["0"]) + (runs["2"] - runs["0"])
        assert np.abs(lhs - rhs).max() < 1e-9


class TestForwardFilter:
    def test_zero_length_record(self, oscillator):
        record = MeasurementRecord(dt=1e-3, t0=0.0, t1=0.0, dI=np.empty(0))
        init = thermal_state(3.0)
        traj = run_forward_filter(oscillator, init, None, record)
        assert traj.mean.shape == (1, 2)
        assert np.array_equal(traj.mean[0], init.mean)
        assert np.array_equal(traj.cov[0], init.cov)

    def test_reproduces_reference(self, oscillator):
        init = thermal_state(5.0)
        ref, record = simulate_reference(oscillator, init, None, 1e-3, 6.0, 3)
        filt = run_forward_filter(oscillator, init, None, record)
        assert np.abs(filt.mean[:, 0] - ref.mean[:, 0]).max() < 1e-9
        # innovations recover the true Wiener increments
        innov = (record.dI - filt.mean[:-1, 0] * record.dt) * np.sqrt(8 * oscillator.kappa)
        assert np.abs(innov - record.dW_true).max() < 1e-10

    def test_single_step_composition(self, oscillator):
        record = MeasurementRecord(dt=1e-3, t0=0.0, t1=1e-3, dI=np.array([0.004]))
        init = thermal_state(2.0)
        traj = run_forward_filter(oscillator, init, None, record)
        dW = innovation(record.dI[0], init.mean[0], record.dt, oscillator.kappa)
        manual = forward_step(init, oscillator, 0.0, dW, record.dt)
        assert np.allclose(traj.mean[1], manual.mean, atol=1e-13)
        assert np.allclose(traj.cov[1], manual.cov, atol=1e-13)

    def test_covariance_noise_independent(self, oscillator):
        a, ra = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 1.0, 1)
        b, rb = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 1.0, 2)
        assert np.array_equal(a.cov, b.cov)
        fa = run_forward_filter(oscillator, thermal_state(3.0), None, ra)
        fb = run_forward_filter(oscillator, thermal_state(3.0), None, rb)
        assert np.array_equal(fa.cov, fb.cov)

    def test_steady_state_residual(self, oscillator):
        V = integrate_covariance(oscillator, thermal_state(5.0).cov, 1e-3, 200_000)
        assert np.linalg.norm(forward_cov_rate(V, oscillator)) < 1e-6
        assert np.allclose(V, stationary_cov_oracle(oscillator), atol=1e-6)

    def test_symmetry_after_steps(self, oscillator):
        _, record = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 1.0, 9)
        traj = run_forward_filter(oscillator, thermal_state(3.0), None, record)
        asym = np.abs(traj.cov - np.swapaxes(traj.cov, 1, 2)).max()
        assert asym < 1e-10


class TestRunBackward:
    def test_terminal_conditions(self, oscillator):
        _, record = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 2.0, 5)
        eff = run_backward(oscillator, None, record, nu=1e6)
        assert np.array_equal(eff.mean[-1], np.zeros(2))
        assert np.array_equal(eff.info[-1], np.zeros((2, 2)))
        assert np.array_equal(eff.cov_approx[-1], 1e6 * np.eye(2))

    def test_information_covariance_duality_at_t0(self, oscillator):
        _, record = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 6.0, 5)
        eff = run_backward(oscillator, None, record, nu=1e6)
        U0 = eff.cov_approx[0]
        P0inv = np.linalg.inv(eff.info[0])
        assert np.abs(P0inv - U0).max() / np.abs(U0).max() < 1e-3

    def test_zero_record_keeps_effect_mean_at_zero(self, oscillator):
        record = MeasurementRecord(dt=1e-3, t0=0.0, t1=1.0, dI=np.zeros(1000))
        eff = run_backward(oscillator, None, record, nu=1e6)
        assert np.abs(eff.mean).max() == 0.0

    def test_stored_mean_satisfies_innovation_identity(self, oscillator):
        # dW_B(t) = (dI(t) - Y_1(t) dt) sq8k reproduces the effect-mean update
        _, record = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 2.0, 13)
        eff = run_backward(oscillator, None, record, nu=1e6)
        i = 700
        state = EffectState(mean=eff.mean[i + 1], info=eff.info[i + 1],
                            cov_approx=eff.cov_approx[i + 1])
        dW = innovation(record.dI[i], eff.mean[i, 0], record.dt, oscillator.kappa)
        nu = eff.nu
        safe = np.linalg.eigvalsh(eff.info[i + 1]).min() > 1.0 / (0.01 * nu)
        y_cov = np.linalg.inv(eff.info[i + 1]) if safe else eff.cov_approx[i + 1]
        stepped = backward_effect_step(state, oscillator, 0.0, dW, record.dt, y_noise_cov=y_cov)
        assert np.allclose(stepped.mean, eff.mean[i], atol=1e-10)

    def test_riccati_matrices_noise_independent(self, oscillator):
        _, ra = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 1.0, 21)
        _, rb = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 1.0, 22)
        ea = run_backward(oscillator, None, ra)
        eb = run_backward(oscillator, None, rb)
        assert np.array_equal(ea.info, eb.info)
        assert np.array_equal(ea.cov_approx, eb.cov_approx)


class TestMeasurementRecordCsv:
    def test_round_trip(self, oscillator, tmp_path):
        _, record = simulate_reference(oscillator, thermal_state(5.0), None, 1e-3, 0.5, 3)
        path = tmp_path / "record.csv"
        record.to_csv(path)
        back = MeasurementRecord.from_csv(path)
        assert back.n_steps == record.n_steps
        assert np.allclose(back.dI, record.dI, atol=0.0)
        assert np.allclose(back.dW_true, record.dW_true, atol=0.0)
        header = path.read_text().splitlines()[0]
        assert header == "t,dI,dW_true"

    def test_length_validation(self):
        with pytest.raises(ValidationError):
            MeasurementRecord(dt=1e-3, t0=0.0, t1=1.0, dI=np.zeros(5))


class TestTwoModeSystem:
    def _model(self, coupling=0.8):
        # two modes at different frequencies, position of mode 1 monitored
        G = np.diag([5.0, 5.0, 1.5, 1.5])
        for i, j in ((0, 2), (2, 0), (1, 3), (3, 1)):
            G[i, j] = coupling
        B = np.array([0.0, -1.0, 0.0, 0.0])
        C_tilde = np.array([np.sqrt(0.2), 0.0, 0.0, 0.0], dtype=complex)
        return LinearGaussianModel.build(G=G, B=B, C_tilde=C_tilde)

    def test_shapes_and_symmetry(self):
        model = self._model()
        assert model.dim == 4
        init = thermal_state(2.0, n_modes=2)
        ref, record = simulate_reference(model, init, None, 1e-3, 0.5, 31)
        assert ref.mean.shape == (501, 4)
        assert ref.cov.shape == (501, 4, 4)
        asym = np.abs(ref.cov - np.swapaxes(ref.cov, 1, 2)).max()
        assert asym < 1e-10

    def test_filter_reproduces_reference_two_modes(self):
        model = self._model()
        init = thermal_state(2.0, n_modes=2)
        ref, record = simulate_reference(model, init, None, 1e-3, 1.0, 37)
        filt = run_forward_filter(model, init, None, record)
        assert np.abs(filt.mean - ref.mean).max() < 1e-9

    def test_backward_duality_two_modes(self):
        model = self._model()
        _, record = simulate_reference(model, thermal_state(2.0, n_modes=2),
                                       None, 1e-3, 6.0, 41)
        eff = run_backward(model, None, record, nu=1e6)
        U0 = eff.cov_approx[0]
        P0inv = np.linalg.inv(eff.info[0])
        assert np.abs(P0inv - U0).max() / np.abs(U0).max() < 1e-3

    def test_uncoupled_mode_gains_no_information(self):
        model = self._model(coupling=0.0)
        _, record = simulate_reference(model, thermal_state(2.0, n_modes=2),
                                       None, 1e-3, 2.0, 43)
        eff = run_backward(model, None, record, nu=1e6)
        # the record never informs the decoupled second mode
        assert np.abs(eff.info[0][2:, :]).max() < 1e-12
        assert np.abs(eff.cov_approx[0][2:, 2:] - 1e6 * np.eye(2)).max() < 2.0


class TestRecordCsvWithoutNoise:
    def test_round_trip_di_only(self, oscillator, tmp_path):
        record = MeasurementRecord(dt=1e-3, t0=0.0, t1=0.01,
                                   dI=np.linspace(0, 1e-3, 10))
        path = tmp_path / "record.csv"
        record.to_csv(path)
        assert path.read_text().splitlines()[0] == "t,dI"
        back = MeasurementRecord.from_csv(path)
        assert back.dW_true is None
        assert np.array_equal(back.dI, record.dI)
