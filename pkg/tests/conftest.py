import numpy as np
import pytest

from gsmooth import _kernels, position_monitored_oscillator


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    # one-time JIT compilation so timed tests measure integration, not compilation
    _kernels.warmup()


@pytest.fixture()
def oscillator():
    return position_monitored_oscillator(omega_a=10.0, kappa=0.1, eta=1.0)


@pytest.fixture()
def rotation_model():
    # A = Omega exactly: G = I, no measurement channel
    from gsmooth import LinearGaussianModel

    return LinearGaussianModel.build(
        G=np.eye(2), B=np.array([0.0, -1.0]), C_tilde=np.zeros(2, dtype=complex),
    )
