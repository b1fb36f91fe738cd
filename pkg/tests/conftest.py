import numpy as np
import pytest

from tpc import TrajectoryData, build_hankel
from tpc.simbench import collect_training_data, derive_rng, double_integrator_plant


@pytest.fixture(scope="session")
def di_plant():
    return double_integrator_plant()


@pytest.fixture(scope="session")
def di_closed_data(di_plant):
    """Closed-loop double-integrator dataset, d=300."""
    return collect_training_data("closed", 300, derive_rng(1234, "fixture-closed"), plant=di_plant)


@pytest.fixture(scope="session")
def di_hankel(di_closed_data):
    return build_hankel(di_closed_data, 2, 10)


def make_lti_data(rng, d=200, noise_std=0.0):
    """Stable second-order SISO system driven by white noise.

    With noise_std=0 the data is exactly noiseless; memory m=2 keeps the
    stacked regressors full row rank (m*n_y never exceeds the state order).
    """
    A = np.array([[0.9, 0.2], [0.0, 0.7]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    u = rng.standard_normal((d, 1))
    x = np.zeros(2)
    ys = np.zeros((d, 1))
    for t in range(d):
        ys[t] = C @ x + noise_std * rng.standard_normal(1)
        x = A @ x + B @ u[t]
    return TrajectoryData(inputs=u, outputs=ys)


@pytest.fixture()
def lti_data():
    return make_lti_data(np.random.default_rng(0), d=200, noise_std=0.0)


@pytest.fixture()
def lti_data_dither():
    # tiny dither keeps the transient predictor's intermediate-output rows
    # linearly independent, which exactly noiseless data cannot do
    return make_lti_data(np.random.default_rng(0), d=200, noise_std=1e-9)
