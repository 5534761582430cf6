import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dduio.ddcheck import DATA_PENCIL_CONDITION
from dduio.errors import DimensionError, NoUIOError
from dduio.estimator import DataDrivenUIO
from dduio.numkit import spectrum
from dduio.oracle import check_uio_conditions, random_experiment, random_system

from conftest import companion_system


def signals(traj):
    u = np.vstack([traj.u, np.zeros((1, traj.m))]) if traj.m else np.zeros((traj.T, 0))
    return np.hstack([u, traj.y]), traj.x


def test_params_and_clone():
    est = DataDrivenUIO(n_inputs=1, poles=[0.1, 0.2], random_state=3)
    params = est.get_params()
    assert params["n_inputs"] == 1 and params["poles"] == [0.1, 0.2] and params["random_state"] == 3
    twin = clone(est).set_params(budget=8)
    assert twin.budget == 8 and est.budget == 64


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        DataDrivenUIO().predict(np.zeros((3, 2)))


def test_fit_predict_on_example(example):
    X, states = signals(random_experiment(example, 20, seed=7))
    est = DataDrivenUIO().fit(X, states)
    np.testing.assert_allclose(est.C_, example.C, atol=1e-8)
    assert spectrum(est.uio_.A).spectral_radius <= 1e-8
    test = random_experiment(example, 15, seed=8, d_range=(-10, 10))
    Xt, xt = signals(test)
    xhat = est.predict(Xt)
    assert np.abs(xhat[3:] - xt[3:]).max() <= 1e-9
    exact = est.predict(Xt, z0=est.initial_state(xt[0], test.y[0]))
    assert np.abs(exact - xt).max() <= 1e-9


def test_fit_with_inputs_and_poles():
    S = random_system(3, 2, 2, 1, seed=21)
    X, states = signals(random_experiment(S, 30, seed=1))
    est = DataDrivenUIO(n_inputs=2, poles=[0.3, -0.2, 0.1]).fit(X, states)
    assert est.n_features_in_ == 4
    assert check_uio_conditions(S, est.uio_).passed
    eigs = np.sort(np.linalg.eigvals(est.uio_.A).real)
    np.testing.assert_allclose(eigs, [-0.2, 0.1, 0.3], atol=1e-6)
    with pytest.raises(DimensionError):
        est.predict(X[:, 1:])


def test_fit_without_observer_keeps_report():
    X, states = signals(random_experiment(companion_system(-2.0, 1.0), 12, seed=0))
    est = DataDrivenUIO()
    with pytest.raises(NoUIOError) as info:
        est.fit(X, states)
    assert DATA_PENCIL_CONDITION in info.value.violated
    assert not est.report_.exists and not hasattr(est, "uio_")


@pytest.mark.parametrize(
    "params",
    [{"n_inputs": -1}, {"n_disturbances": 0}, {"budget": 1.5}, {"poles": [0.1]}, {"poles": [1.0, 0.0, 0.0]}],
)
def test_invalid_params(example, params):
    X, states = signals(random_experiment(example, 20, seed=7))
    with pytest.raises(ValueError):
        DataDrivenUIO(**params).fit(X, states)


def test_rejects_mismatched_and_nonfinite_signals(example):
    X, states = signals(random_experiment(example, 20, seed=7))
    with pytest.raises(DimensionError):
        DataDrivenUIO().fit(X, states[:-1])
    X[3, 0] = np.nan
    with pytest.raises(ValueError):
        DataDrivenUIO().fit(X, states)
