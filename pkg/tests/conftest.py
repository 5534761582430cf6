import numpy as np
import pytest

from dduio.datamat import build_data_matrices
from dduio.oracle import example_system, random_experiment


@pytest.fixture
def example():
    return example_system()


@pytest.fixture
def example_dm(example):
    traj = random_experiment(example, 20, seed=7, d_range=(-2.0, 2.0))
    return build_data_matrices(traj, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def companion_system(c0, c1):
    """Two states, one disturbance, one output; the invariant zero sits at ``-c0 / c1``.

    With ``A`` in companion form and ``E = e2`` the transfer function is
    ``(c1 z + c0) / (z^2 - 0.5 z + 0.06)``, so the Rosenbrock determinant is
    ``c1 z + c0``.
    """
    from dduio.oracle import SystemModel

    A = np.array([[0.0, 1.0], [-0.06, 0.5]])
    return SystemModel(A=A, C=np.array([[c0, c1]]), E=np.array([[0.0], [1.0]]))
