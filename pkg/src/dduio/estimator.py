"""scikit-learn style wrapper around the data-driven synthesis pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .datamat import Trajectory, build_data_matrices
from .ddsynth import synthesize
from .errors import DimensionError, NoUIOError
from .sim import acceptor_z0, run_observer
from .validation import check_count, check_poles, check_signals, make_tolerance, split_io


class DataDrivenUIO(RegressorMixin, BaseEstimator):
    """Unknown-input observer learned from one historical experiment.

    ``fit`` takes the measured signals ``X = [u | y]`` (time-major, the
    first ``n_inputs`` columns are known inputs) and the recorded states as
    target.  ``predict`` runs the observer on new signals and returns the
    state estimate.

    Parameters
    ----------
    n_inputs : int
        Number of known-input columns at the left of ``X``.
    n_disturbances : int
        Dimension ``r`` of the unknown input; never inferred.
    poles : sequence of complex or None
        Observer poles, one per state; ``None`` means deadbeat.
    budget : int
        Random draws allowed when searching the solution family.
    baseline : bool
        Skip pole placement (``T2 = 0`` on the minimum-norm solution).
    random_state : int
        Seed for the family search and the placement.
    rank_tol, residual_tol, stability_margin : float
        Numerical thresholds, see :class:`dduio.numkit.Tolerance`.

    Attributes
    ----------
    uio_ : UioRealization
    report_ : ExistenceReport
    solution_ : TSolution
    C_ : ndarray
        Output matrix recovered from the data.
    n_features_in_ : int
    """

    def __init__(
        self,
        n_inputs: int = 0,
        n_disturbances: int = 1,
        poles=None,
        budget: int = 64,
        baseline: bool = False,
        random_state: int = 0,
        rank_tol: float = 1e-9,
        residual_tol: float = 1e-8,
        stability_margin: float = 1e-8,
    ):
        self.n_inputs = n_inputs
        self.n_disturbances = n_disturbances
        self.poles = poles
        self.budget = budget
        self.baseline = baseline
        self.random_state = random_state
        self.rank_tol = rank_tol
        self.residual_tol = residual_tol
        self.stability_margin = stability_margin

    def fit(self, X, y):
        """Synthesize the observer.

        Raises:
            NoUIOError: the data show that no observer exists; ``report_``
                is still set so the evidence can be inspected.
        """
        m = check_count(self.n_inputs, "n_inputs")
        r = check_count(self.n_disturbances, "n_disturbances", 1)
        budget = check_count(self.budget, "budget")
        tol = make_tolerance(self.rank_tol, self.residual_tol, self.stability_margin)
        X = check_signals(X, "X", min_samples=2)
        states = check_signals(y, "y", min_samples=2)
        if states.shape[0] != X.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} samples, y has {states.shape[0]}")
        u, outputs = split_io(X, m)
        poles = check_poles(self.poles, states.shape[1])
        dm = build_data_matrices(Trajectory(x=states, y=outputs, u=u), r)
        result = synthesize(dm, r, poles, tol, budget, int(self.random_state), bool(self.baseline))
        self.report_ = result.report
        if result.uio is None:
            raise NoUIOError("no unknown-input observer exists for these data", result.report.violated)
        self.uio_ = result.uio
        self.solution_ = result.solution
        self.C_ = result.C
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, z0=None):
        """State estimates ``xhat`` (``T x n``) for signals ``X = [u | y]``.

        ``z0`` is the initial observer state (zero by default).
        """
        check_is_fitted(self, "uio_")
        X = check_signals(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} columns, the observer was fitted on {self.n_features_in_}")
        u, outputs = split_io(X, self.n_inputs)
        _, xhat = run_observer(self.uio_, outputs, u, z0)
        return xhat

    def initial_state(self, x0, y0) -> np.ndarray:
        """Observer state ``x0 - D y0`` that makes the estimate exact from the start."""
        check_is_fitted(self, "uio_")
        return acceptor_z0(self.uio_, x0, y0)
