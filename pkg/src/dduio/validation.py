"""Input checks for the estimator interface."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DimensionError
from .numkit import Tolerance


def check_signals(X, name: str = "X", min_samples: int = 1) -> np.ndarray:
    """Finite 2-D float array of time-major signals."""
    return check_array(
        X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples, input_name=name
    )


def split_io(X: np.ndarray, n_inputs: int) -> tuple[np.ndarray | None, np.ndarray]:
    """Split ``X = [u | y]`` column-wise; ``u`` is ``None`` when there are no inputs."""
    if X.shape[1] <= n_inputs:
        raise DimensionError(
            f"X has {X.shape[1]} columns but n_inputs = {n_inputs}; at least one output column is needed"
        )
    u = X[:-1, :n_inputs] if n_inputs else None
    return u, X[:, n_inputs:]


def check_count(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_poles(poles, n: int):
    """``None`` (deadbeat) or a sequence of ``n`` poles inside the unit disc."""
    if poles is None:
        return None
    poles = [complex(z) for z in np.ravel(np.asarray(poles, dtype=complex))]
    if len(poles) != n:
        raise ValueError(f"need {n} poles, got {len(poles)}")
    if any(abs(z) >= 1 for z in poles):
        raise ValueError(f"poles must lie inside the unit disc, got {poles}")
    return poles


def make_tolerance(rank_tol, residual_tol, stability_margin) -> Tolerance:
    return Tolerance(float(rank_tol), float(residual_tol), float(stability_margin))
