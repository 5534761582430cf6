"""Plant/observer simulation, estimation-error experiments and disturbance signals."""

from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, InvalidUIOError, TrajectoryFormatError
from .numkit import DEFAULT_TOL, Tolerance, norm2
from .oracle import SystemModel, UioRealization, check_uio_conditions, simulate_system


def _series(values, rows: int, cols: int, name: str) -> np.ndarray:
    if cols == 0:
        return np.zeros((rows, 0))
    if values is None:
        raise DimensionError(f"{name} is required ({cols} channels)")
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if cols == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} channels, got shape {arr.shape}")
    if arr.shape[0] < rows:
        raise DimensionError(f"{name} needs at least {rows} samples, got {arr.shape[0]}")
    return arr[:rows]


def run_observer(U: UioRealization, y, u=None, z0=None) -> tuple[np.ndarray, np.ndarray]:
    """Run ``z+ = A z + B_u u + B_y y``, ``xhat = z + D y`` over the samples of ``y``.

    ``y`` is time-major with ``T`` rows; ``u`` needs ``T - 1`` rows (extra
    rows are ignored).  ``z0`` defaults to zero.  Returns ``(z, xhat)``,
    both ``T x n``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1) if U.p == 1 else y.reshape(1, -1)
    if y.ndim != 2 or y.shape[1] != U.p:
        raise DimensionError(f"y must have {U.p} channels, got shape {y.shape}")
    T = y.shape[0]
    u = _series(u, max(T - 1, 0), U.m, "u")
    z = np.zeros((T, U.n))
    if z0 is not None:
        z0 = np.asarray(z0, dtype=float).reshape(-1)
        if z0.shape[0] != U.n:
            raise DimensionError(f"z0 has {z0.shape[0]} entries, observer order is {U.n}")
        z[0] = z0
    for t in range(T - 1):
        z[t + 1] = U.A @ z[t] + U.B_u @ u[t] + U.B_y @ y[t]
    xhat = z + y @ U.D.T
    return z, xhat


def acceptor_z0(U: UioRealization, x0, y0) -> np.ndarray:
    """``z(0) = x(0) - D y(0)``: the observer then reproduces the state exactly."""
    return np.asarray(x0, dtype=float).reshape(-1) - U.D @ np.asarray(y0, dtype=float).reshape(-1)


class ErrorTrajectory(NamedTuple):
    e: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    d: np.ndarray


def error_experiment(
    S: SystemModel,
    U: UioRealization,
    x0,
    z0,
    d,
    u=None,
    T: int = 50,
    tol: Tolerance = DEFAULT_TOL,
) -> ErrorTrajectory:
    """Simulate plant and observer together; ``e = x - xhat`` is ``T x n``.

    Raises:
        InvalidUIOError: ``U`` fails the observer conditions for ``S``, so
            the error would not evolve autonomously.
    """
    report = check_uio_conditions(S, U, tol)
    if not report.passed:
        raise InvalidUIOError(
            "observer is not valid for this system: "
            f"schur={report.schur}, decoupling={report.decoupling:.3g}, "
            f"input map={report.input_map:.3g}, state map={report.state_map:.3g}"
        )
    d = _series(d, T - 1, S.r, "d")
    u = _series(u, T - 1, S.m, "u") if S.m else None
    traj = simulate_system(S, x0, u, d, T)
    _, xhat = run_observer(U, traj.y, traj.u, z0)
    return ErrorTrajectory(traj.x - xhat, traj.x, xhat, d)


def decay_ratios(e) -> np.ndarray:
    """``||e(t+1)|| / ||e(t)||`` for ``t = 0..T-2`` (``nan`` where ``e(t) = 0``)."""
    norms = np.linalg.norm(np.asarray(e, dtype=float), axis=1)
    ratios = np.full(max(norms.size - 1, 0), np.nan)
    live = norms[:-1] > 0
    ratios[live] = norms[1:][live] / norms[:-1][live]
    return ratios


def convergence_constant(A_uio, horizon: int, tol: Tolerance = DEFAULT_TOL) -> float:
    """Smallest ``kappa`` with ``||A^t|| <= kappa * rho^t`` for ``t <= horizon``,
    where ``rho`` is the spectral radius plus ``stability_margin``."""
    A_uio = np.asarray(A_uio, dtype=float)
    rho = float(np.max(np.abs(np.linalg.eigvals(A_uio)))) + tol.stability_margin
    P = np.eye(A_uio.shape[0])
    kappa = 1.0
    for t in range(1, horizon + 1):
        P = P @ A_uio
        kappa = max(kappa, norm2(P) / rho**t)
    return kappa


def disturbance_gen(
    kind: str,
    r: int,
    length: int,
    seed=None,
    low: float = -2.0,
    high: float = 2.0,
    path=None,
) -> np.ndarray:
    """Time-major ``length x r`` disturbance sequence.

    ``kind`` is ``"uniform"`` (on ``[low, high)``), ``"zero"`` or ``"file"``
    (a CSV with one column per channel; a header row is skipped and, when
    present, columns named ``d1..dr`` are used).
    """
    if r < 0 or length < 0:
        raise ValueError(f"r and length must be nonnegative, got r={r}, length={length}")
    if kind == "zero":
        return np.zeros((length, r))
    if kind == "uniform":
        if not (np.isfinite(low) and np.isfinite(high) and low < high):
            raise ValueError(f"uniform range needs low < high, got ({low}, {high})")
        return np.random.default_rng(seed).uniform(low, high, size=(length, r))
    if kind == "file":
        if path is None:
            raise ValueError("kind 'file' needs a path")
        return _read_disturbance_file(path, r, length)
    raise ValueError(f"unknown disturbance kind {kind!r}; use uniform, zero or file")


def _read_disturbance_file(path, r: int, length: int) -> np.ndarray:
    try:
        with Path(path).open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if any(c.strip() for c in row)]
    except OSError as exc:
        raise TrajectoryFormatError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise TrajectoryFormatError(f"{path} is empty")
    cols = list(range(len(rows[0])))
    first = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header = [c.strip() for c in rows[0]]
        named = [f"d{i + 1}" for i in range(r)]
        if all(name in header for name in named):
            cols = [header.index(name) for name in named]
        first = 1
    if len(cols) != r:
        raise TrajectoryFormatError(f"{path}: expected {r} disturbance columns, found {len(cols)}")
    body = rows[first:]
    if len(body) < length:
        raise TrajectoryFormatError(f"{path}: need {length} samples, found {len(body)}")
    out = np.zeros((length, r))
    for t, row in enumerate(body[:length]):
        for j, c in enumerate(cols):
            try:
                out[t, j] = float(row[c])
            except (ValueError, IndexError):
                raise TrajectoryFormatError("cannot parse disturbance value", row=t + first + 1, column=c + 1) from None
            if not np.isfinite(out[t, j]):
                raise TrajectoryFormatError("non-finite disturbance value", row=t + first + 1, column=c + 1)
    return out


_UNIFORM = re.compile(r"uniform\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)")


def parse_disturbance(text: str, r: int, length: int, seed=None) -> np.ndarray:
    """Disturbance from a short description: ``zero``, ``uniform(a,b)`` or ``file:PATH``."""
    text = text.strip()
    if text == "zero":
        return disturbance_gen("zero", r, length)
    if text.startswith("file:"):
        return disturbance_gen("file", r, length, path=text[5:])
    match = _UNIFORM.fullmatch(text)
    if match:
        try:
            low, high = float(match.group(1)), float(match.group(2))
        except ValueError:
            raise ValueError(f"bad uniform range in {text!r}") from None
        return disturbance_gen("uniform", r, length, seed=seed, low=low, high=high)
    raise ValueError(f"cannot parse disturbance description {text!r}; use zero, uniform(a,b) or file:PATH")


def write_error_csv(e, path, comment: str | None = None) -> None:
    """Write ``t, e1..en`` with 12 significant digits to a path or text
    stream; ``comment`` becomes a leading ``#`` line."""
    e = np.asarray(e, dtype=float)
    if hasattr(path, "write"):
        _write_error_rows(e, path, comment)
        return
    with Path(path).open("w", newline="") as fh:
        _write_error_rows(e, fh, comment)


def _write_error_rows(e: np.ndarray, fh, comment: str | None) -> None:
    if comment:
        fh.write(f"# {comment}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t"] + [f"e{i + 1}" for i in range(e.shape[1])])
    for t, row in enumerate(e):
        writer.writerow([t] + [f"{v:.12g}" for v in row])
