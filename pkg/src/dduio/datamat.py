"""Historical trajectories and the past/future data matrices built from them."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError, TrajectoryFormatError
from .numkit import DEFAULT_TOL, Tolerance, rank_margin


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def _as_series(values, length: int | None, name: str) -> np.ndarray:
    """Time-major 2-D array; a 1-D input is one channel per sample."""
    if values is None:
        if length is None:
            raise DimensionError(f"{name} is required")
        return np.zeros((length, 0))
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 1-D or 2-D (time x channels), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return arr


@dataclass(frozen=True)
class Trajectory:
    """One experiment, stored time-major (row ``t`` is the sample at time ``t``).

    ``x`` and ``y`` hold samples ``0..T-1``; ``u`` and ``d`` hold ``0..T-2``.
    For convenience ``u``/``d`` may also be given with ``T`` rows, in which case
    the last row is dropped.  ``u=None`` means no known input (``m = 0``).
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray | None = None
    d: np.ndarray | None = None

    def __post_init__(self):
        x = _as_series(self.x, None, "x")
        T = x.shape[0]
        if T < 2:
            raise DimensionError(f"a trajectory needs T >= 2 samples, got {T}")
        y = _as_series(self.y, None, "y")
        if y.shape[0] != T:
            raise DimensionError(f"y has {y.shape[0]} samples, x has {T}")
        u = _as_series(self.u, T - 1, "u")
        if u.shape[0] == T:
            u = u[:-1]
        if u.shape[0] != T - 1:
            raise DimensionError(f"u must have {T - 1} (or {T}) samples, got {u.shape[0]}")
        d = None
        if self.d is not None:
            d = _as_series(self.d, None, "d")
            if d.shape[0] == T:
                d = d[:-1]
            if d.shape[0] != T - 1:
                raise DimensionError(f"d must have {T - 1} (or {T}) samples, got {d.shape[0]}")
            d = _frozen(d)
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "d", d)

    @property
    def T(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def r(self) -> int | None:
        return None if self.d is None else self.d.shape[1]


@dataclass(frozen=True)
class DataMatrices:
    """Channel-major data blocks, each with ``T - 1`` columns.

    ``X_f`` and ``Y_f`` are shifted one step ahead of ``X_p`` and ``Y_p``.
    """

    U_p: np.ndarray
    X_p: np.ndarray
    X_f: np.ndarray
    Y_p: np.ndarray
    Y_f: np.ndarray
    r: int
    D_p: np.ndarray | None = field(default=None)

    @property
    def n(self) -> int:
        return self.X_p.shape[0]

    @property
    def m(self) -> int:
        return self.U_p.shape[0]

    @property
    def p(self) -> int:
        return self.Y_p.shape[0]

    @property
    def T(self) -> int:
        return self.X_p.shape[1] + 1

    @property
    def dims(self) -> tuple[int, int, int, int, int]:
        return self.n, self.m, self.p, self.r, self.T


def build_data_matrices(traj: Trajectory, r: int) -> DataMatrices:
    """Stack a trajectory into ``U_p, X_p, X_f, Y_p, Y_f`` (and ``D_p`` if known).

    ``r`` is the dimension of the unknown input; it must be supplied by the
    user and is never inferred here.
    """
    r = int(r)
    if r < 1:
        raise ValueError(f"the unknown-input dimension r must be >= 1, got {r}")
    if traj.d is not None and traj.d.shape[1] != r:
        raise DimensionError(f"trajectory carries {traj.d.shape[1]} disturbance channels, r = {r}")
    D_p = None if traj.d is None else _frozen(traj.d.T)
    return DataMatrices(
        U_p=_frozen(traj.u.T),
        X_p=_frozen(traj.x[:-1].T),
        X_f=_frozen(traj.x[1:].T),
        Y_p=_frozen(traj.y[:-1].T),
        Y_f=_frozen(traj.y[1:].T),
        r=r,
        D_p=D_p,
    )


def equilibrate(dm: DataMatrices) -> DataMatrices:
    """Scale every time column of all blocks jointly to unit norm.

    Column scaling leaves the solution set of ``X_f = G M`` (and of
    ``Y_p = C X_p``) unchanged, but data from unstable or slow plants grow
    geometrically along the columns and the scaled problem is much better
    conditioned.
    """
    blocks = [dm.U_p, dm.X_p, dm.X_f, dm.Y_p, dm.Y_f] + ([dm.D_p] if dm.D_p is not None else [])
    norms = np.linalg.norm(np.vstack(blocks), axis=0)
    w = 1.0 / np.where(norms > 0, norms, 1.0)
    return DataMatrices(
        U_p=_frozen(dm.U_p * w),
        X_p=_frozen(dm.X_p * w),
        X_f=_frozen(dm.X_f * w),
        Y_p=_frozen(dm.Y_p * w),
        Y_f=_frozen(dm.Y_f * w),
        r=dm.r,
        D_p=None if dm.D_p is None else _frozen(dm.D_p * w),
    )


class AssumptionReport(NamedTuple):
    verdict: str  # "holds" | "fails" | "unverifiable"
    rank: int | None
    required: int
    surrogate_rank: int
    surrogate_required: int
    marginal: bool


def check_assumption(dm: DataMatrices, tol: Tolerance = DEFAULT_TOL) -> AssumptionReport:
    """Richness test on ``[U_p; D_p; X_p]``.

    Without disturbance data the test cannot be decided; the necessary
    condition ``rank [U_p; X_p] = m + n`` is reported as evidence instead.
    """
    sur_rank, sur_marginal = rank_margin(np.vstack([dm.U_p, dm.X_p]), tol)
    sur_req = dm.m + dm.n
    required = dm.m + dm.r + dm.n
    if dm.D_p is None:
        return AssumptionReport("unverifiable", None, required, sur_rank, sur_req, sur_marginal)
    rank, marginal = rank_margin(np.vstack([dm.U_p, dm.D_p, dm.X_p]), tol)
    verdict = "holds" if rank == required else "fails"
    return AssumptionReport(verdict, rank, required, sur_rank, sur_req, marginal)


def disturbance_rank_evidence(dm: DataMatrices, tol: Tolerance = DEFAULT_TOL) -> dict:
    """Ranks from which the unknown-input dimension can be deduced.

    When the data are rich, ``rank [U_p; X_p; X_f] - m - n`` equals the rank
    of the disturbance channel; across repeated experiments its maximum is an
    estimate of ``r``.
    """
    stacked = np.vstack([dm.U_p, dm.X_p, dm.X_f])
    rank, marginal = rank_margin(stacked, tol)
    return {
        "rank_UXX": rank,
        "rank_UX": rank_margin(np.vstack([dm.U_p, dm.X_p]), tol)[0],
        "m": dm.m,
        "n": dm.n,
        "implied_r": max(rank - dm.m - dm.n, 0),
        "marginal": marginal,
    }


@dataclass(frozen=True)
class ColumnLayout:
    """Column names for each signal group of a trajectory file."""

    u: Sequence[str] = ()
    y: Sequence[str] = ()
    x: Sequence[str] = ()
    d: Sequence[str] = ()
    time: str | None = "t"

    @classmethod
    def infer(cls, header: Sequence[str]) -> "ColumnLayout":
        groups: dict[str, list[tuple[int, str]]] = {"u": [], "y": [], "x": [], "d": []}
        for name in header:
            match = re.fullmatch(r"([uyxd])(\d+)", name.strip())
            if match:
                groups[match.group(1)].append((int(match.group(2)), name))
        ordered = {k: [name for _, name in sorted(v)] for k, v in groups.items()}
        time = "t" if "t" in [h.strip() for h in header] else None
        return cls(ordered["u"], ordered["y"], ordered["x"], ordered["d"], time)

    @classmethod
    def for_dims(cls, m: int, p: int, n: int, r: int = 0) -> "ColumnLayout":
        return cls(
            [f"u{i + 1}" for i in range(m)],
            [f"y{i + 1}" for i in range(p)],
            [f"x{i + 1}" for i in range(n)],
            [f"d{i + 1}" for i in range(r)],
        )

    @property
    def columns(self) -> list[str]:
        head = [self.time] if self.time else []
        return head + list(self.u) + list(self.y) + list(self.x) + list(self.d)


def read_trajectory(path, layout: ColumnLayout | None = None) -> Trajectory:
    """Parse a CSV trajectory file (one header row, one row per time step).

    The ``u`` and ``d`` cells of the final row may be left empty since those
    samples are not part of the data.  Errors carry the offending row and
    column.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise TrajectoryFormatError(f"cannot read {path}: {exc}") from None
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if not rows:
        raise TrajectoryFormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    layout = layout or ColumnLayout.infer(header)
    index = {name: i for i, name in enumerate(header)}
    for name in layout.columns:
        if name not in index:
            raise TrajectoryFormatError(f"missing column {name!r} in header {header}")
    if not layout.x or not layout.y:
        raise TrajectoryFormatError(f"header {header} needs at least one x and one y column")
    body = rows[1:]
    T = len(body)
    if T < 2:
        raise TrajectoryFormatError(f"need at least 2 data rows, found {T}")

    def parse(group: Sequence[str], allow_blank_last: bool) -> np.ndarray:
        out = np.zeros((T, len(group)))
        for t, row in enumerate(body):
            if len(row) != len(header):
                raise TrajectoryFormatError(
                    f"expected {len(header)} cells, found {len(row)}", row=t + 2
                )
            for j, name in enumerate(group):
                cell = row[index[name]].strip()
                if not cell and allow_blank_last and t == T - 1:
                    out[t, j] = 0.0
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise TrajectoryFormatError(f"cannot parse {cell!r}", row=t + 2, column=name) from None
                if not np.isfinite(value):
                    raise TrajectoryFormatError(f"non-finite value {cell!r}", row=t + 2, column=name)
                out[t, j] = value
        return out

    if layout.time:
        times = parse([layout.time], False)[:, 0]
        bad = np.nonzero(np.diff(times) <= 0)[0]
        if bad.size:
            raise TrajectoryFormatError("time column is not increasing", row=int(bad[0]) + 3, column=layout.time)
    x = parse(layout.x, False)
    y = parse(layout.y, False)
    u = parse(layout.u, True)[:-1] if layout.u else None
    d = parse(layout.d, True)[:-1] if layout.d else None
    return Trajectory(x=x, y=y, u=u, d=d)


def write_trajectory(traj: Trajectory, path, include_d: bool = True) -> None:
    """Write ``traj`` as CSV; values use 17 significant digits so reading the
    file back reproduces the data."""
    r = traj.r if (include_d and traj.d is not None) else 0
    layout = ColumnLayout.for_dims(traj.m, traj.p, traj.n, r)
    fmt = "{:.17g}".format
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(layout.columns)
        for t in range(traj.T):
            last = t == traj.T - 1
            row = [str(t)]
            row += ["" if last else fmt(v) for v in (traj.u[t] if not last else [0.0] * traj.m)]
            row += [fmt(v) for v in traj.y[t]]
            row += [fmt(v) for v in traj.x[t]]
            if r:
                row += ["" if last else fmt(v) for v in (traj.d[t] if not last else [0.0] * r)]
            writer.writerow(row)
