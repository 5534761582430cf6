"""Model-based ground truth: system models, observer conditions, existence
tests and a classical design, plus random test-system generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .datamat import Trajectory
from .errors import DimensionError, NotDetectableError, NoUIOError, PlacementError, RetryBudgetError
from .numkit import (
    DEFAULT_TOL,
    Tolerance,
    as_matrix,
    controllable_basis,
    norm2,
    pbh_detectable,
    pencil_rank_drop,
    pinv,
    place_output_injection,
    place_state_feedback,
    rank_margin,
    rank_of,
    singular_values,
    spectrum,
)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def _block(M, rows: int, cols: int, name: str) -> np.ndarray:
    if M is None or np.size(M) == 0:
        if rows * cols != 0:
            if M is None:
                raise DimensionError(f"{name} is required with shape ({rows}, {cols})")
            raise DimensionError(f"{name} is empty, expected shape ({rows}, {cols})")
        return np.zeros((rows, cols))
    M = as_matrix(M, name)
    if M.shape != (rows, cols):
        raise DimensionError(f"{name} has shape {M.shape}, expected ({rows}, {cols})")
    return M


@dataclass(frozen=True)
class SystemModel:
    """``x+ = A x + B u + E d``, ``y = C x`` with ``E`` of full column rank.

    ``B`` may be omitted (``m = 0``).  Use :meth:`from_raw` when ``E`` might
    be rank deficient.  ``meta`` records how a generated system was built.
    """

    A: np.ndarray
    C: np.ndarray
    E: np.ndarray
    B: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)
    tol: Tolerance = field(default=DEFAULT_TOL, compare=False, repr=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        C = as_matrix(self.C, "C") if np.size(self.C) else np.zeros((0, n))
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, A is {n}x{n}")
        E = np.zeros((n, 0)) if np.size(self.E) == 0 else as_matrix(self.E, "E")
        if E.shape[0] != n:
            raise DimensionError(f"E has {E.shape[0]} rows, A is {n}x{n}")
        if self.B is None or np.size(self.B) == 0:
            B = np.zeros((n, 0))
        else:
            B = _block(self.B, n, as_matrix(self.B).shape[1], "B")
        if E.shape[1] and rank_of(E, self.tol) != E.shape[1]:
            raise ValueError("E must have full column rank; use SystemModel.from_raw to reduce it")
        for name, value in (("A", A), ("B", B), ("C", C), ("E", E)):
            object.__setattr__(self, name, _readonly(value))

    @classmethod
    def from_raw(cls, A, C, E_raw, B=None, tol: Tolerance = DEFAULT_TOL, **kw) -> "SystemModel":
        """Build a model after replacing ``E_raw`` by a full-column-rank factor."""
        E, T_reduce = normalize_E(E_raw, tol)
        meta = dict(kw.pop("meta", {}))
        meta["E_reduction"] = T_reduce.tolist()
        return cls(A=A, C=C, E=E, B=B, meta=meta, tol=tol, **kw)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return self.E.shape[1]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.n, self.m, self.p, self.r


@dataclass(frozen=True)
class UioRealization:
    """Observer ``z+ = A z + B_u u + B_y y``, ``xhat = z + D y``."""

    A: np.ndarray
    B_u: np.ndarray
    B_y: np.ndarray
    D: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A_UIO")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A_UIO must be square, got {A.shape}")
        D = np.zeros((n, 0)) if np.size(self.D) == 0 else as_matrix(self.D, "D_UIO")
        if D.shape[0] != n:
            raise DimensionError(f"D_UIO has {D.shape[0]} rows, expected {n}")
        p = D.shape[1]
        B_y = _block(self.B_y, n, p, "B_y")
        if self.B_u is None or np.size(self.B_u) == 0:
            B_u = np.zeros((n, 0))
        else:
            B_u = as_matrix(self.B_u, "B_u")
            if B_u.shape[0] != n:
                raise DimensionError(f"B_u has {B_u.shape[0]} rows, expected {n}")
        for name, value in (("A", A), ("B_u", B_u), ("B_y", B_y), ("D", D)):
            object.__setattr__(self, name, _readonly(value))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B_u.shape[1]

    @property
    def p(self) -> int:
        return self.D.shape[1]


@dataclass
class ExistenceReport:
    """Verdict on the existence of an unknown-input observer.

    ``rank_CE_ok`` is the decoupling rank condition (from data: the kernel
    inclusion test); ``rosenbrock_ok`` is the pencil rank test outside the
    open unit disc.  ``unstable_zeros`` lists the rank-drop points with
    ``|z| >= 1``.  ``violated`` names each failing condition in words.
    """

    source: str
    rank_CE_ok: bool
    rosenbrock_ok: bool
    unstable_zeros: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    violated: list = field(default_factory=list)
    marginal: bool = False

    @property
    def strong_star_detectable(self) -> bool:
        return self.rank_CE_ok and self.rosenbrock_ok

    exists = strong_star_detectable


RANK_CONDITION = "decoupling rank condition rank(CE) = rank(E) = r"
PENCIL_CONDITION = "Rosenbrock rank condition rank[zI-A, -E; C, 0] = n+r for all |z| >= 1"


def normalize_E(E_raw, tol: Tolerance = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``E_raw = E @ T_reduce`` with ``E`` of full column rank.

    Columns of ``E_raw`` are kept left to right whenever they raise the rank,
    so a full-rank input comes back unchanged with ``T_reduce = I``.
    """
    E_raw = as_matrix(E_raw, "E")
    n, r = E_raw.shape
    keep: list[int] = []
    for j in range(r):
        if rank_of(E_raw[:, keep + [j]], tol) > len(keep):
            keep.append(j)
    E = E_raw[:, keep]
    if len(keep) == r:
        return E.copy(), np.eye(r)
    if not keep:
        return np.zeros((n, 0)), np.zeros((0, r))
    return E.copy(), pinv(E, tol) @ E_raw


class ConditionReport(NamedTuple):
    schur: bool
    spectral_radius: float
    decoupling: float
    input_map: float
    state_map: float
    passed: bool


def check_uio_conditions(S: SystemModel, U: UioRealization, tol: Tolerance = DEFAULT_TOL) -> ConditionReport:
    """Residuals of the four observer conditions for system ``S``.

    ``decoupling`` is ``||D C E - E||``, ``input_map`` is
    ``||(I - D C) B - B_u||`` and ``state_map`` is
    ``||A_UIO (I - D C) + B_y C - (I - D C) A||``.
    """
    if (U.n, U.m, U.p) != (S.n, S.m, S.p):
        raise DimensionError(f"observer dims (n,m,p)={(U.n, U.m, U.p)} do not match system {(S.n, S.m, S.p)}")
    P = np.eye(S.n) - U.D @ S.C
    spec = spectrum(U.A, tol)
    decoupling = norm2(U.D @ S.C @ S.E - S.E)
    input_map = norm2(P @ S.B - U.B_u)
    state_map = norm2(U.A @ P + U.B_y @ S.C - P @ S.A)
    passed = spec.is_schur and max(decoupling, input_map, state_map) <= tol.residual_tol
    return ConditionReport(spec.is_schur, spec.spectral_radius, decoupling, input_map, state_map, passed)


def rosenbrock_pencil(S: SystemModel) -> tuple[np.ndarray, np.ndarray]:
    """``(M0, M1)`` with ``z*M1 - M0 = [zI - A, -E; C, 0]``."""
    n, p, r = S.n, S.p, S.r
    M0 = np.block([[S.A, S.E], [-S.C, np.zeros((p, r))]])
    M1 = np.block([[np.eye(n), np.zeros((n, r))], [np.zeros((p, n + r))]])
    return M0, M1


def invariant_zeros(S: SystemModel, tol: Tolerance = DEFAULT_TOL) -> list:
    M0, M1 = rosenbrock_pencil(S)
    return pencil_rank_drop(M0, M1, tol).drop_points


def existence_model_based(S: SystemModel, tol: Tolerance = DEFAULT_TOL) -> ExistenceReport:
    """Decide strong* detectability of ``(A, E, C)`` from the model."""
    CE = S.C @ S.E
    rank_CE, marginal_CE = rank_margin(CE, tol, scale=norm2(S.C) * norm2(S.E))
    rank_E = rank_of(S.E, tol)
    rank_ok = rank_CE == rank_E == S.r
    M0, M1 = rosenbrock_pencil(S)
    pencil = pencil_rank_drop(M0, M1, tol)
    bound = 1.0 - tol.stability_margin
    unstable = [z for z in pencil.drop_points if abs(z) >= bound]
    full = pencil.normal_rank == S.n + S.r
    pencil_ok = full and not unstable
    violated = []
    if not rank_ok:
        violated.append(RANK_CONDITION)
    if not pencil_ok:
        violated.append(PENCIL_CONDITION)
    evidence = {
        "rank_CE": rank_CE,
        "rank_E": rank_E,
        "r": S.r,
        "normal_rank": pencil.normal_rank,
        "required_rank": S.n + S.r,
        "drop_points": pencil.drop_points,
        "tolerance": tol,
    }
    return ExistenceReport("model", rank_ok, pencil_ok, unstable, evidence, violated, marginal_CE)


def d_family(S: SystemModel, tol: Tolerance = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """All solutions of ``D C E = E`` as ``D0 + Z @ P`` with ``Z`` free.

    Returns ``(D0, P)`` where ``D0 = E (CE)^+`` and ``P = I - CE (CE)^+``.
    """
    CE = S.C @ S.E
    CE_pinv = pinv(CE, tol)
    return S.E @ CE_pinv, np.eye(S.p) - CE @ CE_pinv


def _default_poles(n: int) -> list:
    return [0.0] * n


def design_model_based(
    S: SystemModel,
    desired_poles: Sequence[complex] | None = None,
    tol: Tolerance = DEFAULT_TOL,
    D: np.ndarray | None = None,
    budget: int = 64,
    seed: int = 0,
) -> UioRealization:
    """Classical observer design for a strong* detectable system.

    ``D`` is taken from the decoupling family (``Z = 0`` first, then up to
    ``budget`` random ``Z``) until ``((I - D C) A, C)`` is detectable, then
    the output injection ``L`` places the observable poles.  Pass ``D`` to
    fix the decoupling matrix instead of searching.
    """
    report = existence_model_based(S, tol)
    if not report.exists:
        raise NoUIOError("no unknown-input observer exists for this system", report.violated)
    poles = _default_poles(S.n) if desired_poles is None else list(desired_poles)
    D0, P = d_family(S, tol)
    rng = np.random.default_rng(seed)
    if D is not None:
        D = as_matrix(D, "D")
        if norm2(D @ S.C @ S.E - S.E) > tol.residual_tol:
            raise ValueError("supplied D does not satisfy D C E = E")
        candidates = [D]
    else:
        scale = max(1.0, norm2(D0))
        candidates = [D0] + [
            D0 + rng.standard_normal((S.n, S.p)) * scale @ P for _ in range(budget)
        ]
    last = None
    for Dc in candidates:
        Pc = np.eye(S.n) - Dc @ S.C
        F = Pc @ S.A
        check = pbh_detectable(F, S.C, tol)
        if not check.detectable:
            last = check.offending
            continue
        L = place_output_injection(F, S.C, poles, tol)
        A_uio = F - L @ S.C
        meta = {"design": "model", "poles": [complex(z) for z in poles]}
        return UioRealization(A=A_uio, B_u=Pc @ S.B, B_y=L + A_uio @ Dc, D=Dc, meta=meta)
    raise NotDetectableError(
        f"no decoupling matrix with a detectable error pair found in {budget} draws", last or []
    )


def example_system() -> SystemModel:
    """Three-state, two-output test system with one unknown input and no ``B``."""
    A = np.array([[-1.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, -1.0]])
    C = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    E = np.array([[-1.0], [0.0], [0.0]])
    return SystemModel(A=A, C=C, E=E, meta={"construction": "example"})


def simulate_system(S: SystemModel, x0, u, d, T: int) -> Trajectory:
    """Run ``x+ = A x + B u + E d``, ``y = C x`` for ``T`` samples.

    ``u`` and ``d`` need ``T - 1`` samples each (time-major); ``u`` may be
    ``None`` when the system has no known input.
    """
    if T < 2:
        raise DimensionError(f"horizon T must be >= 2, got {T}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != S.n:
        raise DimensionError(f"x0 has {x0.shape[0]} entries, n = {S.n}")
    u = np.zeros((T - 1, 0)) if S.m == 0 or u is None else np.asarray(u, dtype=float).reshape(-1, S.m)
    if S.m and u.shape[0] == 0:
        raise DimensionError(f"system has m = {S.m} inputs but no u was given")
    d = np.zeros((T - 1, S.r)) if d is None else np.asarray(d, dtype=float).reshape(-1, S.r)
    if u.shape[0] < T - 1 and S.m:
        raise DimensionError(f"u needs {T - 1} samples, got {u.shape[0]}")
    if d.shape[0] < T - 1 and S.r:
        raise DimensionError(f"d needs {T - 1} samples, got {d.shape[0]}")
    if S.m == 0:
        u = np.zeros((T - 1, 0))
    if S.r == 0:
        d = np.zeros((T - 1, 0))
    x = np.zeros((T, S.n))
    x[0] = x0
    for t in range(T - 1):
        x[t + 1] = S.A @ x[t] + S.B @ u[t] + S.E @ d[t]
    y = x @ S.C.T
    return Trajectory(x=x, y=y, u=u[: T - 1] if S.m else None, d=d[: T - 1])


def random_experiment(
    S: SystemModel,
    T: int,
    seed=None,
    u_range: tuple[float, float] = (-1.0, 1.0),
    d_range: tuple[float, float] = (-2.0, 2.0),
    x0=None,
) -> Trajectory:
    """Simulate ``S`` under uniformly random known and unknown inputs."""
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(S.n) if x0 is None else x0
    u = rng.uniform(*u_range, size=(T - 1, S.m))
    d = rng.uniform(*d_range, size=(T - 1, S.r))
    return simulate_system(S, x0, u if S.m else None, d, T)


def _random_A(rng, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n))
    rho = max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    return A * rng.uniform(0.4, 0.95) / rho


def _reachable(S: SystemModel, tol: Tolerance) -> bool:
    return controllable_basis(S.A, np.hstack([S.B, S.E]), tol).shape[1] == S.n


def random_system(
    n: int,
    m: int,
    p: int,
    r: int,
    want_strong_star: bool = True,
    seed=None,
    violation: str | None = None,
    max_tries: int = 200,
    tol: Tolerance = DEFAULT_TOL,
) -> SystemModel:
    """Random system whose model-based verdict equals ``want_strong_star``.

    Negative systems are built by one of two recorded constructions:
    ``"rank"`` puts a column of ``E`` in the kernel of ``C`` (so ``CE`` loses
    rank) and ``"zero"`` plants a real invariant zero with ``1.2 <= |z| <= 3``
    while keeping ``A`` Schur stable.
    Positive systems are rejection-sampled with a margin: every invariant zero
    has ``|z| <= 0.9`` and ``CE`` is well conditioned.  Every returned pair
    ``(A, [B E])`` is reachable.
    """
    if min(n, p, r) < 1 or m < 0:
        raise ValueError(f"need n, p, r >= 1 and m >= 0, got {(n, m, p, r)}")
    if r > n:
        raise ValueError(f"r = {r} exceeds n = {n}; E cannot have full column rank")
    if want_strong_star and p < r:
        raise ValueError(f"p = {p} < r = {r}: rank(CE) = r is impossible")
    rng = np.random.default_rng(seed)
    if not want_strong_star:
        options = ["rank"] if (n < r + 1 or p < r) else ["rank", "zero"]
        if violation is None:
            violation = options[rng.integers(len(options))]
        if violation not in options:
            raise ValueError(f"violation {violation!r} not available for dims {(n, m, p, r)}; options {options}")
    for _ in range(max_tries):
        A = _random_A(rng, n)
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        E = rng.standard_normal((n, r))
        meta = {"construction": "generic"}
        if not want_strong_star:
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            C = C - np.outer(C @ x, x)
            if violation == "rank":
                E[:, 0] = x
                meta = {"construction": "rank"}
            else:
                # unobservable mode at z0, then feedback through E: the zero
                # survives (unimodular change of the Rosenbrock matrix) while
                # A becomes Schur stable
                z0 = float(rng.choice([-1.0, 1.0]) * rng.uniform(1.2, 3.0))
                A = A + np.outer(z0 * x - A @ x, x)
                poles = rng.uniform(-0.8, 0.8, n)
                try:
                    K = place_state_feedback(A, E, poles, tol, seed=int(rng.integers(2**31)))
                except PlacementError:
                    continue
                A = A - E @ K
                meta = {"construction": "zero", "zero": z0}
        try:
            S = SystemModel(A=A, B=B, C=C, E=E, meta=meta, tol=tol)
        except ValueError:
            continue
        if not _reachable(S, tol):
            continue
        report = existence_model_based(S, tol)
        if report.exists != want_strong_star:
            continue
        if want_strong_star:
            zeros = report.evidence["drop_points"]
            if any(abs(z) > 0.9 for z in zeros):
                continue
            s = singular_values(S.C @ S.E)
            if s[-1] < 1e-3 * s[0]:
                continue
        elif violation == "zero":
            if not any(abs(z - meta["zero"]) < 1e-6 * abs(meta["zero"]) for z in report.unstable_zeros):
                continue
        return S
    raise RetryBudgetError(f"no system with the requested verdict after {max_tries} tries")
