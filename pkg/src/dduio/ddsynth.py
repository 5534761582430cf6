"""Observer synthesis from data.

The design equation ``X_f = [T1 | T2 | T3 | T4] [U_p; Y_p; Y_f; X_p]`` is
solved in the reduced form ``X_f = [T1 | T3 | T*] [U_p; Y_f; X_p]`` with
``T* = T4 + T2 C``.  A member of the solution family with ``(T*, C)``
detectable is picked, ``T2`` places the spectrum of ``T4 = T* - T2 C`` and the
observer matrices follow from a one-to-one change of variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .datamat import DataMatrices, equilibrate
from .ddcheck import KERNEL_CONDITION, existence_data_driven, recover_C
from .errors import DimensionError, InvalidUIOError, NotDetectableError, NoUIOError
from .numkit import (
    DEFAULT_TOL,
    Tolerance,
    as_matrix,
    norm2,
    pbh_detectable,
    pinv,
    place_output_injection,
    spectrum,
)
from .oracle import ExistenceReport, UioRealization


@dataclass(frozen=True)
class TSolution:
    """Blocks of a solution of the design equation.

    ``Tstar`` is always ``T4 + T2 @ C``; build instances with
    :meth:`from_blocks` so the relation holds by construction.
    """

    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray
    Tstar: np.ndarray

    @classmethod
    def from_blocks(cls, T1, T2, T3, T4, C) -> "TSolution":
        T4 = as_matrix(T4, "T4")
        n = T4.shape[0]
        C = as_matrix(C, "C")
        p = C.shape[0]
        T1 = np.zeros((n, 0)) if np.size(T1) == 0 else as_matrix(T1, "T1")
        T2 = as_matrix(T2, "T2").reshape(n, p)
        T3 = as_matrix(T3, "T3").reshape(n, p)
        if T4.shape != (n, n) or C.shape[1] != n or T1.shape[0] != n:
            raise DimensionError(
                f"inconsistent blocks: T1 {T1.shape}, T2 {T2.shape}, T3 {T3.shape}, T4 {T4.shape}, C {C.shape}"
            )
        return cls(T1, T2, T3, T4, T4 + T2 @ C)

    @property
    def stacked(self) -> np.ndarray:
        """``[T1 | T2 | T3 | T4]``."""
        return np.hstack([self.T1, self.T2, self.T3, self.T4])

    @property
    def reduced(self) -> np.ndarray:
        """``[T1 | T3 | T*]``."""
        return np.hstack([self.T1, self.T3, self.Tstar])


def full_regressor(dm: DataMatrices) -> np.ndarray:
    """``[U_p; Y_p; Y_f; X_p]``."""
    return np.vstack([dm.U_p, dm.Y_p, dm.Y_f, dm.X_p])


def reduced_regressor(dm: DataMatrices) -> np.ndarray:
    """``[U_p; Y_f; X_p]``."""
    return np.vstack([dm.U_p, dm.Y_f, dm.X_p])


def _relative(residual: float, dm: DataMatrices) -> float:
    return residual / max(1.0, norm2(dm.X_f))


def design_residual(sol: TSolution, dm: DataMatrices) -> float:
    """``||X_f - [T1|T2|T3|T4] [U_p; Y_p; Y_f; X_p]|| / max(1, ||X_f||)``."""
    return _relative(norm2(dm.X_f - sol.stacked @ full_regressor(dm)), dm)


@dataclass(frozen=True)
class SolutionFamily:
    """All ``G = [T1 | T3 | T*]`` with ``X_f = G M``, ``M = [U_p; Y_f; X_p]``.

    Members are ``particular + Z @ projector`` for any ``Z`` of matching
    shape; ``projector = I - M M^+`` is zero when ``M`` has full row rank.
    """

    particular: np.ndarray
    projector: np.ndarray
    m: int
    p: int
    n: int
    residual: float

    @property
    def is_point(self) -> bool:
        return norm2(self.projector) <= 0.5

    @property
    def free_dim(self) -> int:
        return int(round(np.trace(self.projector)))

    def member(self, Z=None) -> np.ndarray:
        if Z is None:
            return self.particular.copy()
        return self.particular + np.asarray(Z, dtype=float) @ self.projector

    def split(self, G: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``G -> (T1, T3, T*)``."""
        m, p = self.m, self.p
        return G[:, :m], G[:, m : m + p], G[:, m + p :]


def solve_family(dm: DataMatrices, C=None, tol: Tolerance = DEFAULT_TOL) -> SolutionFamily:
    """Particular solution and homogeneous projector of the reduced design equation.

    The solve runs on column-scaled data (see :func:`equilibrate`); the
    residual is reported on the original data.

    Raises:
        NoUIOError: the equation has no exact solution (the residual exceeds
            ``residual_tol``), which means the kernel inclusion fails.
    """
    scaled = equilibrate(dm)
    M_scaled = reduced_regressor(scaled)
    M_pinv = pinv(M_scaled, tol)
    G = scaled.X_f @ M_pinv
    M = reduced_regressor(dm)
    residual = _relative(norm2(dm.X_f - G @ M), dm)
    if residual > tol.residual_tol:
        raise NoUIOError(
            f"design equation has no exact solution (relative residual {residual:.3g})",
            [KERNEL_CONDITION],
        )
    projector = np.eye(M.shape[0]) - M_scaled @ M_pinv
    projector[np.abs(projector) < tol.rank_tol] = 0.0
    return SolutionFamily(G, projector, dm.m, dm.p, dm.n, residual)


class DetectableMember(NamedTuple):
    T1: np.ndarray
    T3: np.ndarray
    Tstar: np.ndarray
    draws: int


def select_detectable(
    family: SolutionFamily, C, budget: int = 64, seed: int = 0, tol: Tolerance = DEFAULT_TOL
) -> DetectableMember:
    """Member of the family whose pair ``(T*, C)`` is detectable.

    The minimum-norm particular solution is tried first; then up to
    ``budget`` random members.  ``draws`` counts the random members tried.

    Raises:
        NotDetectableError: no detectable member found.  ``offending`` holds
            the undetectable eigenvalues of the best candidate seen (fewest
            offending modes, then smallest largest modulus).
    """
    C = as_matrix(C, "C")
    rng = np.random.default_rng(seed)
    scale = max(1.0, norm2(family.particular))
    best = None
    draws = 0
    G = family.member()
    while True:
        T1, T3, Tstar = family.split(G)
        check = pbh_detectable(Tstar, C, tol)
        if check.detectable:
            return DetectableMember(T1, T3, Tstar, draws)
        key = (len(check.offending), max(abs(z) for z in check.offending))
        if best is None or key < best[0]:
            best = (key, check.offending)
        if family.is_point or draws >= budget:
            break
        draws += 1
        G = family.member(rng.standard_normal(family.particular.shape) * scale)
    raise NotDetectableError(
        f"no member with (T*, C) detectable after {draws} random draws; "
        f"best candidate has undetectable eigenvalues {best[1]}",
        best[1],
    )


def design_T2(
    Tstar, C, desired_poles: Sequence[complex] | None = None, tol: Tolerance = DEFAULT_TOL, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Output injection ``T2`` and ``T4 = T* - T2 C``.

    ``desired_poles`` defaults to all zeros (deadbeat).  Only the observable
    part of the spectrum moves; the rest must already be Schur stable.
    """
    Tstar = as_matrix(Tstar, "T*")
    C = as_matrix(C, "C")
    poles = [0.0] * Tstar.shape[0] if desired_poles is None else list(desired_poles)
    T2 = place_output_injection(Tstar, C, poles, tol, seed=seed)
    T4 = Tstar - T2 @ C
    if not spectrum(T4, tol).is_schur:
        raise InvalidUIOError("placed T4 is not Schur stable")
    return T2, T4


def assemble_uio(sol: TSolution, require_schur: bool = True, tol: Tolerance = DEFAULT_TOL, meta=None) -> UioRealization:
    """``A_UIO = T4``, ``B_u = T1``, ``B_y = T2 + T4 T3``, ``D = T3``."""
    if require_schur and not spectrum(sol.T4, tol).is_schur:
        raise InvalidUIOError(
            f"T4 is not Schur stable (spectral radius {spectrum(sol.T4, tol).spectral_radius:.6g})"
        )
    return UioRealization(
        A=sol.T4, B_u=sol.T1, B_y=sol.T2 + sol.T4 @ sol.T3, D=sol.T3, meta=dict(meta or {})
    )


def uio_to_T(U: UioRealization, C) -> TSolution:
    """Inverse of :func:`assemble_uio`: ``T2 = B_y - A_UIO D``."""
    return TSolution.from_blocks(U.B_u, U.B_y - U.A @ U.D, U.D, U.A, C)


class SynthesisResult(NamedTuple):
    uio: UioRealization | None
    report: ExistenceReport
    solution: TSolution | None
    C: np.ndarray | None


def synthesize(
    dm: DataMatrices,
    r: int | None = None,
    desired_poles: Sequence[complex] | None = None,
    tol: Tolerance = DEFAULT_TOL,
    budget: int = 64,
    seed: int = 0,
    baseline: bool = False,
) -> SynthesisResult:
    """Check existence from data, then build an observer when one exists.

    When the data-driven verdict is negative the result carries the report
    and ``uio=None``.  ``baseline=True`` skips the pole choice: ``T2 = 0``
    on the particular solution, and the stability of ``A_UIO = T*`` is only
    recorded (``meta["schur"]``), not enforced.

    Raises:
        NotDetectableError: the family search failed although the data
            verdict is positive (the search is a heuristic).
        PlacementError: pole placement failed.
    """
    report = existence_data_driven(dm, r, tol)
    if not report.exists:
        return SynthesisResult(None, report, None, None)
    C = recover_C(dm, tol)
    family = solve_family(dm, C, tol)
    if baseline:
        T1, T3, Tstar = family.split(family.member())
        sol = TSolution.from_blocks(T1, np.zeros((dm.n, dm.p)), T3, Tstar, C)
        spec = spectrum(sol.T4, tol)
        meta = {"design": "baseline", "schur": bool(spec.is_schur), "spectral_radius": spec.spectral_radius}
        return SynthesisResult(assemble_uio(sol, require_schur=False, tol=tol, meta=meta), report, sol, C)
    member = select_detectable(family, C, budget, seed, tol)
    poles = [0.0] * dm.n if desired_poles is None else list(desired_poles)
    T2, T4 = design_T2(member.Tstar, C, poles, tol, seed=seed)
    sol = TSolution.from_blocks(member.T1, T2, member.T3, T4, C)
    meta = {"design": "data", "poles": [complex(z) for z in poles], "family_draws": member.draws}
    return SynthesisResult(assemble_uio(sol, tol=tol, meta=meta), report, sol, C)
