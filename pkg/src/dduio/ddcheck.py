"""Existence of an unknown-input observer decided from data alone."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .datamat import DataMatrices, check_assumption, equilibrate
from .errors import AssumptionError
from .numkit import DEFAULT_TOL, Tolerance, kernel_basis, norm2, pencil_rank_drop, pinv, rank_margin
from .oracle import ExistenceReport

KERNEL_CONDITION = "kernel-inclusion condition ker(X_f) contains ker([U_p; Y_p; Y_f; X_p])"
DATA_PENCIL_CONDITION = "data rank condition rank[z X_p - X_f; U_p; Y_p] = n+m+r for all |z| >= 1"


def recover_C(dm: DataMatrices, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Output matrix from data, ``C = Y_p X_p^+`` (solved on column-scaled data).

    Raises:
        AssumptionError: ``X_p`` does not have full row rank, so ``C`` is not
            identifiable from the data.
    """
    rank, _ = rank_margin(dm.X_p, tol)
    if rank < dm.n:
        raise AssumptionError(
            f"state data matrix X_p has rank {rank} < n = {dm.n}; the data are not rich enough"
        )
    scaled = equilibrate(dm)
    return scaled.Y_p @ pinv(scaled.X_p, tol)


def _stack(*blocks) -> np.ndarray:
    cols = blocks[0].shape[1]
    return np.vstack([b.reshape(-1, cols) for b in blocks])


class KernelInclusion(NamedTuple):
    holds: bool
    residual: float
    kernel_dim: int
    marginal: bool


def kernel_inclusion(dm: DataMatrices, tol: Tolerance = DEFAULT_TOL) -> KernelInclusion:
    """Test whether ``X_f`` vanishes on ``ker [U_p; Y_p; Y_f; X_p]``.

    The reported residual is ``||X_f N|| / max(1, ||X_f||)`` for an
    orthonormal kernel basis ``N``, so the verdict does not depend on how
    the data are scaled.
    """
    M = _stack(dm.U_p, dm.Y_p, dm.Y_f, dm.X_p)
    N = kernel_basis(M, tol)
    if N.shape[1] == 0:
        return KernelInclusion(True, 0.0, 0, False)
    residual = norm2(dm.X_f @ N) / max(1.0, norm2(dm.X_f))
    holds = residual <= tol.residual_tol
    marginal = tol.residual_tol / 100 < residual < tol.residual_tol * 100
    return KernelInclusion(holds, residual, N.shape[1], marginal)


class DataRankCondition(NamedTuple):
    holds: bool
    normal_rank: int
    required: int
    offending: list
    drop_points: list


def data_pencil(dm: DataMatrices) -> tuple[np.ndarray, np.ndarray]:
    """``(M0, M1)`` with ``z*M1 - M0 = [z X_p - X_f; U_p; Y_p]``."""
    zeros = np.zeros((dm.m + dm.p, dm.X_p.shape[1]))
    M1 = np.vstack([dm.X_p, zeros])
    M0 = _stack(dm.X_f, -dm.U_p, -dm.Y_p)
    return M0, M1


def dd_rank_condition(dm: DataMatrices, r: int | None = None, tol: Tolerance = DEFAULT_TOL) -> DataRankCondition:
    """Rank of ``[z X_p - X_f; U_p; Y_p]`` on and outside the unit circle.

    Holds when the pencil's normal rank is ``n + m + r`` and no rank-drop
    point has ``|z| >= 1 - stability_margin``.
    """
    r = dm.r if r is None else int(r)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    M0, M1 = data_pencil(dm)
    pencil = pencil_rank_drop(M0, M1, tol)
    required = dm.n + dm.m + r
    bound = 1.0 - tol.stability_margin
    offending = [z for z in pencil.drop_points if abs(z) >= bound]
    holds = pencil.normal_rank == required and not offending
    return DataRankCondition(holds, pencil.normal_rank, required, offending, pencil.drop_points)


def existence_data_driven(dm: DataMatrices, r: int | None = None, tol: Tolerance = DEFAULT_TOL) -> ExistenceReport:
    """Both data conditions plus their evidence.

    Under rich data, ``rank_CE_ok`` (kernel inclusion) and ``rosenbrock_ok``
    (data pencil) coincide with their model-based counterparts, so the
    verdict equals strong* detectability of the generating system.
    """
    r = dm.r if r is None else int(r)
    kernel = kernel_inclusion(dm, tol)
    pencil = dd_rank_condition(dm, r, tol)
    assumption = check_assumption(dm, tol)
    violated = []
    if not kernel.holds:
        violated.append(KERNEL_CONDITION)
    if not pencil.holds:
        violated.append(DATA_PENCIL_CONDITION)
    evidence = {
        "kernel_residual": kernel.residual,
        "kernel_dim": kernel.kernel_dim,
        "normal_rank": pencil.normal_rank,
        "required_rank": pencil.required,
        "drop_points": pencil.drop_points,
        "assumption": assumption.verdict,
        "assumption_rank": assumption.rank,
        "surrogate_rank": assumption.surrogate_rank,
        "surrogate_required": assumption.surrogate_required,
        "tolerance": tol,
    }
    marginal = kernel.marginal or assumption.marginal
    return ExistenceReport("data", kernel.holds, pencil.holds, pencil.offending, evidence, violated, marginal)
