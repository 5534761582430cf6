"""Tolerance-aware dense linear algebra kernels.

Every rank decision in the package goes through :func:`rank_of`, which uses a
relative singular-value cutoff so verdicts do not depend on data scaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from scipy.signal import place_poles

from .errors import DimensionError, NonFiniteError, NotDetectableError, PlacementError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds used throughout the package.

    Attributes:
        rank_tol: relative singular-value cutoff; singular values not exceeding
            ``rank_tol * s_max`` count as zero.
        residual_tol: absolute cutoff for residual norms of matrix identities.
        stability_margin: a matrix is Schur when its spectral radius is below
            ``1 - stability_margin``; unit-circle tests use ``|z| >= 1 - margin``.
    """

    rank_tol: float = 1e-9
    residual_tol: float = 1e-8
    stability_margin: float = 1e-8

    def __post_init__(self):
        for name in ("rank_tol", "residual_tol", "stability_margin"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite nonnegative number, got {value}")
        if self.rank_tol >= 1:
            raise ValueError(f"rank_tol must be < 1, got {self.rank_tol}")


DEFAULT_TOL = Tolerance()


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array (complex input is kept complex)."""
    arr = np.asarray(M)
    if arr.dtype.kind not in "fc":
        arr = arr.astype(float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return arr


def norm2(M) -> float:
    """Spectral norm that tolerates empty matrices."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def singular_values(M) -> np.ndarray:
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(M)


def _cutoff(s: np.ndarray, tol: Tolerance, scale: float = 0.0) -> float:
    return tol.rank_tol * max(s[0], scale) if s.size else 0.0


def rank_of(M, tol: Tolerance = DEFAULT_TOL, scale: float = 0.0) -> int:
    """Numerical rank: number of singular values above ``rank_tol * s_max``.

    ``scale`` raises the reference magnitude, e.g. ``||C|| ||E||`` for a
    product ``C E`` that may be numerically zero.
    """
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > _cutoff(s, tol, scale)))


def rank_margin(
    M, tol: Tolerance = DEFAULT_TOL, band: float = 100.0, scale: float = 0.0
) -> tuple[int, bool]:
    """Rank plus a ``marginal`` flag set when a singular value sits within a
    factor ``band`` of the cutoff on either side."""
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0, False
    cut = _cutoff(s, tol, scale)
    rank = int(np.sum(s > cut))
    marginal = bool(np.any((s > cut / band) & (s < cut * band)))
    return rank, marginal


def kernel_basis(M, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the right null space of ``M`` (as columns)."""
    M = as_matrix(M)
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, s, vh = scipy.linalg.svd(M, full_matrices=True)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > _cutoff(s, tol)))
    return vh[rank:].conj().T


def range_basis(M, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``M``."""
    M = as_matrix(M)
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return np.zeros((rows, 0), dtype=M.dtype)
    u, s, _ = scipy.linalg.svd(M, full_matrices=False)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > _cutoff(s, tol)))
    return u[:, :rank]


def pinv(M, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose inverse with the package's relative rank cutoff."""
    M = as_matrix(M)
    rows, cols = M.shape
    if M.size == 0:
        return np.zeros((cols, rows), dtype=M.dtype)
    return np.linalg.pinv(M, rcond=tol.rank_tol)


class SpectrumReport(NamedTuple):
    eigenvalues: np.ndarray
    spectral_radius: float
    is_schur: bool
    nilpotent: bool


def is_numerically_nilpotent(M, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True when ``P = M / max(1, ||M||)`` has ``|tr(P^k)| <= n * residual_tol``
    for ``k = 1..n`` and ``||P^n|| <= residual_tol``.

    The power sums ``tr(P^k)`` vanish exactly when every eigenvalue is zero
    and move only linearly under perturbations, so a well-separated nonzero
    spectrum is not mistaken for a nilpotent one even when ``||M||`` is
    large compared with the spectral radius.
    """
    M = as_matrix(M)
    n = M.shape[0]
    if n == 0:
        return True
    P = M / max(1.0, norm2(M))
    power = np.eye(n)
    for _ in range(n):
        power = power @ P
        if abs(np.trace(power)) > n * tol.residual_tol:
            return False
    return norm2(power) <= tol.residual_tol


def spectrum(M, tol: Tolerance = DEFAULT_TOL) -> SpectrumReport:
    """Eigenvalues, spectral radius and Schur flag of a square matrix.

    Eigenvalues of a nilpotent matrix with Jordan blocks of size k are only
    computable to about eps**(1/k), so numerically nilpotent matrices (see
    :func:`is_numerically_nilpotent`) are reported with all eigenvalues at 0.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectrum needs a square matrix, got {M.shape}")
    n = M.shape[0]
    if n == 0:
        return SpectrumReport(np.zeros(0, complex), 0.0, True, True)
    nilpotent = is_numerically_nilpotent(M, tol)
    if nilpotent:
        eigs = np.zeros(n, dtype=complex)
    else:
        eigs = np.linalg.eigvals(M).astype(complex)
    rho = float(np.max(np.abs(eigs)))
    return SpectrumReport(eigs, rho, rho < 1.0 - tol.stability_margin, nilpotent)


class Detectability(NamedTuple):
    detectable: bool
    offending: list


def _check_pair(F, C):
    F = as_matrix(F, "F")
    C = as_matrix(C, "C")
    n = F.shape[0]
    if F.shape != (n, n):
        raise DimensionError(f"F must be square, got {F.shape}")
    if C.size == 0:
        C = np.zeros((0, n))
    if C.shape[1] != n:
        raise DimensionError(f"C has {C.shape[1]} columns, F is {n}x{n}")
    return F, C


def _unique_eigs(eigs: np.ndarray, rtol: float = 1e-8) -> list[complex]:
    out: list[complex] = []
    for lam in sorted(eigs, key=lambda z: (-abs(z), z.real, z.imag)):
        if not any(abs(lam - mu) <= rtol * max(1.0, abs(mu)) for mu in out):
            out.append(complex(lam))
    return out


def pbh_detectable(F, C, tol: Tolerance = DEFAULT_TOL) -> Detectability:
    """Hautus test restricted to eigenvalues on or outside the stability boundary.

    Returns ``(detectable, offending)`` where ``offending`` lists the
    eigenvalues at which ``[lam*I - F; C]`` loses column rank.
    """
    F, C = _check_pair(F, C)
    n = F.shape[0]
    if n == 0:
        return Detectability(True, [])
    eigs = np.linalg.eigvals(F)
    offending = []
    for lam in _unique_eigs(eigs):
        if abs(lam) < 1.0 - tol.stability_margin:
            continue
        hautus = np.vstack([lam * np.eye(n) - F, C.astype(complex)])
        if rank_of(hautus, tol) < n:
            if abs(lam.imag) < 1e-12 * max(1.0, abs(lam)):
                lam = complex(lam.real, 0.0)
            offending.append(lam)
    return Detectability(not offending, offending)


def controllable_basis(A, B, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the controllable subspace of ``(A, B)``.

    Built by block Krylov iteration with re-orthogonalization; each block adds
    the directions of ``A @ (new block)`` not yet spanned, which is the
    staircase reduction carried out column by column.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    B = np.zeros((n, 0)) if np.size(B) == 0 else as_matrix(B, "B")
    basis = np.zeros((n, 0))
    block = B
    scale = max(norm2(B), _EPS)
    a_scale = max(norm2(A), _EPS)
    while basis.shape[1] < n and block.shape[1] > 0:
        for _ in range(2):
            block = block - basis @ (basis.T @ block)
        if block.size == 0:
            break
        u, s, _ = scipy.linalg.svd(block, full_matrices=False)
        new = u[:, s > tol.rank_tol * scale]
        if new.shape[1] == 0:
            break
        basis = np.hstack([basis, new])
        block = A @ new
        scale = a_scale
    return basis


def observability_staircase(F, C, tol: Tolerance = DEFAULT_TOL):
    """Orthogonal split of the state space into observable/unobservable parts.

    Returns ``(Q_o, Q_u)`` with ``[Q_o, Q_u]`` orthogonal; ``span(Q_u)`` is the
    unobservable subspace, so ``Q_o.T @ F @ Q_u`` vanishes and ``C @ Q_u = 0``.
    """
    F, C = _check_pair(F, C)
    Q_o = controllable_basis(F.T, C.T, tol)
    n = F.shape[0]
    if Q_o.shape[1] == n:
        return Q_o, np.zeros((n, 0))
    full, _ = scipy.linalg.qr(np.hstack([Q_o, np.eye(n)]))
    Q_u = full[:, Q_o.shape[1]:n]
    return Q_o, Q_u


def _pair_poles(poles: Sequence[complex], rtol: float = 1e-9):
    """Split a conjugate-closed pole list into real poles and (re, |z|^2) pairs.

    Order of first appearance is kept.  Raises ValueError when a complex pole
    has no conjugate partner.
    """
    remaining = [complex(p) for p in poles]
    groups = []
    while remaining:
        lam = remaining.pop(0)
        if abs(lam.imag) <= rtol * max(1.0, abs(lam)):
            groups.append(("real", lam.real))
            continue
        idx = next(
            (
                i
                for i, mu in enumerate(remaining)
                if abs(mu - lam.conjugate()) <= 1e-9 * max(1.0, abs(lam))
            ),
            None,
        )
        if idx is None:
            raise ValueError(f"pole {lam} has no complex-conjugate partner")
        remaining.pop(idx)
        groups.append(("pair", lam))
    return groups


def _select_poles(poles: Sequence[complex], count: int) -> list[complex]:
    """Take ``count`` poles from ``poles`` in order, keeping conjugate pairs whole."""
    try:
        groups = _pair_poles(poles)
    except ValueError as exc:
        raise PlacementError(str(exc)) from None
    total = sum(1 if kind == "real" else 2 for kind, _ in groups)
    if total < count:
        raise PlacementError(
            f"{total} poles supplied but the pair has {count} observable modes"
        )
    chosen: list[complex] = []
    for kind, lam in groups:
        need = count - len(chosen)
        if need == 0:
            break
        if kind == "real":
            chosen.append(complex(lam))
        elif need >= 2:
            chosen.extend([lam, lam.conjugate()])
    if len(chosen) != count:
        raise PlacementError(
            f"cannot take exactly {count} poles from {list(poles)} without splitting a conjugate pair"
        )
    return chosen


def _char_poly_row(H: np.ndarray, poles: Sequence[complex]) -> np.ndarray:
    """Last row of ``prod(H - lam I)`` evaluated with real arithmetic."""
    n = H.shape[0]
    v = np.zeros(n)
    v[-1] = 1.0
    for kind, lam in _pair_poles(poles):
        if kind == "real":
            v = v @ H - lam * v
        else:
            w = v @ H
            v = w @ H - 2.0 * lam.real * w + abs(lam) ** 2 * v
    return v


def _arnoldi(A: np.ndarray, b: np.ndarray):
    """Orthogonal Q and Hessenberg H = Q.T A Q with Q[:, 0] = b / |b|.

    Returns ``(Q, H, beta, subdiag)``; a tiny subdiagonal entry means ``(A, b)``
    is (nearly) uncontrollable.
    """
    n = A.shape[0]
    Q = np.zeros((n, n))
    beta = np.linalg.norm(b)
    Q[:, 0] = b / beta
    subdiag = np.zeros(max(n - 1, 0))
    for j in range(n - 1):
        w = A @ Q[:, j]
        for _ in range(2):
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        h = np.linalg.norm(w)
        subdiag[j] = h
        if h == 0.0:
            break
        Q[:, j + 1] = w / h
    H = Q.T @ A @ Q
    return Q, H, beta, subdiag


def _poles_match(M: np.ndarray, poles: Sequence[complex]) -> bool:
    eigs = np.linalg.eigvals(M)
    target = np.asarray(poles, dtype=complex)
    _, counts = np.unique(np.round(target, 8), return_counts=True)
    mult = int(counts.max()) if counts.size else 1
    atol = max(1e-6, 100.0 * _EPS ** (1.0 / mult)) * max(1.0, norm2(M))
    cost = np.abs(eigs[:, None] - target[None, :])
    rows, cols = linear_sum_assignment(cost)
    return bool(np.all(cost[rows, cols] <= atol))


def _placement_ok(M: np.ndarray, poles: Sequence[complex], tol: Tolerance) -> bool:
    if M.shape[0] == 0:
        return True
    if all(abs(p) == 0 for p in poles):
        return is_numerically_nilpotent(M, tol)
    return _poles_match(M, poles)


def _place_robust(A: np.ndarray, B: np.ndarray, poles: Sequence[complex], tol: Tolerance):
    """scipy's robust placement, or ``None`` when it does not apply or misses."""
    m = B.shape[1]
    if m < 2 or rank_of(B, tol) < m:
        return None
    multiplicity = max(sum(abs(z - w) <= 1e-12 for w in poles) for z in poles)
    if multiplicity > m:
        return None
    try:
        K = place_poles(A, B, np.asarray(poles), method="YT").gain_matrix
    except (ValueError, np.linalg.LinAlgError):
        return None
    K = np.real_if_close(K)
    if np.iscomplexobj(K) or not _placement_ok(A - B @ K, poles, tol):
        return None
    return K


def place_state_feedback(
    A, B, poles: Sequence[complex], tol: Tolerance = DEFAULT_TOL, attempts: int = 16, seed: int = 0
) -> np.ndarray:
    """Gain ``K`` with ``eig(A - B K) = poles`` for a controllable pair.

    Multi-input pairs whose pole multiplicities do not exceed ``rank B`` go
    to :func:`scipy.signal.place_poles` (robust eigenstructure assignment),
    which keeps the gain well conditioned.  Otherwise, and whenever that
    result misses the poles, the pair is reduced to a single input
    ``b = B g`` after a preliminary feedback ``K0`` that makes ``A - B K0``
    cyclic and the single-input problem is solved in controller-Hessenberg
    coordinates; repeated poles of any multiplicity are supported there.  The
    random draws use a fixed seed, so the output is deterministic for a given
    input.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    B = np.zeros((n, 0)) if np.size(B) == 0 else as_matrix(B, "B")
    m = B.shape[1]
    poles = list(poles)
    if len(poles) != n:
        raise PlacementError(f"need {n} poles, got {len(poles)}")
    if n == 0:
        return np.zeros((m, 0))
    if m == 0:
        raise PlacementError("no input channels to place poles with")
    if _placement_ok(A, poles, tol):
        return np.zeros((m, n))
    robust = _place_robust(A, B, poles, tol)
    if robust is not None:
        return robust
    rng = np.random.default_rng(seed)
    scale = max(norm2(A), norm2(B), 1.0)
    best = None
    for attempt in range(attempts):
        if attempt == 0:
            K0 = np.zeros((m, n))
            g = np.zeros(m)
            g[0] = 1.0
            if m > 1:
                g = np.ones(m) / np.sqrt(m)
        else:
            K0 = rng.standard_normal((m, n)) * (scale / max(norm2(B), _EPS)) / np.sqrt(n)
            g = rng.standard_normal(m)
            g /= np.linalg.norm(g)
        A0 = A - B @ K0
        b = B @ g
        if np.linalg.norm(b) <= tol.rank_tol * scale:
            continue
        Q, H, beta, sub = _arnoldi(A0, b)
        weakest = float(sub.min()) / scale if sub.size else 1.0
        if weakest <= tol.rank_tol:
            continue
        k_h = _char_poly_row(H, poles) / (beta * np.prod(sub))
        K = K0 + np.outer(g, k_h @ Q.T)
        closed = A - B @ K
        if _placement_ok(closed, poles, tol):
            if weakest > 1e-3:
                return K
            if best is None or weakest > best[0]:
                best = (weakest, K)
    if best is not None:
        return best[1]
    raise PlacementError("pole placement failed: pair is (numerically) uncontrollable")


def place_output_injection(
    F, C, desired_poles: Sequence[complex], tol: Tolerance = DEFAULT_TOL, seed: int = 0
) -> np.ndarray:
    """Output-injection gain ``L`` placing the observable spectrum of ``F - L C``.

    The state space is split by :func:`observability_staircase`; poles are
    placed on the observable block by duality with state feedback and the
    unobservable (necessarily stable) block is left untouched.

    ``desired_poles`` must contain at least as many poles as there are
    observable modes; the first ones are consumed in order, never splitting a
    conjugate pair.  Passing exactly the observable count is the normal use.
    """
    F, C = _check_pair(F, C)
    n, p = F.shape[0], C.shape[0]
    if n == 0:
        return np.zeros((0, p))
    try:
        _pair_poles(list(desired_poles))
    except ValueError as exc:
        raise PlacementError(str(exc)) from None
    check = pbh_detectable(F, C, tol)
    if not check.detectable:
        raise NotDetectableError(
            f"pair is not detectable; undetectable eigenvalues {check.offending}",
            check.offending,
        )
    Q_o, Q_u = observability_staircase(F, C, tol)
    n_o = Q_o.shape[1]
    if Q_u.shape[1]:
        F_uu = Q_u.T @ F @ Q_u
        if not spectrum(F_uu, tol).is_schur:
            raise NotDetectableError(
                "unobservable modes are not Schur stable",
                list(np.linalg.eigvals(F_uu)),
            )
    poles = _select_poles(list(desired_poles), n_o)
    if n_o == 0:
        return np.zeros((n, p))
    F_oo = Q_o.T @ F @ Q_o
    C_o = C @ Q_o
    K = place_state_feedback(F_oo.T, C_o.T, poles, tol, seed=seed)
    L = Q_o @ K.T
    closed = Q_o.T @ (F - L @ C) @ Q_o
    if not _placement_ok(closed, poles, tol):
        raise PlacementError("placed spectrum does not match the requested poles")
    return L


class PencilRankDrop(NamedTuple):
    normal_rank: int
    drop_points: list


def _finite_gen_eigs(P0: np.ndarray, P1: np.ndarray) -> np.ndarray:
    """Finite roots of det(z P1 - P0)."""
    if P0.shape[0] == 0:
        return np.zeros(0, complex)
    alpha, beta = scipy.linalg.eig(P0, P1, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-8 * np.abs(alpha)
    return alpha[finite] / beta[finite]


def pencil_rank_drop(M0, M1, tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> PencilRankDrop:
    """Normal rank and finite rank-drop points of the pencil ``z*M1 - M0``.

    The pencil is first compressed onto the column space of ``[M0 M1]`` and
    the row space of ``[M0; M1]`` (exact, rank preserving for every z).  The
    normal rank ``k`` is the largest rank seen at random sample points.  The
    compressed pencil is squared to ``k x k`` by random orthonormal
    projections; its generalized eigenvalues contain every drop point plus
    projection artefacts.  A candidate is kept only if a second, independent
    projection reproduces it, a direct SVD at that ``z`` confirms the rank
    deficiency and the pencil has full rank on a small ring around ``z``.
    """
    M0 = as_matrix(M0, "M0")
    M1 = as_matrix(M1, "M1")
    if M0.shape != M1.shape:
        raise DimensionError(f"pencil shapes differ: {M0.shape} vs {M1.shape}")
    if M0.size == 0:
        return PencilRankDrop(0, [])
    U = range_basis(np.hstack([M0, M1]), tol)
    V = range_basis(np.vstack([M0, M1]).T, tol)
    if U.shape[1] == 0:
        return PencilRankDrop(0, [])
    N0 = U.T @ M0 @ V
    N1 = U.T @ M1 @ V
    rng = np.random.default_rng(seed)
    ratio = norm2(N0) / max(norm2(N1), _EPS) if norm2(N1) > 0 else 1.0
    radius = min(max(ratio, 1e-3), 1e3)
    samples = radius * rng.uniform(0.5, 2.0, 5) * np.exp(2j * np.pi * rng.uniform(size=5))
    k = max(rank_of(z * N1 - N0, tol) for z in samples)
    if k == 0:
        return PencilRankDrop(0, [])

    def project():
        ka, kb = N0.shape
        Qr = np.eye(ka) if ka == k else scipy.linalg.orth(rng.standard_normal((ka, k))).T
        Zc = np.eye(kb) if kb == k else scipy.linalg.orth(rng.standard_normal((kb, k)))
        return _finite_gen_eigs(Qr @ N0 @ Zc, Qr @ N1 @ Zc)

    square = N0.shape == (k, k)
    first = project()
    second = first if square else project()
    verify_tol = max(1e3 * tol.rank_tol, 1e-6)
    ring = np.exp(2j * np.pi * np.array([0.1, 0.45, 0.8]))

    def kth(z):
        s = scipy.linalg.svdvals(z * N1 - N0)
        return s[k - 1], s[0]

    drops = []
    for z in first:
        scale = max(1.0, abs(z))
        if not square and not np.any(np.abs(second - z) <= 1e-5 * scale):
            continue
        s_k, s_1 = kth(z)
        if s_1 != 0.0 and s_k > verify_tol * s_1:
            continue
        # a genuine drop point is isolated: nearby the pencil has full rank
        # again and the k-th singular value recovers.  Near-infinite
        # artefacts of a rank-deficient M1 stay rank deficient all around.
        around = [kth(z + 0.05 * scale * w) for w in ring]
        full_rank = all(a_k > tol.rank_tol * a_1 for a_k, a_1 in around)
        if full_rank and s_k <= 1e-3 * min(a_k for a_k, _ in around):
            if abs(z.imag) <= 1e-10 * scale:
                z = complex(z.real, 0.0)
            drops.append(complex(z))
    drops.sort(key=lambda z: (abs(z), z.real, z.imag))
    return PencilRankDrop(k, drops)
