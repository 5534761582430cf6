import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dduio.errors import DimensionError, NonFiniteError, NotDetectableError, PlacementError
from dduio.numkit import (
    DEFAULT_TOL,
    Tolerance,
    as_matrix,
    controllable_basis,
    is_numerically_nilpotent,
    kernel_basis,
    norm2,
    observability_staircase,
    pbh_detectable,
    pencil_rank_drop,
    pinv,
    place_output_injection,
    place_state_feedback,
    range_basis,
    rank_margin,
    rank_of,
    spectrum,
)

from conftest import companion_system

seeds = st.integers(0, 2**31 - 1)


def low_rank(rng, rows, cols, k, scale=1.0):
    return scale * rng.standard_normal((rows, k)) @ rng.standard_normal((k, cols))


def conj_closed_poles(rng, n, radius=0.9):
    poles = []
    while len(poles) < n:
        if n - len(poles) >= 2 and rng.random() < 0.5:
            z = radius * rng.random() * np.exp(1j * np.pi * rng.random())
            poles += [z, z.conjugate()]
        else:
            poles.append(rng.uniform(-radius, radius))
    return poles


def test_tolerance_rejects_bad_values():
    with pytest.raises(ValueError):
        Tolerance(rank_tol=-1.0)
    with pytest.raises(ValueError):
        Tolerance(rank_tol=1.0)
    with pytest.raises(ValueError):
        Tolerance(residual_tol=float("nan"))


def test_as_matrix_checks():
    assert as_matrix([1, 2]).shape == (2, 1)
    assert as_matrix(3.0).shape == (1, 1)
    with pytest.raises(NonFiniteError):
        as_matrix([[np.inf]])
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((2, 2, 2)))


def test_rank_basics():
    assert rank_of(np.zeros((3, 4))) == 0
    assert rank_of(np.zeros((0, 4))) == 0
    assert rank_of(np.eye(3)) == 3
    assert rank_of(np.diag([1.0, 1e-12])) == 1


def test_rank_is_scale_invariant():
    M = np.diag([1.0, 1e-3, 1e-12])
    for scale in (1e-8, 1.0, 1e8):
        assert rank_of(scale * M) == 2


def test_rank_scale_argument_catches_numerical_zero():
    tiny = np.array([[3e-17]])
    assert rank_of(tiny) == 1
    assert rank_of(tiny, scale=1.0) == 0


def test_rank_margin_flags_near_cutoff():
    assert rank_margin(np.diag([1.0, 2e-9]))[1]
    assert not rank_margin(np.diag([1.0, 1e-3]))[1]


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 6), st.integers(0, 6))
def test_kernel_and_range_bases(seed, rows, cols, k):
    rng = np.random.default_rng(seed)
    k = min(k, rows, cols)
    M = low_rank(rng, rows, cols, k)
    N = kernel_basis(M)
    R = range_basis(M)
    assert N.shape == (cols, cols - k)
    assert R.shape == (rows, k)
    assert norm2(M @ N) <= 1e-10 * max(1.0, norm2(M))
    assert np.allclose(N.T @ N, np.eye(cols - k), atol=1e-12)
    assert np.allclose(R @ (R.T @ M), M, atol=1e-10 * max(1.0, norm2(M)))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 6), st.integers(0, 6))
def test_pinv_penrose_identities(seed, rows, cols, k):
    rng = np.random.default_rng(seed)
    k = min(k, rows, cols)
    M = low_rank(rng, rows, cols, k)
    P = pinv(M)
    atol = 1e-9 * max(1.0, norm2(M)) * max(1.0, norm2(P))
    assert np.allclose(M @ P @ M, M, atol=atol)
    assert np.allclose(P @ M @ P, P, atol=atol)
    assert np.allclose((M @ P).T, M @ P, atol=atol)
    assert np.allclose((P @ M).T, P @ M, atol=atol)


def test_pinv_empty():
    assert pinv(np.zeros((0, 3))).shape == (3, 0)


def test_spectrum_snaps_nilpotent_matrices():
    J = np.diag(np.ones(4), 1)
    report = spectrum(J)
    assert report.nilpotent and report.spectral_radius == 0.0 and report.is_schur
    # eigvals alone would return values of order eps**(1/5)
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 5)))[0]
    assert spectrum(Q @ J @ Q.T).spectral_radius == 0.0


def test_spectrum_schur_boundary():
    assert not spectrum(np.diag([1.0, 0.1])).is_schur
    assert spectrum(np.diag([0.999, 0.1])).is_schur
    assert not spectrum(np.diag([1.0 - 1e-10, 0.1])).is_schur
    assert spectrum(np.zeros((0, 0))).is_schur


def test_pbh_detects_unobservable_unstable_mode():
    report = pbh_detectable(np.diag([2.0, 0.5]), np.array([[0.0, 1.0]]))
    assert not report.detectable
    assert report.offending == [2.0]
    assert pbh_detectable(np.diag([0.3, 0.5]), np.array([[0.0, 1.0]])).detectable
    assert pbh_detectable(np.diag([2.0, 0.5]), np.array([[1.0, 0.0]])).detectable


def test_controllable_basis_dimension():
    A = np.diag([0.5, 0.2, 0.1])
    assert controllable_basis(A, np.array([[1.0], [1.0], [0.0]])).shape[1] == 2
    assert controllable_basis(A, np.ones((3, 1))).shape[1] == 3
    assert controllable_basis(A, np.zeros((3, 0))).shape[1] == 0


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6), st.integers(1, 3))
def test_observability_staircase_splits_state_space(seed, n, n_u):
    rng = np.random.default_rng(seed)
    n_u = min(n_u, n - 1)
    n_o = n - n_u
    F_blk = rng.standard_normal((n, n))
    F_blk[:n_o, n_o:] = 0.0
    C_blk = np.hstack([rng.standard_normal((1, n_o)), np.zeros((1, n_u))])
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    F, C = Q @ F_blk @ Q.T, C_blk @ Q.T
    Q_o, Q_u = observability_staircase(F, C)
    assert Q_o.shape[1] <= n_o and Q_u.shape[1] >= n_u
    assert norm2(C @ Q_u) <= 1e-9
    assert norm2(Q_o.T @ F @ Q_u) <= 1e-8 * max(1.0, norm2(F))
    assert np.allclose(np.hstack([Q_o, Q_u]).T @ np.hstack([Q_o, Q_u]), np.eye(n), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 3))
def test_state_feedback_places_requested_spectrum(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    poles = conj_closed_poles(rng, n)
    K = place_state_feedback(A, B, poles)
    eigs = np.linalg.eigvals(A - B @ K)
    for p in poles:
        assert np.min(np.abs(eigs - p)) <= 1e-6 * max(1.0, norm2(A))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 3))
def test_deadbeat_feedback_is_nilpotent(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    K = place_state_feedback(A, B, [0.0] * n)
    assert is_numerically_nilpotent(A - B @ K)


def test_state_feedback_errors():
    with pytest.raises(PlacementError):
        place_state_feedback(np.diag([0.5, 2.0]), np.array([[1.0], [0.0]]), [0.1, 0.2])
    with pytest.raises(PlacementError):
        place_state_feedback(np.eye(2), np.ones((2, 1)), [0.1])
    with pytest.raises(PlacementError):
        place_state_feedback(np.eye(2), np.zeros((2, 0)), [0.1, 0.2])


def test_state_feedback_returns_zero_when_already_placed():
    K = place_state_feedback(np.diag([0.1, 0.2]), np.ones((2, 1)), [0.2, 0.1])
    assert np.array_equal(K, np.zeros((1, 2)))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6), st.integers(1, 3))
def test_output_injection_on_detectable_pair(seed, n, p):
    rng = np.random.default_rng(seed)
    n_u = int(rng.integers(0, n))
    n_o = n - n_u
    F_blk = rng.standard_normal((n, n))
    F_blk[:n_o, n_o:] = 0.0
    F_blk[n_o:, n_o:] = np.diag(rng.uniform(-0.8, 0.8, n_u))
    C_blk = np.hstack([rng.standard_normal((p, n_o)), np.zeros((p, n_u))])
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    F, C = Q @ F_blk @ Q.T, C_blk @ Q.T
    n_obs = observability_staircase(F, C)[0].shape[1]
    poles = conj_closed_poles(rng, n_obs, radius=0.5)
    L = place_output_injection(F, C, poles)
    report = spectrum(F - L @ C)
    assert report.is_schur
    for z in poles:
        assert np.min(np.abs(report.eigenvalues - z)) <= 1e-6 * max(1.0, norm2(F))


def test_output_injection_will_not_split_a_conjugate_pair():
    F = np.array([[0.5, 0.0], [0.0, 0.2]])
    C = np.array([[1.0, 0.0]])
    with pytest.raises(PlacementError):
        place_output_injection(F, C, [0.1 + 0.1j, 0.1 - 0.1j])
    L = place_output_injection(F, C, [0.1 + 0.1j, 0.1 - 0.1j, 0.3])
    assert np.allclose(sorted(np.linalg.eigvals(F - L @ C).real), [0.2, 0.3])


def test_output_injection_rejects_undetectable_pair():
    with pytest.raises(NotDetectableError) as info:
        place_output_injection(np.diag([2.0, 0.5]), np.array([[0.0, 1.0]]), [0.0, 0.0])
    assert info.value.offending == [2.0]


def test_output_injection_rejects_unpaired_complex_pole():
    with pytest.raises(PlacementError):
        place_output_injection(np.diag([0.2, 0.5]), np.eye(2), [0.1 + 0.2j, 0.3])


def test_pencil_regular_square():
    drop = pencil_rank_drop(np.diag([0.5, 3.0]), np.eye(2))
    assert drop.normal_rank == 2
    assert np.allclose(sorted(z.real for z in drop.drop_points), [0.5, 3.0])


def test_pencil_rectangular_drop():
    drop = pencil_rank_drop(np.array([[2.0], [0.0]]), np.array([[1.0], [0.0]]))
    assert drop.normal_rank == 1
    assert np.allclose(drop.drop_points, [2.0])


def test_pencil_with_full_column_rank_has_no_drops():
    M0 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    M1 = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    drop = pencil_rank_drop(M0, M1)
    assert drop.normal_rank == 2 and drop.drop_points == []


@pytest.mark.parametrize("c0, c1, zero", [(-2.0, 1.0, 2.0), (-0.5, 1.0, 0.5), (3.0, 2.0, -1.5)])
def test_pencil_invariant_zero_of_companion_system(c0, c1, zero):
    S = companion_system(c0, c1)
    M0 = np.block([[S.A, S.E], [-S.C, np.zeros((1, 1))]])
    M1 = np.block([[np.eye(2), np.zeros((2, 1))], [np.zeros((1, 3))]])
    drop = pencil_rank_drop(M0, M1)
    assert drop.normal_rank == 3
    assert len(drop.drop_points) == 1
    assert abs(drop.drop_points[0] - zero) <= 1e-10


def test_pencil_shape_mismatch():
    with pytest.raises(DimensionError):
        pencil_rank_drop(np.eye(2), np.eye(3))


def test_default_tolerance_values():
    assert (DEFAULT_TOL.rank_tol, DEFAULT_TOL.residual_tol, DEFAULT_TOL.stability_margin) == (1e-9, 1e-8, 1e-8)


def test_large_norm_matrix_with_nonzero_spectrum_is_not_nilpotent():
    # eigenvalues 0.6 and 0.1 hidden behind a large off-diagonal entry
    M = np.array([[0.6, 5000.0], [0.0, 0.1]])
    assert not is_numerically_nilpotent(M)
    np.testing.assert_allclose(np.sort(spectrum(M).eigenvalues.real), [0.1, 0.6])
    assert is_numerically_nilpotent(np.array([[0.0, 5000.0], [0.0, 0.0]]))
    assert not is_numerically_nilpotent(1e-3 * np.eye(4))
