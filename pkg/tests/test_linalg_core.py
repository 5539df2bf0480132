import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qttie.errors import DataError, SingularMatrixError
from qttie.linalg_core import dense_solve, qr_orthonormalize, rank_for_tolerance, truncated_svd


def test_identity_full_rank():
    f = truncated_svd(np.eye(4), 0.0)
    assert f.rank == 4
    np.testing.assert_allclose(f.product(), np.eye(4), atol=1e-15)


def test_outer_product_rank_one(rng):
    u, v = rng.standard_normal(5), rng.standard_normal(7)
    f = truncated_svd(np.outer(u, v), 1e-12)
    assert f.rank == 1
    np.testing.assert_allclose(f.product(), np.outer(u, v), atol=1e-12)


def test_tail_matches_full_svd(rng):
    M = rng.standard_normal((8, 8))
    s = np.linalg.svd(M, compute_uv=False)
    tol = np.sqrt(np.sum(s[4:] ** 2)) * 1.0000001
    f = truncated_svd(M, tol)
    assert f.rank == 4
    assert abs(f.achieved_error - np.sqrt(np.sum(s[4:] ** 2))) <= 1e-12
    assert abs(np.linalg.norm(M - f.product()) - f.achieved_error) <= 1e-12


def test_max_rank_cap(rng):
    f = truncated_svd(rng.standard_normal((6, 6)), 0.0, max_rank=2)
    assert f.rank == 2 and f.left.shape == (6, 2)


def test_sign_convention(rng):
    f = truncated_svd(rng.standard_normal((9, 5)))
    piv = np.argmax(np.abs(f.left), axis=0)
    assert np.all(f.left[piv, np.arange(f.rank)] > 0)


def test_non_finite_rejected():
    M = np.ones((3, 3))
    M[1, 1] = np.nan
    with pytest.raises(DataError):
        truncated_svd(M)
    with pytest.raises(DataError):
        qr_orthonormalize(M)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(-10, 10)),
       st.floats(0, 1))
def test_truncation_error_is_tail(M, frac):
    s = np.linalg.svd(M, compute_uv=False)
    tol = frac * np.linalg.norm(s)
    f = truncated_svd(M, tol)
    assert f.achieved_error <= tol + 1e-12 or f.rank == 1
    assert np.linalg.norm(M - f.product()) == pytest.approx(f.achieved_error, abs=1e-9)
    assert f.rank == rank_for_tolerance(s, tol)


def test_dense_solve_examples(rng):
    b = rng.standard_normal(5)
    np.testing.assert_allclose(dense_solve(np.eye(5), b), b)
    np.testing.assert_allclose(dense_solve(np.diag([1.0, 2.0, 4.0]), [1.0, 2.0, 4.0]), [1, 1, 1])
    M = rng.standard_normal((20, 20)) + 10 * np.eye(20)
    b = rng.standard_normal(20)
    x = dense_solve(M, b)
    assert np.linalg.norm(M @ x - b) / np.linalg.norm(b) <= 1e-10


def test_dense_solve_singular():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as info:
        dense_solve(M, np.ones(2))
    assert info.value.pivot_index in (0, 1)
    with pytest.raises(SingularMatrixError):
        dense_solve(np.zeros((3, 3)), np.ones(3))


def test_qr_examples(rng):
    Q0, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    Q, R = qr_orthonormalize(Q0)
    np.testing.assert_allclose(np.abs(Q), np.abs(Q0), atol=1e-12)
    np.testing.assert_allclose(np.abs(np.diag(R)), 1.0, atol=1e-12)
    M = rng.standard_normal((6, 3))
    Q, R = qr_orthonormalize(M)
    assert np.linalg.norm(Q @ R - M) <= 1e-12
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    # rank-deficient input: trailing rows of R vanish
    D = np.column_stack([M[:, 0], M[:, 1], M[:, 0] + M[:, 1]])
    Q, R = qr_orthonormalize(D)
    assert abs(R[2, 2]) <= 1e-12 * np.abs(R).max()
    assert np.linalg.matrix_rank(Q[:, :2]) == np.linalg.matrix_rank(D)
