import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qttie.krylov import GmresConfig, gmres
from qttie.linalg_core import dense_solve


def test_identity_one_iteration(rng):
    b = rng.standard_normal(10)
    res = gmres(lambda v: v, b)
    assert res.converged and res.iterations == 1
    np.testing.assert_allclose(res.solution, b)
    assert res.matvec_count == res.iterations


def test_matches_dense_solve(rng):
    A = rng.standard_normal((50, 50)) / np.sqrt(50) + 3 * np.eye(50)
    b = rng.standard_normal(50)
    res = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-12))
    np.testing.assert_allclose(res.solution, dense_solve(A, b), rtol=1e-8, atol=1e-10)
    assert abs(res.true_residual - res.residual_history[-1]) <= 1e-8


def test_exact_preconditioner(rng):
    A = rng.standard_normal((30, 30)) + 6 * np.eye(30)
    Ainv = np.linalg.inv(A)
    res = gmres(lambda v: A @ v, rng.standard_normal(30), GmresConfig(tol=1e-10), precond=lambda v: Ainv @ v)
    assert res.converged and res.iterations <= 2


def test_nonconvergence_flag(rng):
    A = np.diag(np.linspace(1, 1e6, 200))
    res = gmres(lambda v: A @ v, np.ones(200), GmresConfig(tol=1e-12, max_iters=5))
    assert not res.converged and res.iterations == 5


def test_zero_rhs_and_x0(rng):
    res = gmres(lambda v: 2 * v, np.zeros(4))
    assert res.converged and np.all(res.solution == 0)
    A = rng.standard_normal((20, 20)) + 5 * np.eye(20)
    b = rng.standard_normal(20)
    x = np.linalg.solve(A, b)
    res = gmres(lambda v: A @ v, b, x0=x + 1e-3 * rng.standard_normal(20))
    assert res.converged
    np.testing.assert_allclose(res.solution, x, atol=1e-7)
    res = gmres(lambda v: A @ v, b, x0=x)
    assert res.iterations == 0


def test_restarted(rng):
    A = rng.standard_normal((60, 60)) / np.sqrt(60) + 2 * np.eye(60)
    b = rng.standard_normal(60)
    res = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-10, restart=5, max_iters=200))
    assert res.converged
    assert np.linalg.norm(A @ res.solution - b) <= 1e-9 * np.linalg.norm(b)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_history_monotone(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n) * rng.uniform(0.1, 1)
    b = rng.standard_normal(n)
    res = gmres(lambda v: A @ v, b, GmresConfig(tol=1e-10, max_iters=2 * n))
    h = np.asarray(res.residual_history)
    assert np.all(np.diff(h) <= 1e-12)
    assert res.converged


def test_config_validation():
    with pytest.raises(ValueError):
        GmresConfig(tol=0)
    with pytest.raises(ValueError):
        GmresConfig(max_iters=0)
