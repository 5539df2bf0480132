import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tt
from qttie.errors import CapacityError
from qttie.ie_kernels import GridSpec, ProblemSpec, dense_operator_tensor, operator_oracle
from qttie.linalg_core import rank_for_tolerance
from qttie.tensor_core import DenseTensor, TTOperator, TTVector, tt_entries, tt_to_dense, tt_to_matrix, unfold
from qttie.tt_arith import tt_add
from qttie.tt_compress import CompressionConfig, maxvol, tt_cross, tt_round, tt_svd


def test_separable_is_rank_one(rng):
    u, v, w = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2)
    t = np.einsum("i,j,k->ijk", u, v, w).reshape(-1, order="F")
    x = tt_svd(DenseTensor(t, (3, 4, 2)), 1e-12)
    assert x.ranks == (1, 1, 1, 1)


def test_identity_operator_ranks():
    t = DenseTensor.from_matrix(np.eye(8), (2, 2, 2), (2, 2, 2))
    A = tt_svd(t, 1e-12)
    assert isinstance(A, TTOperator)
    assert A.ranks == (1, 1, 1, 1)
    np.testing.assert_allclose(tt_to_matrix(A), np.eye(8), atol=1e-14)


def test_bad_eps_and_guard(rng):
    t = DenseTensor(rng.standard_normal(16), (2, 2, 2, 2))
    with pytest.raises(ValueError):
        tt_svd(t, 0.0)
    with pytest.raises(CapacityError):
        tt_svd(t, 1e-6, guard=8)
    with pytest.raises(ValueError):
        CompressionConfig(target_eps=-1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(2, 4), min_size=2, max_size=6), st.sampled_from([1e-1, 1e-4, 1e-8]),
       st.integers(0, 2**31))
def test_svd_error_bound(modes, eps, seed):
    rng = np.random.default_rng(seed)
    # low-rank plus noise so that truncation actually happens
    x = random_tt(rng, modes, 2)
    data = tt_to_dense(x).data + 1e-3 * rng.standard_normal(int(np.prod(modes)))
    y = tt_svd(DenseTensor(data, tuple(modes)), eps)
    assert np.linalg.norm(tt_to_dense(y).data - data) <= eps * np.linalg.norm(data) * (1 + 1e-10)


def test_round_examples(rng):
    x = TTVector([rng.standard_normal((1, 3, 1)) for _ in range(4)])
    assert tt_round(x, 1e-8).ranks == x.ranks
    y = random_tt(rng, (2, 3, 2, 3), 2)
    y = tt_round(y, 1e-14)
    z = tt_round(tt_add(y, y), 1e-12)
    assert z.ranks == y.ranks
    np.testing.assert_allclose(tt_to_dense(z).data, 2 * tt_to_dense(y).data, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(2, 3), min_size=2, max_size=6), st.integers(2, 5), st.floats(1e-6, 0.3),
       st.integers(0, 2**31))
def test_round_bound_and_ranks(modes, rank, eps, seed):
    rng = np.random.default_rng(seed)
    x = random_tt(rng, modes, rank)
    y = tt_round(x, eps)
    full = tt_to_dense(x).data
    assert np.linalg.norm(tt_to_dense(y).data - full) <= eps * np.linalg.norm(full) * (1 + 1e-8)
    assert all(a <= b for a, b in zip(y.ranks, x.ranks))
    # left-orthogonal cores
    for c in y.cores[:-1]:
        M = c.reshape(-1, c.shape[2])
        np.testing.assert_allclose(M.T @ M, np.eye(M.shape[1]), atol=1e-10)


def test_round_ranks_match_unfolding_ranks(rng):
    x = random_tt(rng, (2, 2, 3, 2, 2), 3)
    x = tt_add(x, random_tt(rng, (2, 2, 3, 2, 2), 1))
    y = tt_round(x, 1e-10)
    t = tt_to_dense(y)
    for k in range(1, 5):
        s = np.linalg.svd(unfold(t, k), compute_uv=False)
        assert y.ranks[k] == rank_for_tolerance(s, 1e-8 * np.linalg.norm(s))


def test_maxvol_finds_dominant_rows(rng):
    A = rng.standard_normal((50, 4))
    rows = maxvol(A)
    assert len(set(rows)) == 4
    B = A @ np.linalg.inv(A[rows])
    assert np.abs(B).max() <= 1.05 + 1e-12


def test_cross_rank_one():
    g = [np.arange(1, 4) / 3.0, np.cos(np.arange(4)), np.exp(-np.arange(3)), np.ones(2) * 2]
    oracle = lambda idx: np.prod([g[k][idx[:, k]] for k in range(4)], axis=0)  # noqa: E731
    res = tt_cross(oracle, (3, 4, 3, 2), CompressionConfig(target_eps=1e-10, kick_rank=2))
    assert res.converged
    assert res.tt.ranks == (1, 1, 1, 1, 1)


def test_cross_planted_ranks(rng):
    modes = (3, 4, 3, 4, 3)
    x = tt_round(random_tt(rng, modes, 3), 1e-14)
    oracle = lambda idx: tt_entries(x, idx)  # noqa: E731
    eps = 1e-8
    res = tt_cross(oracle, modes, CompressionConfig(target_eps=eps, seed=3))
    assert res.converged
    assert res.tt.ranks == x.ranks
    full = tt_to_dense(x).data
    assert np.abs(tt_to_dense(res.tt).data - full).max() <= 10 * eps * np.abs(full).max()


def test_cross_agrees_with_svd():
    p = ProblemSpec(GridSpec(3, 8))
    eps = 1e-6
    t = dense_operator_tensor(p)
    A_svd = tt_svd(t, eps)
    modes = p.grid.scheme.vector_modes
    res = tt_cross(operator_oracle(p), [n * n for n in modes], CompressionConfig(target_eps=eps),
                   modes, modes)
    assert res.converged
    ref = np.linalg.norm(t.data)
    assert np.linalg.norm(tt_to_dense(res.tt).data - t.data) <= 3 * eps * ref
    assert np.linalg.norm(tt_to_dense(res.tt).data - tt_to_dense(A_svd).data) <= 3 * eps * ref
