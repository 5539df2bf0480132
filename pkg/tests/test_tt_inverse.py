import json

import numpy as np
import pytest

from conftest import centered, projected_matrix, random_op, random_projection_instance
from qttie.errors import ShapeError
from qttie.tensor_core import TTOperator, TTVector, tt_to_matrix
from qttie.tt_arith import tt_add, tt_diag, tt_identity, tt_scale
from qttie.tt_compress import tt_round
from qttie.tt_inverse import (
    InverseConfig,
    Mode,
    SweepReport,
    assemble_local_matrix,
    build_interface_stacks,
    column_residual,
    invert,
    invert_preconditioned,
    local_apply,
    local_matrix,
    residual_estimate,
    solve_local_system,
)


def test_stacks_rank_one_d2(rng):
    A = random_op(rng, (2, 2), 1)
    X = random_op(rng, (2, 2), 1)
    st_ = build_interface_stacks(A, X)
    G0, X0 = A.block(0)[0, :, :, 0], X.cores[0][0, :, 0].reshape(2, 2)
    brute = np.sum(X0 * (G0 @ X0))
    assert st_.psi[1].shape == (1, 1, 1)
    assert st_.psi[1][0, 0, 0] == pytest.approx(brute)
    G1, X1 = A.block(1)[0, :, :, 0], X.cores[1][0, :, 0].reshape(2, 2)
    assert st_.phi[0][0, 0, 0] == pytest.approx(np.sum(X1 * (G1 @ X1)))
    assert st_.psi[0].shape == (1, 1, 1) and st_.phi[1].shape == (1, 1, 1)


def test_identity_local_operator(rng):
    modes = (2, 2, 2)
    I = tt_identity(modes)
    for k in range(3):
        X = centered(rng, modes, (2, 2), k)
        B = assemble_local_matrix(build_interface_stacks(I, X), I, k)
        np.testing.assert_allclose(B, np.eye(B.shape[0]), atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_projection_oracle(seed):
    rng, A, modes, rx = random_projection_instance(seed)
    for k in range(3):
        X = centered(rng, modes, rx, k)
        F, ref = projected_matrix(A, X, k)
        np.testing.assert_allclose(F.T @ F, np.eye(F.shape[1]), atol=1e-10)
        B = assemble_local_matrix(build_interface_stacks(A, X), A, k)
        assert np.abs(B - ref).max() <= 1e-10


def test_rhs_stacks_project_identity(rng):
    modes = (2, 2, 2)
    X = centered(rng, modes, (2, 2), 1)
    st_ = build_interface_stacks(tt_identity(modes), X)
    F, _ = projected_matrix(tt_identity(modes), X, 1)
    rhs = np.einsum("pb,bxc,qc->pxq", st_.psi_f[1], tt_identity(modes).cores[1], st_.phi_f[1])
    np.testing.assert_allclose(rhs.ravel(), F.T @ np.eye(8).ravel(), atol=1e-12)


def test_shape_errors(rng):
    with pytest.raises(ShapeError):
        build_interface_stacks(random_op(rng, (2, 2), 1), random_op(rng, (2, 2, 2), 1))


def test_dense_and_iterative_paths_agree(rng):
    modes = (2, 2, 2)
    A = random_op(rng, modes, 2)
    A = tt_round(TTOperator(list(A.cores), modes, modes), 1e-14)
    # shift by a multiple of the identity so the projected systems are well posed
    A = tt_add(tt_scale(A, 0.1 / np.sqrt(np.linalg.norm(tt_to_matrix(A)))), tt_scale(tt_identity(modes), 3.0))
    X = centered(rng, modes, (2, 2), 1)
    st_ = build_interface_stacks(A, X)
    k = 1
    psi, phi, A4 = st_.psi[k], st_.phi[k], A.block(k)
    rhs = rng.standard_normal((2, 2, 2, 2))  # (x, i, x', j)

    def apply(v):
        return local_apply(psi, A4, phi, v.transpose(0, 1, 3, 2)).transpose(0, 1, 3, 2)

    x0 = np.zeros_like(rhs)
    dense, info_d = solve_local_system(apply, lambda: local_matrix(psi, A4, phi), rhs, x0,
                                       InverseConfig(target_eps=1e-11))
    it, info_i = solve_local_system(apply, lambda: local_matrix(psi, A4, phi), rhs, x0,
                                    InverseConfig(target_eps=1e-11, local_dense_threshold=1))
    assert info_d.dense and not info_i.dense
    np.testing.assert_allclose(it, dense, atol=1e-8)


def test_two_times_identity():
    A = tt_scale(tt_identity((2,) * 6), 2.0)
    X, reports, ok = invert(A, InverseConfig(target_eps=1e-10))
    assert ok and len(reports) == 1
    assert set(X.ranks) == {1}
    np.testing.assert_allclose(tt_to_matrix(X), 0.5 * np.eye(64), atol=1e-12)


def test_diagonal_operator():
    v = TTVector([np.full((1, 2, 1), 2.0 ** (1 / 4))] * 4)
    A = tt_diag(v)
    X, _, ok = invert(A, InverseConfig(target_eps=1e-10))
    assert ok
    np.testing.assert_allclose(tt_to_matrix(X), 0.5 * np.eye(16), atol=1e-12)


def spd_operator(rng, modes, rank=2, shift=2.0):
    B = random_op(rng, modes, rank)
    Bm = tt_to_matrix(B)
    B = tt_scale(B, 1.0 / np.linalg.norm(Bm, 2))
    return tt_round(tt_add(B, tt_scale(tt_identity(modes), shift)), 1e-14)


@pytest.mark.parametrize("mode", list(Mode))
def test_modes_on_small_system(rng, mode):
    modes = (2,) * 5
    A = spd_operator(rng, modes)
    Am = tt_to_matrix(A)
    ref = np.linalg.inv(Am)
    init = "ScaledIdentity"
    if mode is Mode.ALS:
        # fixed ranks large enough to hold any 32 x 32 matrix exactly
        r = (1, 4, 16, 16, 4, 1)
        init = TTOperator([1e-2 * rng.standard_normal((r[k], 4, r[k + 1])) for k in range(5)], modes, modes)
    X, reports, ok = invert(A, InverseConfig(target_eps=1e-10, mode=mode, init=init, kick_rank=4))
    err = np.linalg.norm(tt_to_matrix(X) - ref) / np.linalg.norm(ref)
    assert err <= 1e-8
    assert ok
    assert column_residual(A, X) <= 5e-10
    for r in reports:
        json.loads(r.to_json())


def test_residual_estimate_cases(rng):
    v = TTVector([rng.uniform(1, 2, (1, 2, 1)) for _ in range(5)])
    A = tt_diag(v)
    Xinv = tt_diag(TTVector([1.0 / c for c in v.cores]))
    assert residual_estimate(A, Xinv) <= 1e-12
    zero = tt_scale(tt_identity((2,) * 5), 0.0)
    assert residual_estimate(A, zero) == pytest.approx(1.0)


def test_residual_estimate_tracks_true_residual(rng):
    modes = (2,) * 6
    A = spd_operator(rng, modes, rank=3)
    X, _, _ = invert(A, InverseConfig(target_eps=1e-3, max_sweeps=2))
    R = tt_to_matrix(A) @ tt_to_matrix(X) - np.eye(64)
    rms = np.linalg.norm(R) / 8.0  # what the sign probes estimate on average
    est = residual_estimate(A, X)
    assert rms / 3 <= est <= 3 * rms
    # order-of-magnitude agreement with the spectral norm
    assert np.linalg.norm(R, 2) / 10 <= est <= np.linalg.norm(R, 2)


def test_preconditioned_identity_matches_plain(rng):
    modes = (2,) * 5
    A = spd_operator(rng, modes)
    cfg = InverseConfig(target_eps=1e-8)
    X, rep, _ = invert(A, cfg)
    out = invert_preconditioned(A, tt_identity(modes), cfg)
    assert len(out.reports) == len(rep)
    np.testing.assert_allclose(tt_to_matrix(out.fused()), tt_to_matrix(X), atol=1e-7)
    b = rng.standard_normal(32)
    np.testing.assert_allclose(out.apply(b), tt_to_matrix(X) @ b, atol=1e-6)


def test_preconditioned_exact_inverse(rng):
    v = TTVector([rng.uniform(1, 2, (1, 2, 1)) for _ in range(5)])
    A = tt_diag(v)
    M = tt_diag(TTVector([1.0 / c for c in v.cores]))
    out = invert_preconditioned(A, M, InverseConfig(target_eps=1e-10))
    assert out.converged and len(out.reports) == 1
    np.testing.assert_allclose(tt_to_matrix(out.Y), np.eye(32), atol=1e-10)


def test_non_convergence_is_flagged(rng):
    modes = (2,) * 6
    A = spd_operator(rng, modes, rank=3, shift=1.2)
    X, reports, ok = invert(A, InverseConfig(target_eps=1e-12, max_sweeps=1, kick_rank=1))
    assert not ok and len(reports) == 1
    assert np.isfinite(reports[0].residual)


def test_config_validation():
    with pytest.raises(ValueError):
        InverseConfig(target_eps=0)
    with pytest.raises(ValueError):
        InverseConfig(kick_rank=0)
    with pytest.raises(ValueError):
        InverseConfig(init="zeros")
    with pytest.raises(ValueError):
        SweepReport(1, float("nan"), 1, 0, 0.0)
    assert InverseConfig(target_eps=1e-4).local_iter_tol == pytest.approx(1e-5)
