import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qttie.errors import CapacityError
from qttie.ie_kernels import (
    Coefficient,
    GridSpec,
    Kernel,
    ProblemSpec,
    coefficient_vector,
    dense_assemble,
    diric,
    diric_rhs,
    gaussian,
    gaussian_coeff,
    matrix_entries,
    matrix_entry,
    operator_oracle,
)
from qttie.tensor_core import grid_to_index
from qttie.tt_compress import tt_svd
from qttie.ie_kernels import dense_operator_tensor


def test_grid_basics():
    g = GridSpec(3, 16)
    assert g.N == 4096 and g.h == 0.125 and g.levels == 4
    assert g.scheme.depth == 12
    pts = g.points()
    assert pts.min() == pytest.approx(-1 + g.h / 2)
    assert pts.max() == pytest.approx(1 - g.h / 2)
    with pytest.raises(ValueError):
        GridSpec(3, 12)


def test_punctured_diagonal():
    p = ProblemSpec(GridSpec(3, 8), a=2.5, b_coeff=gaussian(), c_coeff=gaussian())
    idx = np.arange(p.grid.N)
    np.testing.assert_array_equal(matrix_entries(p, idx, idx), 2.5)
    assert matrix_entry(p, 7, 7) == 2.5


def test_adjacent_entry_value():
    g = GridSpec(3, 16)
    p = ProblemSpec(g)
    s = g.scheme
    i = int(grid_to_index(s, np.array([3, 5, 7])))
    j = int(grid_to_index(s, np.array([4, 5, 7])))
    h = 0.125
    assert matrix_entry(p, i, j) == pytest.approx(1.0 / (4 * np.pi * h) * h**3, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=6, max_size=6), st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_translation_invariance(c, t):
    g = GridSpec(3, 8)
    p = ProblemSpec(g)
    ci, cj = np.array(c[:3]), np.array(c[3:])
    t = np.array(t)
    if np.any(ci + t < 0) or np.any(ci + t > 7) or np.any(cj + t < 0) or np.any(cj + t > 7):
        return
    s = g.scheme
    e1 = matrix_entry(p, int(grid_to_index(s, ci)), int(grid_to_index(s, cj)))
    e2 = matrix_entry(p, int(grid_to_index(s, ci + t)), int(grid_to_index(s, cj + t)))
    assert e1 == pytest.approx(e2, rel=1e-13)


def test_gaussian_coeff():
    x0 = np.array([0.1, 0.2, 0.3])
    assert gaussian_coeff(x0, x0) == 2.0
    far = x0 + np.array([6.0, 0, 0])
    assert gaussian_coeff(far, x0) == pytest.approx(1 + np.exp(-36.0), rel=1e-15)
    g = GridSpec(3, 8)
    pts = g.points()
    v = coefficient_vector(ProblemSpec(g, b_coeff=gaussian(x0)), "b")
    k = 123
    assert v[k] == pytest.approx(1 + np.exp(-np.sum((pts[k] - x0) ** 2)))
    with pytest.raises(ValueError):
        Coefficient("Gaussian", (2.0, 0, 0))


def test_diric():
    assert diric(0.0, 10) == 1.0
    t = 0.731
    assert diric(t, 10) == pytest.approx(np.sin(10 * t / 2) / (10 * np.sin(t / 2)), rel=1e-14)
    # removable singularity branch at 2 pi k
    assert diric(2 * np.pi, 10) == -1.0
    assert diric(2 * np.pi, 9) == 1.0
    assert diric(4 * np.pi, 10) == 1.0
    f = diric_rhs(GridSpec(3, 4))
    pts = GridSpec(3, 4).points()
    assert f[5] == pytest.approx(np.prod(diric(2 * np.pi * pts[5], 10)))
    with pytest.raises(ValueError):
        diric_rhs(GridSpec(3, 4), 0)


def test_dense_assemble(rng):
    p = ProblemSpec(GridSpec(3, 8), b_coeff=gaussian(), c_coeff=gaussian())
    A = dense_assemble(p)
    np.testing.assert_array_equal(np.diag(A), 1.0)
    np.testing.assert_allclose(A, A.T, rtol=1e-14)
    rows, cols = rng.integers(0, 512, 100), rng.integers(0, 512, 100)
    np.testing.assert_allclose(A[rows, cols], [matrix_entry(p, i, j) for i, j in zip(rows, cols)], rtol=1e-14)
    with pytest.raises(CapacityError):
        dense_assemble(ProblemSpec(GridSpec(3, 32)))


def test_operator_oracle(rng):
    p = ProblemSpec(GridSpec(3, 8))
    f = operator_oracle(p)
    d = p.grid.scheme.depth
    assert f(np.zeros((1, d), dtype=int))[0] == 1.0
    A = dense_assemble(p)
    idx = rng.integers(0, 4, size=(50, d))
    i, j = idx // 2, idx % 2
    rows = (i * 2 ** np.arange(d)).sum(1)
    cols = (j * 2 ** np.arange(d)).sum(1)
    np.testing.assert_allclose(f(idx), A[rows, cols], rtol=1e-14)


def test_other_kernels():
    g = GridSpec(2, 8)
    p = ProblemSpec(g, kernel=Kernel.LOG_2D)
    pts = g.points()
    e = matrix_entry(p, 0, 1)
    r = np.linalg.norm(pts[0] - pts[1])
    assert e == pytest.approx(-np.log(r) / (2 * np.pi) * g.h**2)
    q = ProblemSpec(GridSpec(1, 8), kernel="Power", power=-0.5)
    r = 0.25
    assert matrix_entry(q, 0, 1) == pytest.approx(r**-0.5 * 0.25)


def test_spec_json_round_trip():
    p = ProblemSpec(GridSpec(3, 16), a=1.0, b_coeff=gaussian(), c_coeff=Coefficient())
    q = ProblemSpec.from_json(p.to_json())
    assert q == p
    doc = json.loads(p.to_json())
    assert doc["kernel"] == "LaplaceSingleLayer3D"
    with pytest.raises(ValueError):
        ProblemSpec(GridSpec(3, 8), a=0.0)


def test_nti_rank_bound():
    g = GridSpec(3, 8)
    eps = 1e-6
    from qttie.tensor_core import DenseTensor

    pb = ProblemSpec(g, b_coeff=gaussian(), c_coeff=gaussian())
    rA = tt_svd(dense_operator_tensor(pb), eps).max_rank
    rK = tt_svd(dense_operator_tensor(ProblemSpec(g)), eps).max_rank
    rb = tt_svd(DenseTensor(coefficient_vector(pb, "b"), g.scheme.vector_modes), eps).max_rank
    rc = tt_svd(DenseTensor(coefficient_vector(pb, "c"), g.scheme.vector_modes), eps).max_rank
    assert rA <= rb * rK * rc + 1
