import numpy as np
import pytest

from qttie.tensor_core import TTOperator, TTVector, tt_to_matrix
from qttie.tt_compress import orthogonalize_left, orthogonalize_right


def random_tt(rng, modes, rank):
    r = [1] + [rank] * (len(modes) - 1) + [1]
    return TTVector([rng.standard_normal((r[k], n, r[k + 1])) for k, n in enumerate(modes)])


def random_op(rng, modes, rank):
    r = [1] + [rank] * (len(modes) - 1) + [1]
    cores = [rng.standard_normal((r[k], n * n, r[k + 1])) for k, n in enumerate(modes)]
    return TTOperator(cores, modes, modes)


def centered(rng, modes, ranks, k):
    """Random operator-shaped TT orthogonalized around core ``k``."""
    r = [1] + list(ranks) + [1]
    cores = [rng.standard_normal((r[i], n * n, r[i + 1])) for i, n in enumerate(modes)]
    left = orthogonalize_left(cores[: k + 1])
    right = orthogonalize_right([left[-1]] + cores[k + 1 :])
    return TTOperator(left[:-1] + right, modes, modes)


def projected_matrix(A, X, k):
    """Dense oracle for the reduced operator at core ``k``.

    Columns of ``F`` are vec(X(e)) where X(e) replaces core ``k`` by the unit
    tensor ``e``; entry ``[e', e]`` is ``<X(e'), A X(e)>_F``.
    """
    Am = tt_to_matrix(A)
    shape = X.cores[k].shape
    size = int(np.prod(shape))
    F, AF = [], []
    for e in range(size):
        unit = np.zeros(size)
        unit[e] = 1.0
        cores = list(X.cores)
        cores[k] = unit.reshape(shape)
        Xe = tt_to_matrix(TTOperator(cores, X.row_modes, X.col_modes))
        F.append(Xe.ravel())
        AF.append((Am @ Xe).ravel())
    F, AF = np.stack(F, axis=1), np.stack(AF, axis=1)
    return F, F.T @ AF


def random_projection_instance(seed):
    """Random operator with ranks <= 2 on three binary levels."""
    rng = np.random.default_rng(seed)
    modes = (2, 2, 2)
    ra = (1,) + tuple(int(v) for v in rng.integers(1, 3, 2)) + (1,)
    rx = tuple(int(v) for v in rng.integers(1, 3, 2))
    A = TTOperator([rng.standard_normal((ra[k], 4, ra[k + 1])) for k in range(3)], modes, modes)
    return rng, A, modes, rx


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
