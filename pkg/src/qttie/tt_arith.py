"""Arithmetic on TT vectors and operators."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError
from .tensor_core import TensorizationScheme, TTOperator, TTVector, with_cores
from .tt_compress import tt_round


def tt_identity(scheme: TensorizationScheme | Sequence[int]) -> TTOperator:
    """Identity as a Kronecker product of small identities (all ranks 1)."""
    modes = scheme.vector_modes if isinstance(scheme, TensorizationScheme) else tuple(scheme)
    cores = [np.eye(n).reshape(1, n * n, 1) for n in modes]
    return TTOperator(cores, modes, modes, scheme if isinstance(scheme, TensorizationScheme) else None)


def tt_ones(modes: Sequence[int]) -> TTVector:
    return TTVector([np.ones((1, n, 1)) for n in modes])


def tt_zeros_like(x):
    return with_cores(x, [np.zeros((1, c.shape[1], 1)) for c in x.cores])


def tt_scale(x, alpha: float):
    cores = list(x.cores)
    cores[0] = cores[0] * alpha
    return with_cores(x, cores)


def _same_structure(x, y):
    if type(x) is not type(y) or x.flat_modes != y.flat_modes:
        raise ShapeError("operands have different mode structure")
    if isinstance(x, TTOperator) and (x.row_modes, x.col_modes) != (y.row_modes, y.col_modes):
        raise ShapeError("operators have different row/col modes")


def tt_add(x, y, alpha: float = 1.0, beta: float = 1.0):
    """``alpha * x + beta * y`` with block-diagonal cores (ranks add)."""
    _same_structure(x, y)
    d = x.d
    if d == 1:
        return with_cores(x, [alpha * x.cores[0] + beta * y.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        if k == 0:
            c = np.concatenate([alpha * a, beta * b], axis=2)
        elif k == d - 1:
            c = np.concatenate([a, b], axis=0)
        else:
            ra0, n, ra1 = a.shape
            rb0, _, rb1 = b.shape
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = a
            c[ra0:, :, ra1:] = b
        cores.append(c)
    return with_cores(x, cores)


def tt_sub(x, y):
    return tt_add(x, y, 1.0, -1.0)


def tt_dot(x, y) -> float:
    """Inner product of two TTs by left-to-right contraction."""
    _same_structure(x, y)
    G = np.ones((1, 1))
    for a, b in zip(x.cores, y.cores):
        t = np.tensordot(G, b, axes=(1, 0))  # (ra, n, rb')
        G = np.tensordot(a, t, axes=([0, 1], [0, 1]))  # (ra', rb')
    return float(G[0, 0])


def _matvec_cores(A: TTOperator, b: TTVector):
    if tuple(A.col_modes) != tuple(b.modes):
        raise ShapeError(f"operator column modes {A.col_modes} != vector modes {b.modes}")
    cores = []
    for k in range(A.d):
        G = A.block(k)  # (a, i, j, a')
        v = b.cores[k]  # (b, j, b')
        c = np.einsum("aijc,bjd->abicd", G, v)
        ra, rb = G.shape[0], v.shape[0]
        cores.append(c.reshape(ra * rb, G.shape[1], G.shape[3] * v.shape[2]))
    return cores


def tt_matvec_compressed(A: TTOperator, b: TTVector, round_eps: float | None = 1e-12) -> TTVector:
    """Core-wise product; rounded to ``round_eps`` unless it is ``None``."""
    y = TTVector(_matvec_cores(A, b))
    return y if round_eps is None else tt_round(y, round_eps)


def tt_matmat(A: TTOperator, B: TTOperator, round_eps: float | None = 1e-12) -> TTOperator:
    """Product ``A @ B``; pre-rounding ranks are the products of operand ranks."""
    if tuple(A.col_modes) != tuple(B.row_modes):
        raise ShapeError("inner modes of the product do not match")
    cores = []
    for k in range(A.d):
        Ga, Gb = A.block(k), B.block(k)  # (a,i,j,a'), (b,j,l,b')
        c = np.einsum("aijc,bjld->abilcd", Ga, Gb)
        cores.append(
            c.reshape(Ga.shape[0] * Gb.shape[0], Ga.shape[1] * Gb.shape[2], Ga.shape[3] * Gb.shape[3])
        )
    C = TTOperator(cores, A.row_modes, B.col_modes, A.scheme)
    return C if round_eps is None else tt_round(C, round_eps)


def tt_diag(v: TTVector) -> TTOperator:
    """Diagonal operator ``diag(vec(v))`` with the ranks of ``v``."""
    cores = []
    for c in v.cores:
        r0, n, r1 = c.shape
        D = np.zeros((r0, n, n, r1))
        D[:, np.arange(n), np.arange(n), :] = c
        cores.append(D.reshape(r0, n * n, r1))
    return TTOperator(cores, v.modes, v.modes)


def tt_transpose(A: TTOperator) -> TTOperator:
    cores = [A.block(k).transpose(0, 2, 1, 3).reshape(A.cores[k].shape) for k in range(A.d)]
    return TTOperator(cores, A.col_modes, A.row_modes, A.scheme)


def tt_matvec_dense(A: TTOperator, b: np.ndarray) -> np.ndarray:
    """Apply a TT operator to an uncompressed vector in O(r^2 N log N).

    One level per core, finest first.  The working array has axes
    ``(target local index, source box, j_k, alpha_{k-1})`` so that each level
    is a single GEMM of the contiguous ``(local * box) x (j_k alpha)`` view
    with the reshaped core, followed by one pass that moves the new target
    digit to the front and splits the next source digit off the box axis.
    Two preallocated buffers are reused across levels.
    ``b`` may be ``(N,)`` or ``(N, s)`` for several right-hand sides.
    """
    b = np.asarray(b, dtype=np.float64)
    M, N = A.shape
    if b.shape[0] != N:
        raise ShapeError(f"vector length {b.shape[0]} != operator columns {N}")
    squeeze = b.ndim == 1
    B = b.reshape(N, -1)
    s = B.shape[1]
    blocks = [A.block(k) for k in range(A.d)]
    # size of the working array after each level
    sizes, local, boxes = [s * N], 1, s * N
    for G in blocks:
        ra, m, n, ra1 = G.shape
        boxes //= n
        local *= m
        sizes.append(local * boxes * ra1)
    cap = max(sizes)
    work, spare = np.empty(cap), np.empty(cap)
    # right-hand sides become the slowest part of the box axis
    y = work[: s * N].reshape(1, s * N // A.col_modes[0], A.col_modes[0], 1)
    np.copyto(y.reshape(s, N), B.T)
    for k, G in enumerate(blocks):
        ra, m, n, ra1 = G.shape
        local, boxes = y.shape[0], y.shape[1]
        Mk = np.ascontiguousarray(G.transpose(2, 0, 1, 3)).reshape(n * ra, m * ra1)
        phi = spare[: local * boxes * m * ra1].reshape(local * boxes, m * ra1)
        np.matmul(y.reshape(local * boxes, n * ra), Mk, out=phi)
        nxt = A.col_modes[k + 1] if k + 1 < A.d else 1
        # target digit i_k becomes the slowest digit of the local index
        src = phi.reshape(local, boxes // nxt, nxt, m, ra1).transpose(3, 0, 1, 2, 4)
        dst = work[: phi.size].reshape(m, local, boxes // nxt, nxt, ra1)
        np.copyto(dst, src)
        y = dst.reshape(m * local, boxes // nxt, nxt, ra1)
    out = y.reshape(M, s).copy()
    return out[:, 0] if squeeze else out
