"""Building TT representations: TT-SVD, rounding, and two-site cross."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError
from .linalg_core import qr_orthonormalize, rank_for_tolerance, svd, truncated_svd
from .tensor_core import DENSE_GUARD, DenseTensor, TTOperator, TTVector, tt_entries, tt_frobenius_norm, with_cores

log = logging.getLogger(__name__)


@dataclass
class CompressionConfig:
    target_eps: float = 1e-6
    max_rank: int = 2000
    cross_validation_samples: int = 1000
    max_sweeps: int = 20
    kick_rank: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.target_eps > 0:
            raise ValueError("target_eps must be positive")
        if self.max_rank < 1 or self.kick_rank < 1:
            raise ValueError("max_rank and kick_rank must be >= 1")


def _eps_and_cap(cfg):
    if isinstance(cfg, CompressionConfig):
        return cfg.target_eps, cfg.max_rank
    eps = float(cfg)
    if not eps > 0:
        raise ValueError("eps must be positive")
    return eps, None


def tt_svd(t: DenseTensor, cfg: CompressionConfig | float, guard: int = DENSE_GUARD):
    """Sequential truncated SVDs of the unfoldings.

    Every step truncates at ``eps * ||t||_F / sqrt(d - 1)`` so that the total
    error obeys ``||t - TT||_F <= eps * ||t||_F``.  Operator-structured input
    yields a :class:`TTOperator`.
    """
    eps, max_rank = _eps_and_cap(cfg)
    if t.data.size > guard:
        raise CapacityError(f"tensor of size {t.data.size} exceeds guard {guard}")
    modes = t.modes
    d = len(modes)
    delta = eps * float(np.linalg.norm(t.data)) / np.sqrt(d - 1) if d > 1 else 0.0
    cores = []
    r = 1
    M = t.array()
    for k in range(d - 1):
        M = M.reshape(r * modes[k], -1)
        f = truncated_svd(M, delta, max_rank)
        cores.append(f.left.reshape(r, modes[k], f.rank))
        M = f.right
        r = f.rank
    cores.append(np.asarray(M).reshape(r, modes[-1], 1))
    if t.row_modes is not None:
        return TTOperator(cores, t.row_modes, t.col_modes)
    return TTVector(cores)


def orthogonalize_right(cores: list) -> list:
    """Make cores 2..d right-orthogonal; the norm moves into core 1."""
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        Q, R = qr_orthonormalize(cores[k].reshape(r0, n * r1).T)
        cores[k] = Q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], R.T, axes=(2, 0))
    return cores


def orthogonalize_left(cores: list) -> list:
    """Make cores 1..d-1 left-orthogonal; the norm moves into core d."""
    cores = list(cores)
    for k in range(len(cores) - 1):
        r0, n, r1 = cores[k].shape
        Q, R = qr_orthonormalize(cores[k].reshape(r0 * n, r1))
        cores[k] = Q.reshape(r0, n, -1)
        cores[k + 1] = np.tensordot(R, cores[k + 1], axes=(1, 0))
    return cores


def tt_round(x, eps: float, max_rank: int | None = None):
    """Re-truncate ``x`` to relative accuracy ``eps``.

    Right-to-left QR followed by a left-to-right truncated SVD sweep.  The
    result is left-orthogonal in cores 1..d-1.
    """
    cores = orthogonalize_right(x.cores)
    d = len(cores)
    nrm = float(np.linalg.norm(cores[0]))
    delta = eps * nrm / np.sqrt(d - 1) if d > 1 else 0.0
    for k in range(d - 1):
        r0, n, _ = cores[k].shape
        f = truncated_svd(cores[k].reshape(r0 * n, -1), delta, max_rank)
        cores[k] = f.left.reshape(r0, n, f.rank)
        cores[k + 1] = np.tensordot(f.right, cores[k + 1], axes=(1, 0))
    return with_cores(x, cores)


# --------------------------------------------------------------------------
# cross approximation


def maxvol(A: np.ndarray, tol: float = 1.05, max_iters: int = 200) -> np.ndarray:
    """Row indices of a dominant ``r x r`` submatrix of a tall ``n x r`` matrix.

    Starts from LU row pivots and swaps rows while some coefficient of
    ``A @ inv(A[rows])`` exceeds ``tol`` in modulus.
    """
    n, r = A.shape
    if r == 0:
        return np.zeros(0, dtype=np.int64)
    if n <= r:
        return np.arange(n)
    _, piv = sla.lu_factor(A, check_finite=False)
    perm = np.arange(n)
    for i, p in enumerate(piv):
        perm[i], perm[p] = perm[p], perm[i]
    rows = perm[:r].copy()
    sub = A[rows]
    try:
        B = np.linalg.solve(sub.T, A.T).T
    except np.linalg.LinAlgError:
        B = A @ np.linalg.pinv(sub)
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        piv = B[i, j]
        if abs(piv) <= tol:
            break
        rows[j] = i
        # rank-one update of the coefficient matrix after swapping row i into slot j
        bj = B[:, j].copy()
        bi = B[i, :].copy()
        bi[j] -= 1.0
        B -= np.outer(bj, bi / piv)
    return rows


@dataclass
class CrossResult:
    tt: TTVector | TTOperator
    converged: bool
    sweeps: int
    validation_error: float
    evaluations: int
    history: list = field(default_factory=list)


def tt_cross(
    oracle: Callable[[np.ndarray], np.ndarray],
    modes: Sequence[int],
    cfg: CompressionConfig | None = None,
    row_modes: Sequence[int] | None = None,
    col_modes: Sequence[int] | None = None,
) -> CrossResult:
    """Two-site (DMRG-style) cross approximation of a black-box tensor.

    ``oracle`` receives an integer array of multi-indices with shape ``(s, d)``
    and returns ``s`` entries.  Supercores over neighbouring modes are sampled
    on the current left/right index sets, truncated by SVD, widened by
    ``kick_rank`` random directions, and new index sets are chosen by maxvol.
    The sweep loop stops once held-out random entries are reproduced to RMS
    error ``3 * eps`` relative to the RMS entry of the approximation (its
    Frobenius norm over the square root of the entry count) and the
    approximation has stopped moving.
    The final TT is rounded to ``eps``.
    """
    cfg = cfg or CompressionConfig()
    eps = cfg.target_eps
    modes = [int(n) for n in modes]
    d = len(modes)
    rng = np.random.default_rng(cfg.seed)
    counter = [0]

    def f(idx):
        counter[0] += idx.shape[0]
        return np.asarray(oracle(idx), dtype=np.float64).reshape(-1)

    def wrap(cores):
        if row_modes is not None:
            return TTOperator(cores, row_modes, col_modes)
        return TTVector(cores)

    n_val = cfg.cross_validation_samples
    val_idx = np.stack([rng.integers(0, n, size=n_val) for n in modes], axis=1)
    val_f = f(val_idx)
    numel = float(np.prod(modes, dtype=np.float64))

    def rel_rms(diff, tt):
        # sampled RMS error over the exact RMS of the current approximation
        rms = tt_frobenius_norm(tt) / np.sqrt(numel)
        return float(np.sqrt(np.mean(diff * diff))) / (rms or 1.0)

    if d == 1:
        core = f(np.arange(modes[0])[:, None]).reshape(1, modes[0], 1)
        tt = wrap([core])
        return CrossResult(tt, True, 0, 0.0, counter[0])

    # left[k]: prefixes over modes[:k], right[k]: suffixes over modes[k:]
    left = [np.zeros((1, 0), dtype=np.int64)] + [None] * (d - 1)
    right = [None] * d + [np.zeros((1, 0), dtype=np.int64)]
    for k in range(d - 1, 0, -1):
        prev = right[k + 1]
        cnt = min(cfg.kick_rank, int(np.prod(modes[k:], dtype=np.float64)))
        digits = rng.integers(0, modes[k], size=cnt)
        pick = rng.integers(0, prev.shape[0], size=cnt)
        cand = np.column_stack([digits, prev[pick]])
        right[k] = np.unique(cand, axis=0)

    def supercore(k):
        # sample f(left[k], i_k, i_{k+1}, right[k+2])
        L, R = left[k], right[k + 2]
        a, n1, n2, b = L.shape[0], modes[k], modes[k + 1], R.shape[0]
        idx = np.empty((a, n1, n2, b, d), dtype=np.int64)
        idx[..., :k] = L[:, None, None, None, :]
        idx[..., k] = np.arange(n1)[None, :, None, None]
        idx[..., k + 1] = np.arange(n2)[None, None, :, None]
        idx[..., k + 2 :] = R[None, None, None, :, :]
        return f(idx.reshape(-1, d)).reshape(a, n1, n2, b)

    def basis(M, side_max):
        U, s, _ = svd(M)
        nrm = float(np.linalg.norm(s))
        r = rank_for_tolerance(s, eps * nrm / np.sqrt(d - 1), cfg.max_rank)
        U = U[:, :r]
        extra = min(cfg.kick_rank, side_max - r, max(cfg.max_rank - r, 0))
        if extra > 0:
            U, _ = qr_orthonormalize(np.hstack([U, rng.standard_normal((U.shape[0], extra))]))
        return U, r

    history = []
    prev_val = None
    cores = None
    converged = False
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        # left-to-right: refresh left index sets
        for k in range(d - 1):
            S = supercore(k)
            a, n1, n2, b = S.shape
            M = S.reshape(a * n1, n2 * b)
            U, _ = basis(M, min(M.shape))
            rows = maxvol(U)
            left[k + 1] = np.column_stack([left[k][rows // n1], rows % n1])
        # right-to-left: refresh right index sets, build the final TT
        cores = [None] * d
        for k in range(d - 2, -1, -1):
            S = supercore(k)
            a, n1, n2, b = S.shape
            M = S.reshape(a * n1, n2 * b)
            V, _ = basis(M.T, min(M.shape))
            cols = maxvol(V)
            right[k + 1] = np.column_stack([cols // b, right[k + 2][cols % b]])
            sub = V[cols]
            cores[k + 1] = np.linalg.solve(sub.T, V.T).reshape(-1, n2, b)
            if k == 0:
                cores[0] = M[:, cols].reshape(a, n1, -1)
        cur = wrap(cores)
        approx = tt_entries(cur, val_idx)
        err = rel_rms(approx - val_f, cur)
        change = np.inf if prev_val is None else rel_rms(approx - prev_val, cur)
        prev_val = approx
        ranks = (1,) + tuple(c.shape[2] for c in cores)
        history.append({"sweep": sweep, "validation": err, "change": change, "max_rank": max(ranks)})
        log.debug("cross sweep %d: val=%.3e change=%.3e ranks=%s", sweep, err, change, ranks)
        if err <= 3 * eps and change <= 3 * eps:
            converged = True
            break

    tt = tt_round(wrap(cores), eps, cfg.max_rank)
    final_err = rel_rms(tt_entries(tt, val_idx) - val_f, tt)
    converged = converged and final_err <= 3 * eps
    return CrossResult(tt, converged, sweep, final_err, counter[0], history)
