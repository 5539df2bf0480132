"""Dense low-rank and direct solvers used by compression and inversion."""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import DataError, SingularMatrixError


@dataclass
class LowRankFactors:
    left: np.ndarray  # p x r
    right: np.ndarray  # r x q
    rank: int
    achieved_error: float
    singular_values: np.ndarray

    def product(self) -> np.ndarray:
        return self.left @ self.right


def _check_finite(M):
    if not np.all(np.isfinite(M)):
        raise DataError("matrix contains non-finite entries")


def svd(M):
    """Thin SVD; falls back to the slower QR-iteration driver if gesdd fails."""
    try:
        return sla.svd(M, full_matrices=False, check_finite=False)
    except np.linalg.LinAlgError:
        return sla.svd(M, full_matrices=False, check_finite=False, lapack_driver="gesvd")


def rank_for_tolerance(s: np.ndarray, tol: float, max_rank: int | None = None) -> int:
    """Smallest r with sqrt(sum_{j>=r} s_j^2) <= tol, at least 1."""
    tail = np.sqrt(np.cumsum((s * s)[::-1]))[::-1]  # tail[j] = ||s[j:]||
    r = int(np.count_nonzero(tail > tol))
    r = max(r, 1)
    if max_rank is not None:
        r = min(r, max_rank)
    return min(r, s.size) if s.size else 1


def truncated_svd(M, tol: float = 0.0, max_rank: int | None = None) -> LowRankFactors:
    """Frobenius-tail truncated SVD, ``M ~ left @ right`` with orthonormal ``left``.

    Each left singular vector is signed so that its largest-magnitude entry is
    positive, which makes cores reproducible across LAPACK builds.
    """
    M = np.asarray(M, dtype=np.float64)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    _check_finite(M)
    U, s, Vt = svd(M)
    r = rank_for_tolerance(s, tol, max_rank)
    U, s_r, Vt = U[:, :r], s[:r], Vt[:r]
    if U.size:
        piv = np.argmax(np.abs(U), axis=0)
        sign = np.sign(U[piv, np.arange(r)])
        sign[sign == 0] = 1.0
        U = U * sign
        Vt = Vt * sign[:, None]
    err = float(np.sqrt(np.sum(s[r:] ** 2)))
    return LowRankFactors(U, s_r[:, None] * Vt, r, err, s)


def dense_solve(M, b):
    """Solve ``M x = b`` by partially pivoted LU.

    Raises :class:`SingularMatrixError` when a pivot vanishes or the estimated
    reciprocal condition number is below machine precision.
    """
    M = np.asarray(M, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")
    _check_finite(M)
    _check_finite(b)
    with warnings.catch_warnings():
        # exact zero pivots are reported below with more context
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    diag = np.abs(np.diag(lu))
    k = int(np.argmin(diag)) if diag.size else 0
    anorm = np.abs(M).sum(axis=0).max() if M.size else 0.0
    if diag.size and diag[k] == 0.0:
        raise SingularMatrixError(f"zero pivot at position {k}", k, 0.0)
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if rcond < np.finfo(float).eps:
        raise SingularMatrixError(
            f"matrix is singular to working precision (rcond={rcond:.2e}, "
            f"smallest pivot {diag[k]:.2e} at {k})",
            k,
            float(diag[k]),
        )
    return sla.lu_solve((lu, piv), b, check_finite=False)


def qr_orthonormalize(M):
    """Reduced QR; returns ``(Q, R)`` with orthonormal columns in ``Q``."""
    M = np.asarray(M, dtype=np.float64)
    _check_finite(M)
    Q, R = np.linalg.qr(M, mode="reduced")
    return Q, R
