"""GMRES with optional right preconditioning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

LOSS_TOL = 1e-8


@dataclass
class GmresConfig:
    tol: float = 1e-8
    max_iters: int = 200
    restart: int | None = None
    record_history: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SolveResult:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    matvec_count: int = 0
    converged: bool = False
    true_residual: float = np.nan


def gmres(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    cfg: GmresConfig | None = None,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> SolveResult:
    """Solve ``A x = b`` as ``A M y = b``, ``x = x0 + M y``.

    Arnoldi uses modified Gram-Schmidt with a second pass whenever the new
    vector's cosine against some basis vector exceeds ``LOSS_TOL``.
    Residual norms in the history are relative to ``||b||``; the returned
    ``true_residual`` is recomputed with one extra application of ``A``.
    ``restart=None`` runs without restarting.
    """
    cfg = cfg or GmresConfig()
    b = np.asarray(b, dtype=np.float64)
    M = precond if precond is not None else (lambda v: v)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return SolveResult(np.zeros_like(b), 0, [0.0], 0, True, 0.0)

    history = []
    matvecs = 0
    iters = 0
    m_cycle = cfg.restart or cfg.max_iters
    converged = False

    if x0 is None:
        r = b.copy()
    else:
        r = b - apply_A(x)
        matvecs += 1
    beta = float(np.linalg.norm(r))
    history.append(beta / bnorm)
    if beta / bnorm <= cfg.tol:
        converged = True

    while not converged and iters < cfg.max_iters:
        m = min(m_cycle, cfg.max_iters - iters)
        V = np.zeros((m + 1, b.size))
        H = np.zeros((m + 1, m))
        V[0] = r / beta
        # Givens rotations keep the least-squares residual available each step
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        j_used = 0
        for j in range(m):
            w = np.array(apply_A(M(V[j])), dtype=np.float64)  # copy: apply_A may alias its input
            matvecs += 1
            iters += 1
            w_norm0 = float(np.linalg.norm(w))
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            c = V[: j + 1] @ w
            if np.abs(c).max() > LOSS_TOL * max(float(np.linalg.norm(w)), 1e-300):
                # one more pass when orthogonality to the basis has degraded
                for i in range(j + 1):
                    c_i = V[i] @ w
                    H[i, j] += c_i
                    w -= c_i * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * max(w_norm0, 1e-300)
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if denom == 0 else (H[j, j] / denom, H[j + 1, j] / denom)
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            res = abs(g[j + 1]) / bnorm
            history.append(res)
            j_used = j + 1
            if res <= cfg.tol or breakdown:
                converged = res <= cfg.tol or breakdown
                break
        y = sla.solve_triangular(H[:j_used, :j_used], g[:j_used])
        x = x + M(V[:j_used].T @ y)
        if converged or iters >= cfg.max_iters:
            break
        r = b - apply_A(x)
        matvecs += 1
        beta = float(np.linalg.norm(r))

    true_res = float(np.linalg.norm(b - apply_A(x))) / bnorm
    converged = converged and true_res <= max(cfg.tol * 10, cfg.tol + 1e-12)
    return SolveResult(
        x,
        iters,
        history if cfg.record_history else [],
        matvecs,
        converged,
        true_res,
    )
