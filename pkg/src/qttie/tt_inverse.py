"""Approximate inverses of TT operators by alternating local solves.

The matrix equation ``A X = I`` is treated as a linear system for the TT
vector ``vec(X)`` with operator ``I (x) A``.  With all cores of ``X`` but
one (or two) orthogonalized, the projected system is small and its operator
factorizes into a left interface ``Psi``, the operator core(s) and a right
interface ``Phi``.  Column digits of ``X`` are passive in that operator, so
a local system of ``r * n^2 * r'`` unknowns splits into ``n`` independent
systems of ``r * n * r'`` unknowns sharing one matrix.

Local core arrays are ordered ``(rho, i, j, rho')`` with ``i`` the row digit;
flattened local systems use C order over that shape.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ShapeError, SingularMatrixError
from .krylov import GmresConfig, gmres
from .linalg_core import dense_solve, qr_orthonormalize, truncated_svd
from .tensor_core import TTOperator
from .tt_arith import tt_identity, tt_matmat, tt_matvec_dense, tt_scale, tt_transpose
from .tt_compress import orthogonalize_right, tt_round

log = logging.getLogger(__name__)


class LocalSolver(str, enum.Enum):
    DENSE = "Dense"
    ITERATIVE = "Iterative"


class Mode(str, enum.Enum):
    ALS = "ALS"
    AMEN = "AMEn"
    DMRG = "DMRG"
    DMRG_ENRICH = "DMRGPlusEnrich"


@dataclass
class InverseConfig:
    """Settings for :func:`invert`.

    ``init`` is ``"ScaledIdentity"`` or a :class:`TTOperator` initial guess.
    ``local_solver`` picks the path above the dense threshold; systems with
    at most ``local_dense_threshold`` unknowns are always solved directly.
    ``local_iter_tol`` defaults to ``target_eps / 10``.
    """

    target_eps: float = 1e-6
    max_sweeps: int = 20
    local_solver: LocalSolver = LocalSolver.ITERATIVE
    local_dense_threshold: int = 2000
    local_iter_tol: float | None = None
    local_max_iters: int = 200
    kick_rank: int = 24
    max_rank: int = 1000
    init: object = "ScaledIdentity"
    mode: Mode = Mode.AMEN
    probes: int = 8
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.local_solver = LocalSolver(self.local_solver)
        if self.local_iter_tol is None:
            self.local_iter_tol = self.target_eps / 10
        if not (self.target_eps > 0 and self.local_iter_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.local_dense_threshold < 1 or self.max_rank < 1 or self.max_sweeps < 1:
            raise ValueError("thresholds must be positive")
        if self.kick_rank < 1:
            raise ValueError("kick_rank must be >= 1")
        if not (self.init == "ScaledIdentity" or isinstance(self.init, TTOperator)):
            raise ValueError("init must be 'ScaledIdentity' or a TTOperator")


@dataclass
class SweepReport:
    sweep: int
    residual: float
    max_rank: int
    local_iterations: int
    wall_time_s: float
    max_local_residual: float = 0.0
    accepted: bool = True

    def __post_init__(self):
        if not np.isfinite(self.residual):
            raise ValueError("residual estimate must be finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self))


class InverseResult(NamedTuple):
    X: TTOperator
    reports: list
    converged: bool


# --------------------------------------------------------------------------
# interface recursions


def _op4(A: TTOperator, k: int) -> np.ndarray:
    return A.block(k)


def _core4(c: np.ndarray, n: int) -> np.ndarray:
    r0, _, r1 = c.shape
    return c.reshape(r0, n, -1, r1)


def psi_next(psi, Y, A4, X):
    """Left interface after one more core: ``Psi'[y', a', x']``.

    ``Y`` is the test core, ``X`` the trial core (both ``(r, n*n, r')``),
    ``A4`` the operator block ``(a, i, l, a')``.
    """
    n = A4.shape[2]
    X4, Y4 = _core4(X, n), _core4(Y, A4.shape[1])
    t = np.tensordot(psi, X4, axes=(2, 0))  # y a l j x'
    t = np.tensordot(t, A4, axes=([1, 2], [0, 2]))  # y j x' i a'
    t = np.tensordot(t, Y4, axes=([0, 3, 1], [0, 1, 2]))  # x' a' y'
    return t.transpose(2, 1, 0)


def phi_next(phi, Y, A4, X):
    """Right interface after one more core: ``Phi[y, a, x]`` from ``Phi'``."""
    n = A4.shape[2]
    X4, Y4 = _core4(X, n), _core4(Y, A4.shape[1])
    t = np.tensordot(X4, phi, axes=(3, 2))  # x l j y' a'
    t = np.tensordot(t, A4, axes=([1, 4], [2, 3]))  # x j y' a i
    t = np.tensordot(t, Y4, axes=([1, 2, 4], [2, 3, 1]))  # x a y
    return t.transpose(2, 1, 0)


def psi_rhs_next(psi, Y, F):
    return np.einsum("pb,pxq,bxc->qc", psi, Y, F)


def phi_rhs_next(phi, Y, F):
    return np.einsum("qc,pxq,bxc->pb", phi, Y, F)


@dataclass
class InterfaceStacks:
    """``psi[k]`` contracts cores ``< k`` and ``phi[k]`` cores ``> k``.

    Operator stacks have shape ``(r_test, r_A, r_trial)``; right-hand-side
    stacks (``psi_f``, ``phi_f``) have shape ``(r_test, r_F)``.
    """

    psi: list
    phi: list
    psi_f: list = field(default_factory=list)
    phi_f: list = field(default_factory=list)


def _check_compatible(A: TTOperator, X: TTOperator):
    if A.d != X.d:
        raise ShapeError(f"operator has {A.d} cores, unknown has {X.d}")
    if tuple(A.row_modes) != tuple(A.col_modes):
        raise ShapeError("operator must be square in every mode")
    if tuple(X.row_modes) != tuple(A.col_modes):
        raise ShapeError("mode mismatch between operator and unknown")


def build_interface_stacks(A: TTOperator, X: TTOperator, F: TTOperator | None = None,
                           test: TTOperator | None = None) -> InterfaceStacks:
    """All left and right interfaces of ``test^T (I (x) A) X`` and ``test^T vec(F)``.

    ``test`` defaults to ``X`` (Galerkin frame) and ``F`` to the identity.
    """
    _check_compatible(A, X)
    test = X if test is None else test
    F = tt_identity(A.row_modes) if F is None else F
    d = A.d
    one3, one2 = np.ones((1, 1, 1)), np.ones((1, 1))
    psi, psi_f = [one3], [one2]
    for k in range(d - 1):
        psi.append(psi_next(psi[-1], test.cores[k], _op4(A, k), X.cores[k]))
        psi_f.append(psi_rhs_next(psi_f[-1], test.cores[k], F.cores[k]))
    phi, phi_f = [one3], [one2]
    for k in range(d - 1, 0, -1):
        phi.append(phi_next(phi[-1], test.cores[k], _op4(A, k), X.cores[k]))
        phi_f.append(phi_rhs_next(phi_f[-1], test.cores[k], F.cores[k]))
    return InterfaceStacks(psi, phi[::-1], psi_f, phi_f[::-1])


# --------------------------------------------------------------------------
# local systems


def local_apply(psi, A4, phi, W):
    """Apply the one-site projected operator to ``W[x, l, j, x']``."""
    t = np.tensordot(psi, W, axes=(2, 0))  # y a l j x'
    t = np.tensordot(t, A4, axes=([1, 2], [0, 2]))  # y j x' i a'
    t = np.tensordot(t, phi, axes=([2, 4], [2, 1]))  # y j i y'
    return t.transpose(0, 2, 1, 3)


def local_apply2(psi, A4a, A4b, phi, W):
    """Two-site version on ``W[x, l1, j1, l2, j2, x']``."""
    t = np.tensordot(psi, W, axes=(2, 0))  # y a l1 j1 l2 j2 x'
    t = np.tensordot(t, A4a, axes=([1, 2], [0, 2]))  # y j1 l2 j2 x' i1 b
    t = np.tensordot(t, A4b, axes=([6, 2], [0, 2]))  # y j1 j2 x' i1 i2 a'
    t = np.tensordot(t, phi, axes=([3, 6], [2, 1]))  # y j1 j2 i1 i2 y'
    return t.transpose(0, 3, 1, 4, 2, 5)


def local_matrix(psi, A4, phi) -> np.ndarray:
    """Reduced matrix of one column digit: rows ``(y, i, y')``, cols ``(x, l, x')``."""
    B = np.einsum("paq,ailb,rbs->pirqls", psi, A4, phi, optimize=True)
    r0, m, r1 = psi.shape[0], A4.shape[1], phi.shape[0]
    c0, n, c1 = psi.shape[2], A4.shape[2], phi.shape[2]
    return B.reshape(r0 * m * r1, c0 * n * c1)


def assemble_local_matrix(stacks: InterfaceStacks, A: TTOperator, k: int) -> np.ndarray:
    """Full reduced matrix for core ``k`` including the passive column digit.

    Unknowns are the entries of the core ``(rho, i, j, rho')`` in C order.
    """
    psi, phi, A4 = stacks.psi[k], stacks.phi[k], _op4(A, k)
    J = A4.shape[2]
    B = np.einsum("paq,ailb,rbs,jk->pijrqlks", psi, A4, phi, np.eye(J), optimize=True)
    rows = psi.shape[0] * A4.shape[1] * J * phi.shape[0]
    return B.reshape(rows, -1)


@dataclass
class LocalSolveInfo:
    iterations: int = 0
    residual: float = 0.0
    initial_residual: float = 0.0
    converged: bool = True
    dense: bool = True


def solve_local_system(apply, dense_matrix, rhs, x0, cfg: InverseConfig):
    """Solve one projected system; ``rhs``/``x0`` carry a trailing column-digit grouping.

    ``apply`` maps an array shaped like ``x0`` to the operator image.
    ``dense_matrix`` is a zero-argument callable returning the reduced matrix
    of one column digit, used when the per-digit size is below the threshold.
    ``rhs`` and ``x0`` are ``(rows, J)`` views with the column digit last.
    """
    shape = x0.shape
    rnorm = float(np.linalg.norm(rhs)) or 1.0
    r0 = float(np.linalg.norm(apply(x0) - rhs)) / rnorm
    info = LocalSolveInfo(initial_residual=r0)
    size = x0.size // x0.shape[-1]
    use_dense = size <= cfg.local_dense_threshold or cfg.local_solver is LocalSolver.DENSE
    if use_dense:
        B = dense_matrix()
        try:
            sol = dense_solve(B, rhs.reshape(size, -1))
        except SingularMatrixError:
            sol = np.linalg.lstsq(B, rhs.reshape(size, -1), rcond=None)[0]
            info.converged = False
        sol = sol.reshape(shape)
        info.residual = float(np.linalg.norm(apply(sol) - rhs)) / rnorm
        return sol, info
    info.dense = False
    gcfg = GmresConfig(tol=cfg.local_iter_tol, max_iters=cfg.local_max_iters, restart=40)
    res = gmres(
        lambda v: apply(v.reshape(shape)).reshape(-1),
        rhs.reshape(-1),
        gcfg,
        x0=x0.reshape(-1),
    )
    info.iterations = res.iterations
    info.residual = res.true_residual
    info.converged = res.converged
    sol = res.solution.reshape(shape)
    if info.residual > r0:
        # never make the local residual worse than the starting core
        sol, info.residual = x0, r0
    return sol, info


# --------------------------------------------------------------------------
# sweeps


def _norm2_estimate(A: TTOperator, steps: int = 10, seed: int = 0) -> float:
    """Power iteration on ``A^T A`` through dense TT matvecs."""
    rng = np.random.default_rng(seed)
    At = tt_transpose(A)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(steps):
        w = tt_matvec_dense(At, tt_matvec_dense(A, v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))


def _apply_pair(A, X, Z):
    """``A @ (X @ Z)`` for the dense block ``Z``; ``X`` may be an (M, Y) pair."""
    if isinstance(X, tuple):
        M, Y = X
        return tt_matvec_dense(A, tt_matvec_dense(M, tt_matvec_dense(Y, Z)))
    return tt_matvec_dense(A, tt_matvec_dense(X, Z))


def residual_estimate(A: TTOperator, X, probes: int = 8, seed: int = 0) -> float:
    """Mean of ``||A X z - z|| / ||z||`` over random sign vectors ``z``.

    ``X`` is a :class:`TTOperator` or an ``(M, Y)`` pair meaning ``M @ Y``.
    An order-of-magnitude indicator for ``||A X - I||``.
    """
    rng = np.random.default_rng(seed)
    N = A.shape[1]
    Z = rng.choice([-1.0, 1.0], size=(N, probes))
    R = _apply_pair(A, X, Z) - Z
    return float(np.mean(np.linalg.norm(R, axis=0) / np.sqrt(N)))


def column_residual(A: TTOperator, X, samples: int = 8, seed: int = 0) -> float:
    """Mean of ``||A X e_j - e_j||`` over ``samples`` random unit coordinate vectors."""
    rng = np.random.default_rng(seed)
    N = A.shape[1]
    cols = rng.choice(N, size=min(samples, N), replace=False)
    E = np.zeros((N, cols.size))
    E[cols, np.arange(cols.size)] = 1.0
    return float(np.mean(np.linalg.norm(_apply_pair(A, X, E) - E, axis=0)))


def _truncate_left(W, n2, delta, max_rank):
    """Split ``W (r, n2, r')`` into a left-orthogonal factor and the remainder."""
    r0 = W.shape[0]
    f = truncated_svd(W.reshape(r0 * n2, -1), delta, max_rank)
    return f.left, f.right


def _truncate_right(W, n2, delta, max_rank):
    r1 = W.shape[-1]
    f = truncated_svd(W.reshape(-1, n2 * r1).T, delta, max_rank)
    return f.left, f.right  # V (n2 r1, k), coefficients (k, r0)


class _Sweeper:
    """State of an alternating solver over the cores of ``X``."""

    def __init__(self, A: TTOperator, X: TTOperator, cfg: InverseConfig):
        self.A, self.cfg = A, cfg
        self.d = A.d
        self.modes = tuple(A.col_modes)
        self.n2 = [n * n for n in self.modes]
        self.F = tt_identity(A.row_modes)
        self.rng = np.random.default_rng(cfg.seed)
        self.kick = cfg.kick_rank
        self.enrich = cfg.mode in (Mode.AMEN, Mode.DMRG_ENRICH)
        self.cores = orthogonalize_right([c.copy() for c in X.cores])
        d = self.d
        self.delta_scale = cfg.target_eps / np.sqrt(max(d - 1, 1))
        st = build_interface_stacks(A, self._X())
        self.psi, self.phi, self.psi_f, self.phi_f = st.psi, st.phi, st.psi_f, st.phi_f
        if self.enrich:
            self._init_residual_frame()

    # -- helpers
    def _X(self):
        return TTOperator(self.cores, self.modes, self.modes)

    def _init_residual_frame(self):
        z = self.kick
        zr = [1] + [z] * (self.d - 1) + [1]
        Z = [self.rng.standard_normal((zr[k], self.n2[k], zr[k + 1])) for k in range(self.d)]
        self.zcores = orthogonalize_right(Z)
        Zt = TTOperator(self.zcores, self.modes, self.modes)
        st = build_interface_stacks(self.A, self._X(), test=Zt)
        self.zpsi, self.zphi, self.zpsi_f, self.zphi_f = st.psi, st.phi, st.psi_f, st.phi_f

    def _rhs(self, psi_f, k, phi_f):
        return np.einsum("pb,bxc,qc->pxq", psi_f, self.F.cores[k], phi_f)

    def _residual_core(self, psi, psi_f, k, phi, phi_f, W):
        """Local residual ``F - A X`` projected on the given frames (3-index core)."""
        n = self.modes[k]
        AW = local_apply(psi, _op4(self.A, k), phi, _core4(W, n))
        return self._rhs(psi_f, k, phi_f) - AW.reshape(AW.shape[0], n * n, -1)

    # -- one-site local solve
    def _solve_one(self, k):
        n = self.modes[k]
        A4 = _op4(self.A, k)
        psi, phi = self.psi[k], self.phi[k]
        rhs = self._rhs(self.psi_f[k], k, self.phi_f[k])
        r0, _, r1 = rhs.shape
        # move the passive column digit last: (r0, i, r1, j)
        rhs4 = rhs.reshape(r0, n, n, r1).transpose(0, 1, 3, 2)
        x04 = _core4(self.cores[k], n).transpose(0, 1, 3, 2)

        def apply(v):
            return local_apply(psi, A4, phi, v.transpose(0, 1, 3, 2)).transpose(0, 1, 3, 2)

        sol, info = solve_local_system(
            apply, lambda: local_matrix(psi, A4, phi), rhs4, np.ascontiguousarray(x04), self.cfg
        )
        W = sol.transpose(0, 1, 3, 2).reshape(r0, n * n, r1)
        return W, info

    def _solve_two(self, k):
        n1, n2 = self.modes[k], self.modes[k + 1]
        Aa, Ab = _op4(self.A, k), _op4(self.A, k + 1)
        psi, phi = self.psi[k], self.phi[k + 1]
        F1, F2 = self.F.cores[k], self.F.cores[k + 1]
        rhs = np.einsum("pb,bxc,cyd,qd->pxyq", self.psi_f[k], F1, F2, self.phi_f[k + 1])
        r0, r1 = rhs.shape[0], rhs.shape[-1]
        rhs6 = rhs.reshape(r0, n1, n1, n2, n2, r1)
        x0 = np.tensordot(self.cores[k], self.cores[k + 1], axes=(2, 0)).reshape(r0, n1, n1, n2, n2, r1)
        perm = (0, 1, 3, 5, 2, 4)  # (x, i1, i2, x', j1, j2)
        inv = np.argsort(perm)

        def apply(v):
            w = v.transpose(inv)
            return local_apply2(psi, Aa, Ab, phi, w).transpose(perm)

        def dense():
            B = np.einsum("paq,aixb,bjyc,rcs->pijrqxys", psi, Aa, Ab, phi, optimize=True)
            s = r0 * n1 * n2 * r1
            return B.reshape(s, -1)

        rhs_p = np.ascontiguousarray(rhs6.transpose(perm)).reshape(r0, n1, n2, r1, n1 * n2)
        x0_p = np.ascontiguousarray(x0.transpose(perm)).reshape(rhs_p.shape)
        shape6 = (r0, n1, n2, r1, n1, n2)

        def apply_p(v):
            return apply(v.reshape(shape6)).reshape(rhs_p.shape)

        sol, info = solve_local_system(apply_p, dense, rhs_p, x0_p, self.cfg)
        W = sol.reshape(shape6).transpose(inv)  # (x, i1, j1, i2, j2, x')
        return W.reshape(r0 * n1 * n1, n2 * n2 * r1), info

    # -- stack updates
    def _push_left(self, k):
        A4 = _op4(self.A, k)
        self.psi[k + 1] = psi_next(self.psi[k], self.cores[k], A4, self.cores[k])
        self.psi_f[k + 1] = psi_rhs_next(self.psi_f[k], self.cores[k], self.F.cores[k])
        if self.enrich:
            self.zpsi[k + 1] = psi_next(self.zpsi[k], self.zcores[k], A4, self.cores[k])
            self.zpsi_f[k + 1] = psi_rhs_next(self.zpsi_f[k], self.zcores[k], self.F.cores[k])

    def _push_right(self, k):
        A4 = _op4(self.A, k)
        self.phi[k - 1] = phi_next(self.phi[k], self.cores[k], A4, self.cores[k])
        self.phi_f[k - 1] = phi_rhs_next(self.phi_f[k], self.cores[k], self.F.cores[k])
        if self.enrich:
            self.zphi[k - 1] = phi_next(self.zphi[k], self.zcores[k], A4, self.cores[k])
            self.zphi_f[k - 1] = phi_rhs_next(self.zphi_f[k], self.zcores[k], self.F.cores[k])

    # -- enrichment (residual-based basis expansion)
    def _enrich_left(self, k, U, R):
        """Bond ``k|k+1`` after a left-to-right step.

        ``U (r0*n2, s)`` is the new left factor and ``R (s, r1')`` carries the
        rest into core ``k+1``; ``r1'`` is the current left rank of core k+1.
        """
        r0 = self.cores[k].shape[0]
        n2 = self.n2[k]
        nxt = self.cores[k + 1]
        # trial core k+1 absorbs R so that the right interface sees the updated X
        trial_next = np.tensordot(R, nxt, axes=(1, 0))
        A_next = _op4(self.A, k + 1)
        zphi = phi_next(self.zphi[k + 1], self.zcores[k + 1], A_next, trial_next)
        zphi_f = self.zphi_f[k]
        W = U.reshape(r0, n2, -1)
        res = self._residual_core(self.psi[k], self.psi_f[k], k, zphi, zphi_f, W)
        zres = self._residual_core(self.zpsi[k], self.zpsi_f[k], k, zphi, zphi_f, W)
        zr0 = zres.shape[0]
        Qz, _ = qr_orthonormalize(zres.reshape(zr0 * n2, -1))
        self.zcores[k] = Qz.reshape(zr0, n2, -1)
        Q, Rq = qr_orthonormalize(np.hstack([U, res.reshape(r0 * n2, -1)]))
        Q, Rq = self._cap(Q, Rq, U.shape[1])
        coef = Rq[:, : U.shape[1]] @ R
        self.cores[k] = Q.reshape(r0, n2, -1)
        self.cores[k + 1] = np.tensordot(coef, nxt, axes=(1, 0))

    def _enrich_right(self, k, V, R):
        """Bond ``k-1|k`` after a right-to-left step; ``V (n2*r1, s)``, ``R (s, r0')``."""
        r1 = self.cores[k].shape[2]
        n2 = self.n2[k]
        prv = self.cores[k - 1]
        trial_prev = np.tensordot(prv, R.T, axes=(2, 0))
        A_prev = _op4(self.A, k - 1)
        zpsi = psi_next(self.zpsi[k - 1], self.zcores[k - 1], A_prev, trial_prev)
        zpsi_f = self.zpsi_f[k]
        W = V.T.reshape(-1, n2, r1)
        res = self._residual_core(zpsi, zpsi_f, k, self.phi[k], self.phi_f[k], W)
        zres = self._residual_core(zpsi, zpsi_f, k, self.zphi[k], self.zphi_f[k], W)
        zr1 = zres.shape[2]
        Qz, _ = qr_orthonormalize(zres.reshape(-1, n2 * zr1).T)
        self.zcores[k] = Qz.T.reshape(-1, n2, zr1)
        extra = res.reshape(-1, n2 * r1).T
        Q, Rq = qr_orthonormalize(np.hstack([V, extra]))
        Q, Rq = self._cap(Q, Rq, V.shape[1])
        coef = Rq[:, : V.shape[1]] @ R  # (s', r0')
        self.cores[k] = Q.T.reshape(-1, n2, r1)
        self.cores[k - 1] = np.tensordot(prv, coef.T, axes=(2, 0))

    def _cap(self, Q, R, base):
        keep = min(Q.shape[1], max(self.cfg.max_rank, base))
        return Q[:, :keep], R[:keep]

    # -- half sweeps
    def left_to_right(self, two_site: bool):
        stats = []
        for k in range(self.d - 1):
            if two_site:
                Wsup, info = self._solve_two(k)
                f = truncated_svd(Wsup, self._delta(Wsup), self.cfg.max_rank)
                U = f.left
                R = f.right.reshape(f.rank, -1)
                r0 = self.cores[k].shape[0]
                # next core temporarily holds the whole right factor with unit left bond map
                self.cores[k + 1] = R.reshape(f.rank, self.n2[k + 1], -1)
                R = np.eye(f.rank)
            else:
                W, info = self._solve_one(k)
                U, R = _truncate_left(W, self.n2[k], self._delta(W), self.cfg.max_rank)
                r0 = W.shape[0]
            stats.append(info)
            if self.enrich:
                self._enrich_left(k, U, R)
            else:
                self.cores[k] = U.reshape(r0, self.n2[k], -1)
                self.cores[k + 1] = np.tensordot(R, self.cores[k + 1], axes=(1, 0))
            self._push_left(k)
        return stats

    def right_to_left(self, two_site: bool):
        stats = []
        for k in range(self.d - 1, 0, -1):
            if two_site:
                Wsup, info = self._solve_two(k - 1)
                f = truncated_svd(Wsup.T, self._delta(Wsup), self.cfg.max_rank)
                V = f.left  # (n2 r1, s)
                self.cores[k - 1] = f.right.T.reshape(-1, self.n2[k - 1], f.rank)
                R = np.eye(f.rank)
            else:
                W, info = self._solve_one(k)
                V, R = _truncate_right(W, self.n2[k], self._delta(W), self.cfg.max_rank)
            stats.append(info)
            if self.enrich:
                self._enrich_right(k, V, R)
            else:
                r1 = self.cores[k].shape[2]
                self.cores[k] = V.T.reshape(-1, self.n2[k], r1)
                self.cores[k - 1] = np.tensordot(self.cores[k - 1], R.T, axes=(2, 0))
            self._push_right(k)
        return stats

    def _delta(self, W):
        if self.cfg.mode is Mode.ALS:
            return 0.0
        return self.delta_scale * float(np.linalg.norm(W))


def _initial_guess(A: TTOperator, cfg: InverseConfig) -> TTOperator:
    if isinstance(cfg.init, TTOperator):
        return cfg.init
    nrm = _norm2_estimate(A, seed=cfg.seed)
    I = tt_identity(A.col_modes)
    return tt_scale(I, 1.0 / nrm if nrm > 0 else 1.0)


def invert(A: TTOperator, cfg: InverseConfig | None = None) -> InverseResult:
    """TT approximation of ``A^-1`` by alternating projected solves of ``A X = I``.

    Sweeps run left-to-right then right-to-left.  ``ALS`` keeps ranks fixed,
    ``DMRG`` adapts them through two-site solves, and ``AMEn`` /
    ``DMRGPlusEnrich`` additionally expand each bond by ``kick_rank``
    directions of a low-rank residual approximation.  Iteration stops when
    the probe residual drops below ``target_eps``, or when local corrections
    fall below ``target_eps`` with the probe residual under ``5 * target_eps``.
    A sweep that worsens the best residual by more than 10% is rolled back
    and the kick rank halved.  Stagnation (under 1% improvement over three
    sweeps) ends the run with the best iterate and ``converged=False``.
    """
    cfg = cfg or InverseConfig()
    X0 = _initial_guess(A, cfg)
    _check_compatible(A, X0)
    if A.d == 1:
        inv = np.linalg.inv(A.block(0)[0, :, :, 0])
        X = TTOperator([inv.reshape(1, -1, 1)], A.col_modes, A.row_modes, A.scheme)
        res = residual_estimate(A, X, cfg.probes, cfg.seed)
        return InverseResult(X, [SweepReport(1, res, 1, 0, 0.0)], True)
    eps = cfg.target_eps
    two_site = cfg.mode in (Mode.DMRG, Mode.DMRG_ENRICH)

    sw = _Sweeper(A, X0, cfg)
    best_cores = list(sw.cores)
    best = residual_estimate(A, sw._X(), cfg.probes, cfg.seed)
    history = [best]
    reports = []
    converged = False
    for sweep in range(1, cfg.max_sweeps + 1):
        t0 = time.perf_counter()
        stats = sw.left_to_right(two_site) + sw.right_to_left(two_site)
        X = sw._X()
        res = residual_estimate(A, X, cfg.probes, cfg.seed + sweep)
        dx = max((s.initial_residual for s in stats), default=0.0)
        accepted = not (res > 1.1 * best and sweep > 1)
        rep = SweepReport(
            sweep, res, X.max_rank, sum(s.iterations for s in stats),
            time.perf_counter() - t0, dx, accepted,
        )
        reports.append(rep)
        if cfg.verbose:
            log.info(rep.to_json())
        if not accepted:
            sw.kick = max(1, sw.kick // 2)
            sw.cores = orthogonalize_right(list(best_cores))
            st = build_interface_stacks(A, sw._X())
            sw.psi, sw.phi, sw.psi_f, sw.phi_f = st.psi, st.phi, st.psi_f, st.phi_f
            if sw.enrich:
                sw._init_residual_frame()
            history.append(best)
        else:
            if res <= best:
                best, best_cores = res, list(sw.cores)
            history.append(best)
        if res < eps or (accepted and dx < eps and res <= 5 * eps):
            converged = True
            best_cores = list(sw.cores)
            break
        if len(history) > 3 and history[-1] > 0.99 * history[-4]:
            break
    X = TTOperator(best_cores, A.col_modes, A.row_modes, A.scheme)
    if cfg.mode is not Mode.ALS:
        # drops enrichment directions that carry no weight
        X = tt_round(X, 1e-3 * eps, cfg.max_rank)
    return InverseResult(X, reports, converged)


@dataclass
class PreconditionedInverse:
    """Inverse represented as the product ``M @ Y``."""

    M: TTOperator
    Y: TTOperator
    reports: list
    converged: bool

    def apply(self, v: np.ndarray) -> np.ndarray:
        return tt_matvec_dense(self.M, tt_matvec_dense(self.Y, v))

    def fused(self, eps: float = 1e-12) -> TTOperator:
        return tt_matmat(self.M, self.Y, round_eps=eps)

    @property
    def pair(self):
        return (self.M, self.Y)


def invert_preconditioned(A: TTOperator, M: TTOperator, cfg: InverseConfig | None = None,
                          product_eps: float | None = None) -> PreconditionedInverse:
    """Solve ``A M Y = I`` with the same sweeps; the inverse is ``M @ Y``.

    ``A M`` is formed in TT form and rounded to ``product_eps`` (default
    ``target_eps / 100``).
    """
    cfg = cfg or InverseConfig()
    if tuple(M.row_modes) != tuple(A.col_modes):
        raise ShapeError("preconditioner modes do not match the operator")
    peps = cfg.target_eps / 100 if product_eps is None else product_eps
    AM = tt_matmat(A, M, round_eps=peps)
    Y, reports, ok = invert(AM, cfg)
    return PreconditionedInverse(M, Y, reports, ok)
