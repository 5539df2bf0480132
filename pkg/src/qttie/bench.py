"""End-to-end pipelines and benchmark suites behind the ``qttie`` command."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .ie_kernels import (
    ASSEMBLY_GUARD,
    Coefficient,
    GridSpec,
    ProblemSpec,
    coefficient_vector,
    dense_operator_tensor,
    diric_rhs,
    gaussian,
    operator_oracle,
)
from .krylov import GmresConfig, gmres
from .tensor_core import DenseTensor, TTOperator, TTVector
from .tt_arith import tt_add, tt_identity, tt_matvec_compressed, tt_matvec_dense, tt_scale
from .tt_compress import CompressionConfig, tt_cross, tt_round, tt_svd
from .tt_inverse import InverseConfig, invert

log = logging.getLogger(__name__)

SUITES = ("ti3d", "nti3d", "scaling")
INVERT_CAP = 32**3


@dataclass
class Compressed:
    A: TTOperator
    converged: bool
    method: str
    seconds: float


def compress_problem(p: ProblemSpec, eps: float, seed: int = 0, method: str = "auto",
                     max_rank: int = 2000) -> Compressed:
    """QTT operator of ``p``: TT-SVD of the assembled matrix for small grids, cross otherwise."""
    if method == "auto":
        method = "svd" if p.grid.N <= ASSEMBLY_GUARD else "cross"
    modes = p.grid.scheme.vector_modes
    t0 = time.perf_counter()
    if method == "svd":
        A = tt_svd(dense_operator_tensor(p), CompressionConfig(target_eps=eps, max_rank=max_rank))
        ok = True
    elif method == "cross":
        cfg = CompressionConfig(target_eps=eps, max_rank=max_rank, seed=seed)
        res = tt_cross(operator_oracle(p), [n * n for n in modes], cfg, modes, modes)
        A, ok = res.tt, res.converged
    else:
        raise ValueError(f"unknown compression method {method!r}")
    A = TTOperator(A.cores, modes, modes, p.grid.scheme)
    return Compressed(A, ok, method, time.perf_counter() - t0)


def compress_vector(v: np.ndarray, modes, eps: float) -> TTVector:
    return tt_svd(DenseTensor(np.asarray(v, dtype=np.float64), tuple(modes)), eps)


def relative_residual(A: TTOperator, x: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(tt_matvec_dense(A, x) - b) / np.linalg.norm(b))


def timed(fn, *args, warmup: bool = True):
    """Run ``fn`` once untimed (if ``warmup``) and return ``(result, seconds)`` of the next run."""
    if warmup:
        fn(*args)
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def json_default(o):
    """Serialize numpy scalars that leak into report dictionaries."""
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


@dataclass
class BenchReport:
    problem: str
    N: int
    eps: float
    eps_p: float
    compress_time_s: float = 0.0
    invert_time_s: float = 0.0
    max_rank_forward: int = 0
    max_rank_inverse: int = 0
    inverse_memory_bytes: int = 0
    solve_time_s: float = 0.0
    qtt_solve_time_s: float = 0.0
    rhs_max_rank: int = 0
    achieved_residual: float = float("nan")
    converged: bool = True
    seed: int = 0
    threads: int = 0
    error: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=json_default)


REPORT_FIELDS = tuple(f.name for f in fields(BenchReport))


def make_problem(kind: str, points_per_dim: int) -> ProblemSpec:
    grid = GridSpec(3, points_per_dim)
    if kind == "ti3d":
        return ProblemSpec(grid)
    if kind == "nti3d":
        return ProblemSpec(grid, b_coeff=gaussian(), c_coeff=gaussian())
    raise ValueError(f"unknown problem kind {kind!r}")


def run_case(p: ProblemSpec, eps: float, eps_p: float, seed: int = 0, name: str = "",
             inverse_cfg: InverseConfig | None = None, threads: int = 0) -> BenchReport:
    """Compress, invert and apply one problem; mirrors the columns of a results table."""
    rep = BenchReport(name or p.kernel.value, p.grid.N, eps, eps_p, seed=seed, threads=threads)
    comp = compress_problem(p, eps, seed)
    A = comp.A
    rep.compress_time_s = comp.seconds
    rep.max_rank_forward = A.max_rank
    rep.converged = comp.converged
    if p.grid.N > INVERT_CAP:
        rep.error = "inversion skipped above the size cap (INVERT_CAP)"
        return rep
    cfg = inverse_cfg or InverseConfig(target_eps=eps_p, seed=seed)
    t0 = time.perf_counter()
    X, _, ok = invert(A, cfg)
    rep.invert_time_s = time.perf_counter() - t0
    rep.converged = rep.converged and ok
    rep.max_rank_inverse = X.max_rank
    rep.inverse_memory_bytes = X.nbytes
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(p.grid.N)
    x, rep.solve_time_s = timed(tt_matvec_dense, X, b)
    rep.achieved_residual = relative_residual(A, x, b)

    f = diric_rhs(p.grid)

    def qtt_solve():
        ft = compress_vector(f, p.grid.scheme.vector_modes, eps)
        return ft, tt_matvec_compressed(X, ft, round_eps=eps)

    (ft, _), rep.qtt_solve_time_s = timed(qtt_solve)
    rep.rhs_max_rank = ft.max_rank
    return rep


@dataclass
class RankBound:
    r_b: int
    r_K: int
    r_c: int
    r_A: int

    @property
    def bound(self) -> int:
        return self.r_b * self.r_K * self.r_c + 1

    @property
    def holds(self) -> bool:
        return self.r_A <= self.bound


def coefficient_rank_bound(p: ProblemSpec, eps: float, A: TTOperator | None = None,
                           seed: int = 0) -> RankBound:
    """Measured ranks for ``A = a I + diag(b) K diag(c)``: coefficients, kernel part and ``A``.

    ``r_K`` is the rank of the translation-invariant kernel part with the
    identity term removed, all at accuracy ``eps``.
    """
    modes = p.grid.scheme.vector_modes
    r_b = compress_vector(coefficient_vector(p, "b"), modes, eps).max_rank
    r_c = compress_vector(coefficient_vector(p, "c"), modes, eps).max_rank
    ti = replace(p, b_coeff=Coefficient(), c_coeff=Coefficient())
    A_ti = compress_problem(ti, eps, seed).A
    K = tt_round(tt_add(A_ti, tt_scale(tt_identity(modes), -p.a)), eps)
    if A is None:
        A = compress_problem(p, eps, seed).A
    return RankBound(r_b, K.max_rank, r_c, A.max_rank)


def fit_exponent(sizes, times) -> float:
    """Slope of ``log(time)`` against ``log(size)`` by least squares."""
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def random_tt_operator(levels: int, rank: int, seed: int = 0) -> TTOperator:
    rng = np.random.default_rng(seed)
    r = [1] + [rank] * (levels - 1) + [1]
    cores = [rng.standard_normal((r[k], 4, r[k + 1])) / np.sqrt(2 * r[k]) for k in range(levels)]
    return TTOperator(cores, (2,) * levels, (2,) * levels)


def matvec_scaling(levels=range(12, 19), rank: int = 8, seed: int = 0, repeats: int = 3):
    """Dense-apply time of a fixed-rank operator for ``N = 2^levels``; returns sizes, times, exponent."""
    rng = np.random.default_rng(seed)
    sizes, times = [], []
    for L in levels:
        A = random_tt_operator(L, rank, seed)
        b = rng.standard_normal(2**L)
        tt_matvec_dense(A, b)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            tt_matvec_dense(A, b)
            best = min(best, time.perf_counter() - t0)
        sizes.append(2**L)
        times.append(best)
    return sizes, times, fit_exponent(sizes, times)


def compress_scaling(points=(8, 16, 32), eps: float = 1e-6, seed: int = 0, kind: str = "ti3d"):
    """Cross-compression time across grid sizes; returns sizes, times, ranks, exponent."""
    sizes, times, ranks = [], [], []
    for n in points:
        p = make_problem(kind, n)
        comp = compress_problem(p, eps, seed, method="cross")
        sizes.append(p.grid.N)
        times.append(comp.seconds)
        ranks.append(comp.A.max_rank)
    return sizes, times, ranks, fit_exponent(sizes, times)


def run_suite(suite: str, sizes, eps_list, seed: int = 0, eps_p: float | None = None,
              threads: int = 0) -> list:
    """Rows of :class:`BenchReport`; a failing case is recorded and the suite moves on."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    if not sizes:
        raise ValueError("size list is empty")
    rows = []
    if suite == "scaling":
        for eps in eps_list:
            ns, ts, rk, expo = compress_scaling(sizes, eps, seed)
            for N, t, r in zip(ns, ts, rk):
                rows.append(BenchReport("compress-scaling", N, eps, 0.0, compress_time_s=t,
                                        max_rank_forward=r, seed=seed, threads=threads))
            log.info(json.dumps({"compress_exponent": expo}))
        ns, ts, expo = matvec_scaling(seed=seed)
        for N, t in zip(ns, ts):
            rows.append(BenchReport("matvec-scaling", N, 0.0, 0.0, solve_time_s=t, seed=seed,
                                    threads=threads))
        log.info(json.dumps({"matvec_exponent": expo}))
        return rows
    default_p = 1e-6 if suite == "ti3d" else 1e-3
    for eps in eps_list:
        for n in sizes:
            p = make_problem(suite, n)
            try:
                rows.append(run_case(p, eps, eps_p or default_p, seed, suite, threads=threads))
            except Exception as exc:  # recorded, the suite continues
                rows.append(BenchReport(suite, p.grid.N, eps, eps_p or default_p, seed=seed,
                                        converged=False, error=repr(exc), threads=threads))
    return rows


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def solve_gmres(A: TTOperator, b: np.ndarray, tol: float = 1e-8, precond=None, max_iters: int = 500):
    """GMRES on the dense-apply path, optionally right-preconditioned by a TT operator."""
    M = None
    if isinstance(precond, TTOperator):
        M = lambda v: tt_matvec_dense(precond, v)  # noqa: E731
    elif precond is not None:
        M = precond
    return gmres(lambda v: tt_matvec_dense(A, v), b, GmresConfig(tol=tol, max_iters=max_iters), M)
