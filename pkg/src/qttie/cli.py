"""``qttie`` command line: compress, invert, solve and bench.

Reports are written as one JSON object per line to stdout and, with
``--report``, appended to a file.  Exit status is 1 for usage or input
errors and 2 when an iterative stage did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench
from .errors import FormatError, ShapeError
from .ie_kernels import ProblemSpec, diric_rhs
from .tensor_core import TTOperator, load_ttb1, save_ttb1
from .tt_arith import tt_matvec_compressed, tt_matvec_dense
from .tt_inverse import InverseConfig, Mode, invert, invert_preconditioned

MODES = {"als": Mode.ALS, "amen": Mode.AMEN, "dmrg": Mode.DMRG, "dmrg-enrich": Mode.DMRG_ENRICH}


class UsageError(Exception):
    pass


def _emit(report: dict, path: str | None) -> None:
    line = json.dumps(report, default=bench.json_default)
    print(line)
    if path:
        with open(path, "a") as fh:
            fh.write(line + "\n")


def _load_spec(path: str) -> ProblemSpec:
    try:
        return ProblemSpec.from_json(Path(path).read_text())
    except (OSError, TypeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read problem spec {path}: {exc}") from exc


def _load_op(path: str) -> TTOperator:
    try:
        A = load_ttb1(path)
    except (OSError, FormatError) as exc:
        raise UsageError(f"cannot read operator {path}: {exc}") from exc
    if not isinstance(A, TTOperator):
        raise UsageError(f"{path} holds a vector, expected an operator")
    return A


def _inverse_cfg(args) -> InverseConfig:
    return InverseConfig(
        target_eps=args.eps_p,
        mode=MODES[args.mode],
        kick_rank=args.kick_rank,
        max_sweeps=args.max_sweeps,
        seed=args.seed,
        verbose=args.verbose,
    )


def cmd_compress(args) -> int:
    if not args.spec:
        raise UsageError("compress needs --spec")
    p = _load_spec(args.spec)
    comp = bench.compress_problem(p, args.eps, args.seed, method=args.method)
    if args.out:
        save_ttb1(args.out, comp.A)
    _emit(
        {
            "command": "compress",
            "N": p.grid.N,
            "eps": args.eps,
            "method": comp.method,
            "compress_time_s": comp.seconds,
            "ranks": list(comp.A.ranks),
            "max_rank_forward": comp.A.max_rank,
            "memory_bytes": comp.A.nbytes,
            "converged": comp.converged,
            "seed": args.seed,
        },
        args.report,
    )
    return 0 if comp.converged else 2


def cmd_invert(args) -> int:
    if not args.op:
        raise UsageError("invert needs --op")
    A = _load_op(args.op)
    cfg = _inverse_cfg(args)
    t0 = time.perf_counter()
    if args.precond:
        M = _load_op(args.precond)
        out = invert_preconditioned(A, M, cfg)
        X, reports, ok = out.Y, out.reports, out.converged
    else:
        X, reports, ok = invert(A, cfg)
    seconds = time.perf_counter() - t0
    if args.out:
        save_ttb1(args.out, X)
    _emit(
        {
            "command": "invert",
            "N": A.shape[0],
            "eps_p": args.eps_p,
            "mode": args.mode,
            "invert_time_s": seconds,
            "sweeps": len(reports),
            "ranks": list(X.ranks),
            "max_rank_inverse": X.max_rank,
            "inverse_memory_bytes": X.nbytes,
            "residual_estimate": reports[-1].residual if reports else None,
            "preconditioned": bool(args.precond),
            "converged": ok,
            "seed": args.seed,
        },
        args.report,
    )
    return 0 if ok else 2


def _rhs(args, A: TTOperator) -> np.ndarray:
    N = A.shape[0]
    kind = args.rhs
    if kind == "random":
        return np.random.default_rng(args.seed).standard_normal(N)
    if kind == "diric":
        if not args.spec:
            raise UsageError("--rhs diric needs --spec for the grid")
        grid = _load_spec(args.spec).grid
        if grid.N != N:
            raise UsageError(f"grid has {grid.N} points, operator has {N} columns")
        return diric_rhs(grid, args.nu)
    try:
        b = np.load(kind)
    except OSError as exc:
        raise UsageError(f"cannot read right-hand side {kind}: {exc}") from exc
    if b.shape != (N,):
        raise UsageError(f"right-hand side has shape {b.shape}, expected ({N},)")
    return b


def cmd_solve(args) -> int:
    if not args.op:
        raise UsageError("solve needs --op")
    A = _load_op(args.op)
    b = _rhs(args, A)
    rep = {"command": "solve", "N": A.shape[0], "rhs": args.rhs, "seed": args.seed}
    ok = True
    if args.inverse:
        X = _load_op(args.inverse)
        if X.shape != A.shape[::-1]:
            raise UsageError("inverse and operator sizes do not match")
        x, rep["solve_time_s"] = bench.timed(tt_matvec_dense, X, b)

        def qtt_solve():
            bt = bench.compress_vector(b, A.col_modes, args.eps)
            return bt, tt_matvec_compressed(X, bt, round_eps=args.eps)

        (bt, _), rep["qtt_solve_time_s"] = bench.timed(qtt_solve)
        rep["rhs_max_rank"] = bt.max_rank
    else:
        M = _load_op(args.precond) if args.precond else None
        t0 = time.perf_counter()
        res = bench.solve_gmres(A, b, args.tol, M, args.max_iters)
        rep["solve_time_s"] = time.perf_counter() - t0
        rep["gmres_iterations"] = res.iterations
        x, ok = res.solution, res.converged
    rep["achieved_residual"] = bench.relative_residual(A, x, b)
    rep["converged"] = ok
    if args.out:
        np.save(args.out, x)
    _emit(rep, args.report)
    return 0 if ok else 2


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()] if args.sizes else []
    if not sizes:
        raise UsageError("bench needs a non-empty --sizes list (points per axis, e.g. 8,16)")
    eps_list = [float(e) for e in args.eps_list.split(",")] if args.eps_list else [args.eps]
    rows = bench.run_suite(args.suite, sizes, eps_list, args.seed, args.eps_p_bench, _threads())
    for r in rows:
        _emit(json.loads(r.to_json()), args.report)
    if args.out:
        bench.write_csv(args.out, rows)
    return 0 if all(r.converged and not r.error for r in rows) else 2


def _threads() -> int:
    val = os.environ.get("QTTIE_THREADS")
    return int(val) if val else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="problem spec JSON")
    common.add_argument("--eps", type=float, default=1e-6, help="compression accuracy")
    common.add_argument("--eps-p", dest="eps_p", type=float, default=1e-6, help="inversion accuracy")
    common.add_argument("--mode", choices=sorted(MODES), default="amen")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file")
    common.add_argument("--report", help="append JSON report lines to this file")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="qttie", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", parents=[common], help="compress a problem spec to a TTB1 operator")
    c.add_argument("--method", choices=("auto", "svd", "cross"), default="auto")

    i = sub.add_parser("invert", parents=[common], help="approximate inverse of a TTB1 operator")
    i.add_argument("--op", help="operator file")
    i.add_argument("--precond", help="operator file M; solves A M Y = I and writes Y")
    i.add_argument("--kick-rank", dest="kick_rank", type=int, default=24)
    i.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=20)

    s = sub.add_parser("solve", parents=[common], help="apply an inverse or run GMRES")
    s.add_argument("--op", help="operator file")
    s.add_argument("--inverse", help="inverse operator file")
    s.add_argument("--precond", help="preconditioner for GMRES")
    s.add_argument("--rhs", default="random", help="diric, random or a .npy file")
    s.add_argument("--nu", type=int, default=10)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", dest="max_iters", type=int, default=500)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    b.add_argument("--suite", choices=bench.SUITES, default="ti3d")
    b.add_argument("--sizes", default="", help="comma-separated points per axis")
    b.add_argument("--eps-list", dest="eps_list", default="")
    b.add_argument("--eps-p-bench", dest="eps_p_bench", type=float, default=None)
    return ap


COMMANDS = {"compress": cmd_compress, "invert": cmd_invert, "solve": cmd_solve, "bench": cmd_bench}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    threads = _threads()
    try:
        with threadpool_limits(limits=threads or None):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"qttie: error: {exc}", file=sys.stderr)
        return 1
    except (ShapeError, ValueError) as exc:
        print(f"qttie: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
