#!/usr/bin/env python3
"""Forward/inverse ranks, memory and timings for the 3D volume Laplace problems.

Example::

    python scripts/rank_table.py --suite ti3d --sizes 8,16 --csv ti3d.csv
    python scripts/rank_table.py --suite nti3d --sizes 8,16 --eps-p 1e-3
"""

import argparse
import sys

from qttie import bench

COLUMNS = ("N", "compress_time_s", "invert_time_s", "max_rank_forward", "max_rank_inverse",
           "inverse_memory_bytes", "solve_time_s", "qtt_solve_time_s", "rhs_max_rank", "achieved_residual")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--suite", choices=("ti3d", "nti3d"), default="ti3d")
    ap.add_argument("--sizes", default="8,16", help="points per axis")
    ap.add_argument("--eps", type=float, default=1e-6)
    ap.add_argument("--eps-p", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = bench.run_suite(args.suite, sizes, [args.eps], args.seed, args.eps_p)
    print(" ".join(f"{c:>20}" for c in COLUMNS))
    for r in rows:
        vals = [getattr(r, c) for c in COLUMNS]
        print(" ".join(f"{v:>20.4g}" if isinstance(v, float) else f"{v:>20}" for v in vals))
        if r.error:
            print(f"  note: {r.error}", file=sys.stderr)
    if args.csv:
        bench.write_csv(args.csv, rows)
    return 0 if all(r.converged for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
