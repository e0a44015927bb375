"""Timing tables: direct dual solve vs Dinkelbach bisection vs eigendecomposition.

Sizes follow m = p * n for p in {2, 1, 0.5}.  Writes one CSV per gamma.

    python scripts/bench_tables.py --sizes 200,400,800,1600 --gammas 0.01,0.1 --outdir results
"""

import argparse
import sys
from pathlib import Path

from spgls.cli import bench_instance, emit_bench_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,400,800,1600", help="comma list of n")
    ap.add_argument("--ratios", default="2,1,0.5", help="comma list of p, m = p*n")
    ap.add_argument("--gammas", default="0.01,0.1", help="comma list of gamma")
    ap.add_argument("--eps", type=float, default=1e-8, help="bisection tolerance")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args(argv)

    args.outdir.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in args.sizes.split(",")]
    ratios = [float(p) for p in args.ratios.split(",")]
    for g in (float(x) for x in args.gammas.split(",")):
        for p in ratios:
            rows = []
            out = args.outdir / f"bench_gamma{g:g}_p{p:g}.csv"
            for n in sizes:
                rows.append(bench_instance(int(round(p * n)), n, g, args.eps, seed=args.seed))
                emit_bench_report(rows, out)
                r = rows[-1]
                print(f"gamma={g:g} m={r['m']} n={n}: direct {r['direct_seconds']:.2e}s, "
                      f"bisect {r['bisect_seconds']:.2e}s, eig {r['eig_seconds']:.2e}s, "
                      f"ratio {r['ratio']:.0f}", file=sys.stderr)
            print(out)


if __name__ == "__main__":
    main()
