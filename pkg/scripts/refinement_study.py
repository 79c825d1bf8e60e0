"""Sup error against the closed-form values as the grid is refined.

    python scripts/refinement_study.py --cases E2 E3 --spacings 0.02 0.01 0.005 0.0025
"""

import argparse
import math
import time

import numpy as np

from hjsc import SolverConfig, build_grid, get_case, solve


def sup_error(case, u):
    x = u.grid.points[:, 0]
    mask = case.reference_mask(x)
    return float(np.max(np.abs(u.values[mask] - case.reference_u(x[mask]))))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=["E2", "E3", "E1", "E5"])
    ap.add_argument("--spacings", nargs="+", type=float, default=[0.02, 0.01, 0.005, 0.0025])
    ap.add_argument("--tol", type=float, default=1e-8)
    args = ap.parse_args()
    print(f"{'case':8s} {'dx':>8s} {'error':>10s} {'order':>6s} {'sweeps':>7s} {'wall':>7s}")
    for cid in args.cases:
        case = get_case(cid)
        prev = None
        for h in args.spacings:
            t0 = time.perf_counter()
            u = solve(case.H, case.f, build_grid(case.domain, h), SolverConfig(tol=args.tol))
            wall = time.perf_counter() - t0
            err = sup_error(case, u)
            order = "" if prev is None else f"{math.log(prev[1] / err) / math.log(prev[0] / h):6.2f}"
            print(f"{cid:8s} {h:8.4g} {err:10.3e} {order:>6s} {u.iterations:7d} {wall:6.2f}s")
            prev = (h, err)


if __name__ == "__main__":
    main()
