"""Second-difference maxima near the boundary for each catalog case.

Prints the level-set maxima at distance delta, the sup over the region at
distance >= delta, and the curvature of the integrated reference at 1 - delta.

    python scripts/boundary_trend.py --spacing 0.001
"""

import argparse

import numpy as np

from hjsc import SolverConfig, build_grid, catalog, solve
from hjsc.diagnostics import boundary_layer_maxima, is_blowup_trend, region_maxima, relative_spread
from hjsc.errors import SingularCurvatureError
from hjsc.reference import Reference1D, curvature_estimate

DELTAS = (0.1, 0.05, 0.025, 0.0125)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spacing", type=float, default=1e-3)
    ap.add_argument("--cases", nargs="*", default=None)
    args = ap.parse_args()
    for case in catalog():
        if args.cases and case.id not in args.cases:
            continue
        u = solve(case.H, case.f, build_grid(case.domain, args.spacing), SolverConfig(tol=1e-8))
        level = boundary_layer_maxima(u, DELTAS)
        region = region_maxima(u, DELTAS)
        print(f"{case.id}: {case.title}")
        print(f"  delta          {list(DELTAS)}")
        print(f"  level set      {np.round(level, 4).tolist()}  blowup={is_blowup_trend(level)}"
              f"  last/first={level[-1] / level[0]:.3f}")
        print(f"  region         {np.round(region, 4).tolist()}  spread={relative_spread(region):.1%}")
        ref = case.reference_u
        if isinstance(ref, Reference1D):
            curv = []
            for d in DELTAS:
                try:
                    curv.append(round(float(curvature_estimate(ref, 1.0 - d)), 4))
                except SingularCurvatureError:
                    curv.append(None)
            print(f"  reference u''  {curv}")


if __name__ == "__main__":
    main()
