"""Command-line front end: ``hjsc {solve,curve,diagnose,example,legendre}``.

Exit codes: 0 success, 1 a comparison in ``example`` failed, 2 usage or
config error, 3 non-convergence, 4 invalid curve start.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from .config import ConfigError, ProblemConfig
from .curves import extract_curve
from .diagnostics import diagnose
from .errors import DomainError, HJSCError, NonConvergenceError, StencilError
from .examples import get_case, path_cost, random_competitor
from .fileio import FieldFormatError, read_field, write_curve, write_field, write_json
from .hamiltonian import PowerHamiltonian, legendre_coeff, numeric_conjugate
from .solver import build_grid, solve

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_BAD_START = 0, 1, 2, 3, 4

log = logging.getLogger("hjsc")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(args) -> ProblemConfig:
    if args.config is None:
        raise _Exit(EXIT_USAGE, "--config is required for this command")
    try:
        return ProblemConfig.load(args.config)
    except ConfigError as exc:
        raise _Exit(EXIT_USAGE, f"config error: {exc}") from None


def _field(cfg: ProblemConfig, field_path: Optional[str]):
    """Read a written field, or solve on demand."""
    grid = build_grid(cfg.domain, cfg.spacing)
    if field_path:
        try:
            return read_field(field_path, grid)
        except (OSError, FieldFormatError) as exc:
            raise _Exit(EXIT_USAGE, f"cannot use field {field_path}: {exc}") from None
    return _solve(cfg, grid)[0]


def _solve(cfg: ProblemConfig, grid):
    t0 = time.perf_counter()
    try:
        u = solve(cfg.H, cfg.f, grid, cfg.solver)
    except NonConvergenceError as exc:
        raise _Exit(EXIT_NONCONVERGED, str(exc)) from None
    return u, time.perf_counter() - t0


def _curves(cfg: ProblemConfig, u, starts):
    out = []
    for x0 in starts:
        try:
            out.append(extract_curve(u, cfg.H, cfg.f, x0, cfg.horizon, cfg.curve_dt, cfg.boundary_tolerance))
        except DomainError as exc:
            raise _Exit(EXIT_BAD_START, f"invalid start point: {exc}") from None
        except StencilError as exc:
            raise _Exit(EXIT_FAIL, f"curve extraction failed: {exc}") from None
    return out


def _reference_error(case, u) -> Optional[float]:
    if case is None or case.reference_u is None or u.grid.dimension != 1:
        return None
    x = u.grid.points[:, 0]
    mask = case.reference_mask(x)
    return float(np.max(np.abs(u.values[mask] - case.reference_u(x[mask]))))


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    cfg = _load(args)
    grid = build_grid(cfg.domain, cfg.spacing)
    u, wall = _solve(cfg, grid)
    os.makedirs(args.out, exist_ok=True)
    write_field(os.path.join(args.out, "field.csv"), u)
    summary = {"iterations": u.iterations, "residual": u.residual, "wall_seconds": wall, "nodes": len(grid.points)}
    line = f"solved: iterations={u.iterations} residual={u.residual:.3e} wall={wall:.2f}s"
    err = _reference_error(cfg.case, u)
    if err is not None:
        summary["reference_error"] = err
        line += f" reference_error={err:.3e}"
    write_json(os.path.join(args.out, "solve.json"), summary)
    print(line)
    return EXIT_OK


def cmd_curve(args) -> int:
    cfg = _load(args)
    starts = cfg.starts
    if args.x0:
        starts = [np.array([float(c) for c in s.split(",")]) for s in args.x0]
    if not starts:
        raise _Exit(EXIT_USAGE, "no curve starts: give --x0 or curves.starts in the config")
    for s in starts:
        if len(s) != cfg.domain.dim:
            raise _Exit(EXIT_USAGE, f"start {s.tolist()} has the wrong dimension")
        if not cfg.domain.contains_open(s)[0]:
            raise _Exit(EXIT_BAD_START, f"invalid start point {s.tolist()}: not inside the domain")
    u = _field(cfg, args.field)
    os.makedirs(args.out, exist_ok=True)
    for k, c in enumerate(_curves(cfg, u, starts)):
        write_curve(os.path.join(args.out, f"curve_{k:02d}.csv"), c)
        print(f"curve {k}: start={c.start.tolist()} hitting_time={c.hitting_time:g} end={c.positions[-1].tolist()}")
    return EXIT_OK


def run_diagnostics(cfg: ProblemConfig, u):
    curves = _curves(cfg, u, cfg.starts)
    return diagnose(u, cfg.H, cfg.f, curves, cfg.probe, cfg.deltas, directions=cfg.directions)


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    u = _field(cfg, args.field)
    report = run_diagnostics(cfg, u)
    summary = report.summary()
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "report.json"), summary)
    print(f"C_est={summary['C_est']} c0={summary['c0']} sandwich_passed={summary['sandwich_passed']}")
    print("boundary trend: " + ", ".join(f"{d:g}->{v}" for d, v in zip(summary["deltas"], summary["boundary_blowup_trend"])))
    for name, value in sorted(summary["flags"].items()):
        print(f"flag {name}: {value}")
    return EXIT_OK


def cmd_example(args) -> int:
    try:
        case = get_case(args.id)
    except KeyError:
        raise _Exit(EXIT_USAGE, f"unknown example id {args.id!r}") from None
    cfg = ProblemConfig(case.H, case.f, case.domain, args.spacing, case=case)
    grid = build_grid(case.domain, args.spacing)
    u, wall = _solve(cfg, grid)
    results = []

    def check(ok: bool, text: str):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {case.id} {text}")

    print(f"{case.id}: {case.title}; {u.iterations} sweeps in {wall:.2f}s")
    err = _reference_error(case, u)
    if err is not None:
        check(err <= args.tol, f"sup error vs reference {err:.3e} (tol {args.tol:g})")

    starts = [np.array([x]) for x in (-0.8, -0.3, 0.3, 0.8)]
    if case.reference_curve is not None:
        s = np.linspace(0.0, 5.0, 501)
        worst = 0.0
        for x0 in starts:
            c = extract_curve(u, case.H, case.f, x0, 5.0)
            worst = max(worst, float(np.max(np.abs(c.position_at(s)[:, 0] - case.reference_curve(x0[0], s)))))
        check(worst <= 2e-2, f"curve deviation vs reference {worst:.3e} (tol 2e-02)")

    if case.reference_u is not None and case.reference_support is None:
        rng = np.random.default_rng(args.seed)
        gap = math.inf
        for x0 in starts:
            ref = float(case.reference_u(x0)[0])
            for _ in range(args.competitors):
                path = random_competitor(rng, x0, case.domain)
                gap = min(gap, path_cost(case.H, case.f, path, 6.0) - ref)
        check(gap >= -1e-9, f"reference beats {args.competitors} random competitors per start (min margin {gap:.3e})")

    cfg.starts = [np.array([x]) for x in np.linspace(-0.9, 0.9, 10)]
    flags = run_diagnostics(cfg, u).flags
    for verdict in sorted(case.verdicts):
        got = flags.get(verdict)
        print(f"verdict {verdict}: expected True, measured {got}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_field(os.path.join(args.out, "field.csv"), u)
    return EXIT_OK if all(results) else EXIT_FAIL


def cmd_legendre(args) -> int:
    try:
        C = legendre_coeff(args.a, args.p)
    except ValueError as exc:
        raise _Exit(EXIT_USAGE, str(exc)) from None
    H = PowerHamiltonian(args.p, args.a)
    v = np.linspace(-2.0, 2.0, 9)
    closed = C * np.abs(v) ** H.q
    grid = numeric_conjugate(H, v)
    print(f"a={args.a:g} p={args.p:g} q={H.q:.12g} legendre_coeff={C:.15g}")
    for vi, c, g in zip(v, closed, grid):
        print(f"v={vi:+.2f} closed={c:.12f} grid={g:.12f}")
    print(f"max |closed - grid| = {np.max(np.abs(closed - grid)):.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjsc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML problem configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve and write the value field")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("curve", parents=[common], help="extract minimizing curves")
    p.add_argument("--x0", action="append", help="start point, e.g. 0.8 or 0.1,0.2 (repeatable)")
    p.add_argument("--field", help="previously written field file")
    p.set_defaults(run=cmd_curve)

    p = sub.add_parser("diagnose", parents=[common], help="semiconcavity and structure diagnostics")
    p.add_argument("--field", help="previously written field file")
    p.set_defaults(run=cmd_diagnose)

    p = sub.add_parser("example", parents=[common], help="run a catalog case against its references")
    p.add_argument("id")
    p.add_argument("--spacing", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--competitors", type=int, default=50)
    p.set_defaults(run=cmd_example, out=None)

    p = sub.add_parser("legendre", parents=[common], help="closed-form vs numeric convex conjugate")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--a", type=float, default=1.0)
    p.set_defaults(run=cmd_legendre)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.threads > 0:
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return args.run(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except HJSCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
