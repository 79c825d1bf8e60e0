import math

import numpy as np
import pytest

from hjsc.costs import make_cost
from hjsc.curves import extract_curve
from hjsc.diagnostics import (
    boundary_layer_maxima,
    condition3_check,
    diagnose,
    hitting_time_floor,
    is_blowup_trend,
    is_bounded_trend,
    region_maxima,
    relative_spread,
    sandwich_check,
    second_difference_at,
    second_difference_field,
    semiconcavity_bound_check,
    subsolution_constant,
)
from hjsc.domain import Domain
from hjsc.errors import ParameterRangeError
from hjsc.examples import get_case
from hjsc.hamiltonian import PowerHamiltonian, RunningCost
from hjsc.solver import SolverConfig, ValueField, build_grid, solve

I = Domain.interval(-1, 1)
DELTAS = (0.1, 0.05, 0.025, 0.0125)


def exact_field(grid, fn):
    return ValueField(grid, fn(grid.points[:, 0]), 0.0, 0)


def test_second_difference_of_quadratic_is_one():
    g = build_grid(I, 0.01)
    sdf = second_difference_field(exact_field(g, lambda x: 0.5 * x**2))
    inner = ~np.isnan(sdf.values)
    np.testing.assert_allclose(sdf.values[inner], 1.0, atol=1e-9)
    assert sdf.skipped.sum() == 8  # four nodes at each end cannot fit the probe


def test_second_difference_straddling_the_kink():
    g = build_grid(I, 0.01)
    well = exact_field(g, lambda x: 0.5 * np.where(np.abs(x) >= 0.5, (np.abs(x) - 0.5) ** 2, 0.0))
    for probe in (0.02, 0.04, 0.1):
        # closed form: (u(1/2+h) - 0 + u(1/2-h)) / h^2 = 1/2
        assert float(second_difference_at(well, 0.5, probe)[0]) == pytest.approx(0.5, abs=1e-9)


def test_second_difference_of_zero_and_probe_floor():
    g = build_grid(I, 0.01)
    zero = exact_field(g, np.zeros_like)
    assert np.nanmax(second_difference_field(zero).values) == 0.0
    with pytest.raises(ParameterRangeError):
        second_difference_field(zero, probe=0.015)


def test_condition3_on_bump_is_below_analytic_envelope():
    g = build_grid(I, 2e-4)  # 10^4 cells
    H = PowerHamiltonian(2, 1)
    res = condition3_check(make_cost("bump", I), H, g)
    # independent oracle: |f'| / f^(1/2) = 4|x| on the same nodes
    x = g.points[g.interior, 0]
    assert res.C_est == pytest.approx(np.max(4 * np.abs(x)), rel=1e-9)
    assert res.C_est <= 4.0 and not res.divergent


def test_condition3_on_cone_diverges():
    g = build_grid(I, 0.01)
    f = make_cost("abs-cone", I)
    res = condition3_check(f, PowerHamiltonian(), g)
    assert res.profile[g.node_index(0.99)] == pytest.approx(10.0, rel=1e-9)
    # the outer ratio grows like spacing^(-1/2): resolved divergence on a finer grid
    fine = condition3_check(f, PowerHamiltonian(), build_grid(I, 1e-3))
    assert fine.divergent and fine.C_est > res.C_est


def test_condition3_not_applicable_for_constant():
    g = build_grid(I, 0.05)
    res = condition3_check(make_cost("constant", I, value=2.0), PowerHamiltonian(), g)
    assert not res.applicable and math.isnan(res.C_est)
    assert res.excluded.sum() == g.interior.sum()


def test_constants():
    assert subsolution_constant(1.0, 2.0) == 0.5
    assert subsolution_constant(4.0, 2.0) == pytest.approx(0.17678, abs=1e-5)
    cs = [subsolution_constant(C, 2.0) for C in (10.0, 100.0, 1e4, 1e8)]
    assert np.all(np.diff(cs) < 0) and cs[-1] < 1e-8
    with pytest.raises(ParameterRangeError):
        subsolution_constant(0.0, 2.0)
    assert hitting_time_floor(0.5, 2.0) == 0.5
    assert hitting_time_floor(0.17678, 2.0) == pytest.approx(0.10737, abs=1e-5)
    assert hitting_time_floor(1e-9, 2.0) < 1e-8
    with pytest.raises(ParameterRangeError):
        hitting_time_floor(0.7, 2.0)


def test_sandwich(e5_coarse):
    case, u = e5_coarse
    c3 = condition3_check(case.f, case.H, u.grid)
    c0 = subsolution_constant(c3.C_est, 2.0)
    assert sandwich_check(u, case.f, c0, 1e-6).passed
    doubled = u.with_values(2 * case.f(u.grid.points))
    rep = sandwich_check(doubled, case.f, c0, 1e-6)
    assert not rep.passed and rep.violation == pytest.approx(1.0, abs=1e-9)
    zero_f = make_cost("constant", I)
    zu = solve(case.H, zero_f, build_grid(I, 0.05))
    assert sandwich_check(zu, zero_f, 0.5, 1e-9).passed


def test_bound_check_on_well(e2_coarse):
    case, u = e2_coarse
    curves = [extract_curve(u, case.H, case.f, x, 20.0) for x in (0.6, 0.7, 0.8, 0.9)]
    rows = semiconcavity_bound_check(u, curves)
    for row in rows:
        assert row.measured == pytest.approx(1.0, abs=1e-2)
        assert row.T == 20.0 and row.bound_shape == pytest.approx(1.05)
    ratios = [r.ratio for r in rows]
    assert max(ratios) <= 1.0
    assert rows[-1].inv_distance == pytest.approx(10.0)


def test_bound_check_on_cone_and_zero(e1_coarse):
    case, u = e1_coarse
    curves = [extract_curve(u, case.H, case.f, 1 - d, 20.0) for d in (0.1, 0.05, 0.025)]
    measured = [r.measured for r in semiconcavity_bound_check(u, curves)]
    assert np.all(np.diff(measured) > 0)
    g = build_grid(I, 0.01)
    zero = exact_field(g, np.zeros_like)
    f0 = make_cost("constant", I)
    rows = semiconcavity_bound_check(zero, [extract_curve(zero, PowerHamiltonian(), f0, 0.3, 5.0)])
    assert rows[0].measured == 0.0 and rows[0].measured <= rows[0].bound_shape


def test_trend_helpers():
    assert relative_spread([1.0, 1.2, 1.1]) == pytest.approx(0.2)
    assert is_bounded_trend([1.0, 1.2, 1.1]) and not is_bounded_trend([1.0, 1.3])
    assert is_blowup_trend([1.0, 2.0, 3.5]) and not is_blowup_trend([1.0, 2.0, 2.9])
    assert not is_blowup_trend([1.0, 4.0, 3.9])


@pytest.fixture(scope="module")
def fine_solves():
    out = {}
    for name, family, params in (("cone", "abs-cone", {}), ("bump1", "bump", {"m": 1}), ("bump2", "bump", {"m": 2})):
        f = make_cost(family, I, **params)
        out[name] = (f, solve(PowerHamiltonian(2, 1), f, build_grid(I, 2.5e-3), SolverConfig(tol=1e-8)))
    return out


@pytest.mark.parametrize("name", ["bump1", "bump2"])
def test_compliant_family_stays_bounded(fine_solves, name):
    _, u = fine_solves[name]
    m = region_maxima(u, DELTAS)
    assert np.all(m > 0) and relative_spread(m) < 0.25


def test_cone_boundary_layer_blows_up(fine_solves):
    _, u = fine_solves["cone"]
    m = boundary_layer_maxima(u, DELTAS)
    assert is_blowup_trend(m)


def test_flat_collar_keeps_semiconcavity():
    # f vanishes on |x| >= 0.8
    f = RunningCost(
        lambda x: np.clip(0.64 - x[:, 0] ** 2, 0, None) ** 2,
        lambda x: (-4 * x[:, 0] * np.clip(0.64 - x[:, 0] ** 2, 0, None))[:, None],
        0.0,
        boundary_is_min=True,
    )
    u = solve(PowerHamiltonian(), f, build_grid(I, 5e-3), SolverConfig(tol=1e-9))
    x = u.grid.points[:, 0]
    assert np.max(np.abs(u.values[np.abs(x) >= 0.8])) <= 1e-8
    m = boundary_layer_maxima(u, (0.1, 0.05, 0.025))
    assert np.all(np.abs(m) <= 1e-4)


def test_larger_cost_gives_larger_value(e5_coarse):
    case, u = e5_coarse
    big = RunningCost(lambda x: 2 * case.f(x), lambda x: 2 * case.f.gradient(x), 0.0)
    ub = solve(case.H, big, u.grid, SolverConfig(tol=1e-8))
    assert np.all(ub.values >= u.values - 2e-8)


def test_diagnose_flags(e1_coarse, e5_coarse):
    case, u = e1_coarse
    g = build_grid(I, 2.5e-3)
    u1 = solve(case.H, case.f, g, SolverConfig(tol=1e-8))
    rep = diagnose(u1, case.H, case.f)
    assert rep.flags["blowup_at_boundary"] and not rep.flags["globally_semiconcave"]
    assert rep.flags["condition3_divergent"]

    case, u = e5_coarse
    curves = [extract_curve(u, case.H, case.f, x, 5.0) for x in (-0.5, 0.5)]
    rep = diagnose(u, case.H, case.f, curves)
    assert rep.flags["globally_semiconcave"] and not rep.flags["blowup_at_boundary"]
    assert 0 < rep.c0 <= 0.5 and rep.hitting_lower_bound > 0
    s = rep.summary()
    assert s["flags"] == rep.flags and len(s["bound_rows"]) == 2


def test_diagnose_zero_cost_is_all_zero():
    f = make_cost("constant", I)
    u = solve(PowerHamiltonian(), f, build_grid(I, 0.01))
    rep = diagnose(u, PowerHamiltonian(), f)
    assert np.nanmax(np.abs(rep.second_diff_field)) == 0.0
    assert np.all(rep.boundary_blowup_trend == 0.0) and np.all(rep.region_maxima == 0.0)
    assert rep.flags["globally_semiconcave"]
    assert rep.flags["sandwich_passed"] and not rep.flags["blowup_at_boundary"]
