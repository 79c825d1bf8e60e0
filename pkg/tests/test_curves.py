import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hjsc.costs import make_cost
from hjsc.curves import (
    curve_from_samples,
    dpp_defect,
    el_residual,
    energy_identity,
    extract_curve,
    hamilton_ode,
    speed_gradient_gap,
    value_drift,
)
from hjsc.domain import Domain
from hjsc.errors import DomainError, RunawayError
from hjsc.hamiltonian import PowerHamiltonian
from hjsc.solver import SolverConfig, build_grid, solve

S = np.linspace(0.0, 5.0, 501)


def analytic_well_curve(case, x0=0.8, noise=0.0, seed=0):
    s = np.linspace(0.0, 5.0, 5001)
    pos = 0.5 + (x0 - 0.5) * np.exp(-s)
    vel = -(x0 - 0.5) * np.exp(-s)
    if noise:
        pos = pos + noise * np.random.default_rng(seed).uniform(-1, 1, len(s))
        vel = np.gradient(pos, s)
    return curve_from_samples(case.H, case.f, s, pos, vel)


def test_well_curve_from_08(e2_coarse):
    case, u = e2_coarse
    c = extract_curve(u, case.H, case.f, 0.8, 20.0)
    assert c.hitting_time == math.inf and not c.escaped
    assert np.max(np.abs(c.position_at(S)[:, 0] - case.reference_curve(0.8, S))) <= 1e-2
    assert np.all(np.abs(c.velocities) <= 3.0)
    assert np.all(np.diff(c.running_cost) >= 0)


def test_well_curve_in_flat_region_rests(e2_coarse):
    case, u = e2_coarse
    c = extract_curve(u, case.H, case.f, 0.2, 10.0)
    assert c.stationary
    np.testing.assert_array_equal(c.positions, 0.2)
    # the solved field is zero there only up to the solver tolerance
    assert abs(dpp_defect(c, u, 3.0)) <= 1e-8
    exact = u.with_values(case.reference_u(u.grid.points[:, 0]))
    assert dpp_defect(c, exact, 3.0) == 0.0
    assert el_residual(c, case.H, case.f) == 0.0


def test_mirrored_well_curve(e2_coarse):
    case, u = e2_coarse
    c = extract_curve(u, case.H, case.f, -0.9, 5.0)
    expected = -0.5 + (-0.9 + 0.5) * np.exp(-S)
    assert np.max(np.abs(c.position_at(S)[:, 0] - expected)) <= 1e-2


def cone_hitting_oracle(ref, eps):
    """Time for xi' = 2 (f - u_ref)^(1/2) to climb from 0.5 to 1 - eps."""
    def rhs(s, y):
        x = min(y[0], 1.0)
        return [2.0 * math.sqrt(max(1.0 - x - float(ref(x)), 0.0))]

    event = lambda s, y: y[0] - (1.0 - eps)  # noqa: E731
    event.terminal = True
    sol = solve_ivp(rhs, (0, 5), [0.5], events=event, rtol=1e-10, atol=1e-12, max_step=1e-3)
    return float(sol.t_events[0][0])


def test_cone_curve_hits_in_finite_time(e1_coarse):
    case, u = e1_coarse
    c = extract_curve(u, case.H, case.f, 0.5, 20.0)
    assert c.escaped
    assert np.all(np.diff(c.positions[:, 0]) >= 0)
    oracle = cone_hitting_oracle(case.reference_u, c.boundary_tolerance)
    assert c.hitting_time == pytest.approx(oracle, abs=0.03)
    # the true curve reaches x = 1 itself in finite time as well
    assert cone_hitting_oracle(case.reference_u, 0.0) < 1.0


def test_start_must_be_interior(e2_coarse):
    case, u = e2_coarse
    for x0 in (1.0, -1.0, 1.3):
        with pytest.raises(DomainError):
            extract_curve(u, case.H, case.f, x0, 1.0)


def test_hamilton_ode_reproduces_closed_form(e2_coarse):
    case, _ = e2_coarse
    c = hamilton_ode(case.H, case.f, 0.8, -0.3, 5.0, 1e-3, domain=case.domain)
    assert np.max(np.abs(c.position_at(S)[:, 0] - case.reference_curve(0.8, S))) <= 1e-8
    # eta = e^{-s} xi' for a = 1/2, p = 2
    np.testing.assert_allclose(c.costate[:, 0], -0.3 * np.exp(-2 * c.times), atol=1e-8)


def test_hamilton_ode_constant_for_zero_cost():
    f = make_cost("constant", Domain.interval(-1, 1))
    c = hamilton_ode(PowerHamiltonian(1.5, 1.0), f, 0.3, 0.0, 3.0, 1e-2)
    np.testing.assert_array_equal(c.positions, 0.3)


def test_hamilton_ode_wrong_shot_runs_to_boundary(e2_coarse):
    case, _ = e2_coarse
    c = hamilton_ode(case.H, case.f, 0.8, 0.1, 5.0, 1e-3, domain=case.domain)
    assert c.escaped and c.positions[-1, 0] == pytest.approx(1.0)
    # a region that never reports contact: only the bounding-box guard stops it
    unbounded = Domain.implicit(lambda p: np.full(len(p), -1.0), (-1.0,), (1.0,))
    with pytest.raises(RunawayError):
        hamilton_ode(case.H, case.f, 0.8, 0.1, 5.0, 1e-3, domain=unbounded)


def test_feedback_and_hamilton_curves_agree(e2_coarse):
    case, u = e2_coarse
    a = extract_curve(u, case.H, case.f, 0.8, 5.0)
    # the exact shot; the characteristic system is a saddle, so a numerical
    # costate would drift off the minimizer over this horizon
    b = hamilton_ode(case.H, case.f, 0.8, -0.3, 5.0, 1e-3, domain=case.domain)
    assert np.max(np.abs(a.position_at(S) - b.position_at(S))) <= 1e-2


def test_el_residual_orders_exact_and_jittered(e2_coarse):
    case, _ = e2_coarse
    exact = el_residual(analytic_well_curve(case), case.H, case.f)
    jittered = el_residual(analytic_well_curve(case, noise=1e-2), case.H, case.f)
    assert exact <= 1e-6
    assert jittered >= 10 * exact


def test_dpp_defect_and_reversed_curve(e2_coarse):
    case, u = e2_coarse
    good = extract_curve(u, case.H, case.f, 0.8, 5.0)
    assert abs(dpp_defect(good, u, 3.0)) <= 5 * (1e-8 + u.grid.min_spacing)
    # reversed feedback: same speeds, heading for the boundary
    s = good.times
    pos = np.clip(0.8 + (0.8 - good.positions[:, 0]), -1, 1)
    bad = curve_from_samples(case.H, case.f, s, pos, np.gradient(pos, s))
    assert abs(dpp_defect(bad, u, 3.0)) > 10 * abs(dpp_defect(good, u, 3.0))
    with pytest.raises(ValueError):
        dpp_defect(good, u, 6.0)


def test_pathwise_identities_on_well(e2_coarse):
    case, u = e2_coarse
    c = extract_curve(u, case.H, case.f, 0.9, 20.0)
    assert value_drift(c, u) <= 5 * u.grid.min_spacing
    assert speed_gradient_gap(c, u, case.H) <= 1e-10
    # a|grad u|^p = f - u along the curve, up to the discretization
    g = u.gradient(c.positions)[:, 0]
    slope_gap = np.abs(case.H.a * np.abs(g) ** 2 - (case.f(c.positions) - u(c.positions)))
    assert slope_gap.max() <= 5 * u.grid.min_spacing
    integral, u1, t1 = energy_identity(c, u, case.f, case.H)
    assert t1 == 0.0
    assert integral == pytest.approx(u1, rel=5e-2)


def test_curve_in_two_dimensions():
    dom = Domain.disc(radius=1.0)
    f = make_cost("quadratic", dom)
    H = PowerHamiltonian(2.0, 0.5)
    u = solve(H, f, build_grid(dom, 0.05), SolverConfig(tol=1e-6))
    c = extract_curve(u, H, f, np.array([0.4, 0.3]), 3.0)
    assert c.dim == 2
    # u = |x|^2/2 gives xi(s) = x0 e^{-s}
    expected = np.array([0.4, 0.3]) * math.exp(-3.0)
    assert np.linalg.norm(c.positions[-1] - expected) <= 0.05
