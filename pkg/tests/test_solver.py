import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjsc.costs import make_cost
from hjsc.domain import Domain
from hjsc.errors import NonConvergenceError, StencilError
from hjsc.hamiltonian import PowerHamiltonian, RunningCost
from hjsc.solver import (
    SolverConfig,
    ValueField,
    bellman_update,
    build_grid,
    control_set,
    default_control_radius,
    pde_residual,
    solve,
)

I = Domain.interval(-1.0, 1.0)


def field(grid, values):
    return ValueField(grid, np.asarray(values, dtype=float), np.nan, 0)


# --- grids ------------------------------------------------------------------


def test_build_grid_examples():
    g = build_grid(I, 0.5)
    np.testing.assert_array_equal(g.points[:, 0], [-1, -0.5, 0, 0.5, 1])
    assert g.tags[0] == 1 and g.tags[-1] == 1 and np.all(g.tags[1:-1] == 0)
    assert len(build_grid(I, 1e-3).points) == 2001
    sq = build_grid(Domain.rectangle((0, 1), (0, 1)), 0.25)
    assert sq.shape == (5, 5)
    assert int(sq.interior.sum()) == 9


@given(st.floats(0.003, 0.5))
def test_grid_spacing_never_exceeds_target(h):
    g = build_grid(I, h)
    assert max(g.spacing) <= h + 1e-15
    assert g.points[-1, 0] == 1.0
    assert g.interior.sum() >= 3


def test_build_grid_rejects_coarse_spacing():
    with pytest.raises(ValueError):
        build_grid(I, 0.6)


def test_disc_grid_tags_match_membership():
    dom = Domain.disc(radius=1.0)
    g = build_grid(dom, 0.1)
    np.testing.assert_array_equal(g.interior, dom.contains_open(g.points))


# --- configuration ----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=1.5, control_radius=1, control_samples=41).validate(1)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, control_radius=1, control_samples=5).validate(1)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, control_radius=1, control_samples=21).validate(2)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, control_radius=1, control_samples=41, minimization="exact").validate(2)
    cfg = SolverConfig().resolved(PowerHamiltonian(), make_cost("bump", I), build_grid(I, 0.01))
    assert cfg.dt == pytest.approx(0.01) and cfg.minimization == "exact"


def test_control_radius_rule():
    # E5: osc f = 1, a = 1, p = 2 -> g_max = sqrt(2), speed 2 sqrt(2), radius twice that
    R = default_control_radius(PowerHamiltonian(2, 1), make_cost("bump", I), I)
    assert R == pytest.approx(4 * np.sqrt(2), rel=1e-6)


def test_control_set_layout():
    c1 = control_set(2.0, 9, 1)
    assert c1[0, 0] == 0.0 and len(c1) == 9 and np.abs(c1).max() == 2.0
    c2 = control_set(1.0, 65, 2)
    assert np.all(c2[0] == 0) and np.linalg.norm(c2, axis=1).max() == pytest.approx(1.0)


# --- the update operator ------------------------------------------------------


@pytest.mark.parametrize("mode", ["exact", "sampled"])
def test_fixed_points(mode):
    g = build_grid(I, 0.1)
    H = PowerHamiltonian(2, 1)
    cfg = SolverConfig(minimization=mode)
    zero = make_cost("constant", I)
    out = bellman_update(field(g, np.zeros(21)), H, zero, cfg)
    np.testing.assert_array_equal(out.values, 0.0)
    c = make_cost("constant", I, value=0.7)
    out = bellman_update(field(g, np.full(21, 0.7)), H, c, cfg)
    np.testing.assert_allclose(out.values, 0.7, rtol=0, atol=1e-15)


def brute_force_update(values, xs, H, f, dt, radius, speeds):
    """Independent min over a speed sample, one node at a time, with np.interp."""
    disc = np.exp(-dt)
    out = np.empty_like(values)
    for i, x in enumerate(xs):
        y = x - dt * speeds
        ok = (y >= xs[0] - 1e-12) & (y <= xs[-1] + 1e-12)
        w, y = speeds[ok], np.clip(y[ok], xs[0], xs[-1])
        vals = (1 - disc) * (H.legendre_coeff * np.abs(w) ** H.q + f(x)[0]) + disc * np.interp(y, xs, values)
        out[i] = vals.min()
    return out


@pytest.mark.parametrize("family,a,p", [("bump", 1.0, 2.0), ("quadratic", 0.5, 2.0), ("abs-cone", 1.0, 1.5)])
def test_update_against_brute_force(family, a, p):
    g = build_grid(I, 0.1)
    H, f = PowerHamiltonian(p, a), make_cost(family, I)
    xs = g.points[:, 0]
    cfg = SolverConfig(dt=0.1, control_radius=3.0, control_samples=41)
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 1, 21)
    # sampled mode equals the brute-force min over its own control set
    sampled = bellman_update(field(g, u), H, f, SolverConfig(0.1, 3.0, 41, minimization="sampled")).values
    ref = brute_force_update(u, xs, H, f, 0.1, 3.0, control_set(3.0, 41, 1)[:, 0])
    np.testing.assert_allclose(sampled, ref, rtol=0, atol=1e-14)
    # exact mode is a min over the whole interval: below any sample, close to a dense one
    exact = bellman_update(field(g, u), H, f, cfg).values
    dense = brute_force_update(u, xs, H, f, 0.1, 3.0, np.linspace(-3, 3, 60001))
    assert np.all(exact <= sampled + 1e-14)
    assert np.all(exact <= dense + 1e-14)
    np.testing.assert_allclose(exact, dense, rtol=0, atol=1e-7)


@pytest.mark.parametrize("mode", ["exact", "sampled"])
def test_one_update_from_max_f_decreases(mode):
    g = build_grid(I, 0.1)
    H, f = PowerHamiltonian(2, 1), make_cost("bump", I)
    u0 = np.full(21, 1.0)
    u1 = bellman_update(field(g, u0), H, f, SolverConfig(minimization=mode)).values
    assert np.all(u1 <= u0)


@pytest.mark.parametrize("mode", ["exact", "sampled"])
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(0.0, 1.0))
def test_update_is_contraction_and_monotone(mode, seed, shift):
    g = build_grid(I, 0.1)
    H, f = PowerHamiltonian(1.5, 1), make_cost("abs-cone", I)
    cfg = SolverConfig(minimization=mode)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, 21)
    w = rng.uniform(-1, 1, 21)
    Tu = bellman_update(field(g, u), H, f, cfg).values
    Tw = bellman_update(field(g, w), H, f, cfg).values
    dt = cfg.resolved(H, f, g).dt
    assert np.max(np.abs(Tu - Tw)) <= np.exp(-dt) * np.max(np.abs(u - w)) + 1e-14
    upper = u + shift * rng.uniform(0, 1, 21)
    Tup = bellman_update(field(g, upper), H, f, cfg).values
    assert np.all(Tu <= Tup + 1e-14)


# --- full solves --------------------------------------------------------------


def test_zero_cost_gives_zero_field():
    for dom, h in ((I, 0.05), (Domain.rectangle((0, 1), (0, 1)), 0.1)):
        f = make_cost("constant", dom)
        u = solve(PowerHamiltonian(), f, build_grid(dom, h))
        np.testing.assert_allclose(u.values[u.grid.admissible], 0.0, atol=1e-12)


def test_quadratic_and_well_oracles(e3_coarse, e2_coarse):
    for case, u in (e3_coarse, e2_coarse):
        x = u.grid.points[:, 0]
        assert np.max(np.abs(u.values - case.reference_u(x))) <= 1e-2


def test_scheme_error_shrinks_under_refinement():
    from hjsc.examples import get_case

    case = get_case("E2")
    errs = []
    for h in (0.02, 0.01, 0.005):
        u = solve(case.H, case.f, build_grid(case.domain, h), SolverConfig(tol=1e-9))
        x = u.grid.points[:, 0]
        errs.append(np.max(np.abs(u.values - case.reference_u(x))))
    assert errs[0] / errs[1] >= 1.4 and errs[1] / errs[2] >= 1.4


def test_monotone_in_cost():
    g = build_grid(I, 0.02)
    H = PowerHamiltonian(2, 1)
    f1 = make_cost("bump", I)
    f2 = RunningCost(lambda x: f1(x) + 0.1 * x[:, 0] ** 2, lambda x: f1.gradient(x) + 0.2 * x, 0.0)
    cfg = SolverConfig(tol=1e-8)
    u1, u2 = solve(H, f1, g, cfg), solve(H, f2, g, cfg)
    assert np.all(u1.values <= u2.values + 2e-8)


def test_discrete_sandwich_and_zero_set(e2_coarse, e5_coarse):
    for case, u in (e2_coarse, e5_coarse):
        fv = case.f(u.grid.points)
        assert np.all(u.values >= case.f.min_value - 1e-8)
        assert np.all(u.values <= fv.max() + 1e-8)
        np.testing.assert_allclose(u.values[fv == 0], 0.0, atol=1e-8)


def test_two_dimensional_bump_on_disc():
    dom = Domain.disc(radius=1.0)
    f = make_cost("bump", dom)
    u = solve(PowerHamiltonian(), f, build_grid(dom, 0.1), SolverConfig(tol=1e-6))
    adm = u.grid.admissible
    fv = f(u.grid.points[adm])
    vals = u.values[adm]
    assert np.all(vals <= fv + 1e-6) and np.all(vals >= -1e-6)
    assert np.all(np.isnan(u.values[~adm]))
    # radial symmetry survives the polar control sampling to within a few percent
    centre = u.grid.node_index([0.0, 0.0])
    assert 0.3 < u.values[centre] < 1.0


def test_non_convergence_is_reported():
    with pytest.raises(NonConvergenceError) as err:
        solve(PowerHamiltonian(), make_cost("bump", I), build_grid(I, 0.05), SolverConfig(max_iters=3))
    assert err.value.iterations == 3 and err.value.residual > 0


# --- field access -------------------------------------------------------------


def test_interpolation_reproduces_affine_fields():
    g = build_grid(Domain.rectangle((0, 1), (0, 2)), 0.1)
    vals = 2 * g.points[:, 0] - 3 * g.points[:, 1] + 1
    u = field(g, vals)
    pts = np.array([[0.33, 1.21], [0.05, 0.05], [1.0, 2.0]])
    np.testing.assert_allclose(u(pts), 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-12)
    np.testing.assert_allclose(u.gradient(np.array([0.45, 1.0])), [[2.0, -3.0]], atol=1e-9)


def test_pde_residual_examples():
    g = build_grid(I, 0.01)
    H = PowerHamiltonian(2, 0.5)
    xs = g.points[:, 0]
    f = make_cost("quadratic", I)
    u = field(g, 0.5 * xs**2)
    assert abs(pde_residual(u, H, f, g.node_index(0.5))) <= 0.01
    zero = make_cost("constant", I)
    assert pde_residual(field(g, np.zeros_like(xs)), H, zero, 0.3) == 0.0
    one = make_cost("constant", I, value=1.0)
    for x in (-0.5, 0.0, 0.77):
        assert pde_residual(field(g, np.zeros_like(xs)), H, one, x) == -1.0


def test_pde_residual_needs_admissible_node():
    dom = Domain.disc(radius=1.0)
    g = build_grid(dom, 0.25)
    u = field(g, np.where(g.admissible, 0.0, np.nan))
    outside = int(np.flatnonzero(~g.admissible)[0])
    with pytest.raises(StencilError):
        pde_residual(u, PowerHamiltonian(), make_cost("constant", dom), outside)


def test_start_from_cost_keeps_zero_set_exact(e2_coarse):
    case, u = e2_coarse
    flat = np.abs(u.grid.points[:, 0]) < 0.5
    assert np.all(u.values[flat] == 0.0)
    # the constant start reaches the same fixed point up to tol
    fmax = np.full(len(u.values), 0.125)
    other = solve(case.H, case.f, u.grid, SolverConfig(tol=1e-8), initial=fmax)
    assert np.max(np.abs(other.values - u.values)) <= 2e-8
    assert 0 < other.values[flat].max() <= 1e-8
