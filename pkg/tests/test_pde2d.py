import numpy as np
import pytest
from hypothesis import given, strategies as hs

from efkl import pde2d
from efkl import stencils as st
from efkl.errors import InvalidParameterError
from efkl.ode1d import Grid1D, Profile1D, action_1d, build_e0, residual_ode
from efkl.pde2d import Energy2D, Field2D, Grid2D, Operator


def random_field(pot, grid, rng, amp=0.2):
    e0 = build_e0(pot, grid.x_grid())
    u = e0[None] + amp * rng.normal(size=(grid.nt, grid.nx, pot.dim))
    u[:, 0], u[:, -1] = pot.wells
    return u


def fd_error(en, u, rng, h=1e-6, n_dirs=3):
    _, g = en.value_and_gradient(u)
    worst = 0.0
    for _ in range(n_dirs):
        d = rng.normal(size=u.shape)
        d[0] = d[-1] = 0.0
        d[:, 0] = d[:, -1] = 0.0
        fd = (en.value(u + h * d) - en.value(u - h * d)) / (2 * h)
        an = float(np.sum(g * d))
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-3))
    return worst


@pytest.mark.parametrize("variant", ["biharmonic", "split-quartic", "general"])
def test_energy_gradient_matches_finite_differences(variant, weps, rng):
    for _ in range(20):
        grid = Grid2D(rng.uniform(1, 4), rng.uniform(3, 8), 101, 101)
        coeffs = tuple(rng.uniform(0.2, 2.0, 5))
        op = Operator.of(variant, rng.uniform(0.5, 3.0), coeffs)
        u = random_field(weps, grid, rng)
        assert fd_error(Energy2D(grid, weps, op), u, rng) <= 1e-6


def test_value_and_gradient_agree_with_value(weps, rng):
    grid = Grid2D(2.0, 5.0, 101, 121)
    op = Operator.of("general", 1.0, (1.0, 0.7, 1.3, 0.4, 2.0))
    en = Energy2D(grid, weps, op)
    u = random_field(weps, grid, rng)
    assert en.value_and_gradient(u)[0] == pytest.approx(en.value(u), rel=1e-13)


@pytest.mark.parametrize("variant", ["biharmonic", "split-quartic"])
def test_gradient_is_the_thirteen_point_residual(variant, weps, rng):
    grid = Grid2D(2.0, 4.0, 101, 101)
    op = Operator.of(variant, 1.3)
    u = random_field(weps, grid, rng, amp=0.05)
    f = Field2D(grid, u, weps, 1.3, op)
    g = pde2d.energy_gradient_2d(f) / (grid.ht * grid.hx)
    r = (weps.gradient(u) + st.fourth_difference(u, grid.ht, axis=0)
         + st.fourth_difference(u, grid.hx, axis=1)
         + op.a12 * st.second_difference(st.second_difference(u, grid.ht, axis=0), grid.hx, axis=1)
         - 1.3 * st.second_difference(u, grid.ht, axis=0)
         - 1.3 * st.second_difference(u, grid.hx, axis=1))
    assert np.allclose(g[3:-3, 3:-3], r[3:-3, 3:-3], rtol=1e-8, atol=1e-6)


def test_t_independent_field_reduces_to_the_line(ac, ac_min):
    xg = ac_min.profile.grid
    grid = Grid2D(3.0, xg.half_length, 101, xg.n)
    u = np.repeat(ac_min.profile.values[None], grid.nt, axis=0)
    f = Field2D(grid, u, ac, 3.0)
    assert pde2d.energy_2d(f) == pytest.approx(2 * grid.T * ac_min.action, rel=1e-12)
    # the 5-point stencils cancel to about 1e-11 at this spacing
    assert pde2d.residual_pde(f) == pytest.approx(residual_ode(ac_min.profile), abs=1e-10)
    assert pde2d.holder_bound_check(f, 1.0) == 0.0
    energy, orbit, defect = pde2d.splitting_defect(f, ac_min.action)
    assert abs(orbit) <= 1e-10 and defect <= 1e-10


def test_operator_variants():
    assert Operator.of("biharmonic", 2.0).as_tuple() == (1.0, 2.0, 1.0, 2.0, 2.0)
    assert Operator.of("split-quartic", 2.0).as_tuple() == (1.0, 0.0, 1.0, 2.0, 2.0)
    with pytest.raises(InvalidParameterError):
        Operator.of("general", 1.0)
    with pytest.raises(InvalidParameterError):
        Operator.of("triharmonic", 1.0)


def test_grid_and_field_validation(weps):
    with pytest.raises(InvalidParameterError):
        Grid2D(1.0, 1.0, 50, 101)
    grid = Grid2D(1.0, 3.0, 101, 101)
    with pytest.raises(InvalidParameterError):
        Field2D(grid, np.zeros((101, 101, 2)), weps, 1.0)
    with pytest.raises(InvalidParameterError):
        Field2D(grid, np.zeros((101, 100, 2)), weps, 1.0, clamped=False)


def test_v0_blend(weps, families04):
    f_minus, f_plus, _ = families04
    em, ep = f_minus.members[0].profile, f_plus.members[0].profile
    grid = Grid2D(3.0, em.grid.half_length, 121, em.grid.n)
    v0 = pde2d.build_V0(em, ep, grid)
    t = grid.t
    assert np.array_equal(v0.values[t <= -1], np.broadcast_to(em.values, v0.values[t <= -1].shape))
    assert np.array_equal(v0.values[t >= 1], np.broadcast_to(ep.values, v0.values[t >= 1].shape))
    assert np.allclose(v0.values[np.argmin(abs(t))], 0.5 * (em.values + ep.values))
    with pytest.raises(InvalidParameterError):
        pde2d.build_V0(em, ep, Grid2D(3.0, em.grid.half_length, 121, 1001))


def test_probe_is_seeded_and_sees_non_minimal_fields(families04):
    f_minus, f_plus, _ = families04
    em, ep = f_minus.members[0].profile, f_plus.members[0].profile
    grid = Grid2D(3.0, em.grid.half_length, 121, em.grid.n)
    v0 = pde2d.build_V0(em, ep, grid)
    a = pde2d.minimality_probe(v0, seed=7, n_trials=30)
    b = pde2d.minimality_probe(v0, seed=7, n_trials=30)
    assert np.array_equal(a.deficits, b.deficits)
    assert a.worst < 0 and not a.passes()


def test_slab_and_tail_on_blend(families04):
    f_minus, f_plus, cert = families04
    em, ep = f_minus.members[0].profile, f_plus.members[0].profile
    grid = Grid2D(3.0, em.grid.half_length, 121, em.grid.n)
    v0 = pde2d.build_V0(em, ep, grid)
    lhs, rhs = pde2d.slab_bound_check(v0, cert.j_min)
    assert np.all(lhs <= rhs)
    assert pde2d.uniform_well_convergence(v0) <= 1e-3


def test_residual_margin_validation(weps):
    grid = Grid2D(1.0, 3.0, 101, 101)
    f = Field2D(grid, random_field(weps, grid, np.random.default_rng(0)), weps, 1.0)
    with pytest.raises(InvalidParameterError):
        pde2d.residual_pde(f, margin=1)


@given(hs.floats(0.05, 0.95))
def test_smooth_bump_profile(tau):
    b = pde2d._bump(np.array([tau, -tau, 0.0, 1.0, 1.5]))
    assert b[0] == b[1] and b[2] == 1.0 and b[3] == 0.0 and b[4] == 0.0
    assert 0.0 <= b[0] <= 1.0
