import numpy as np
import pytest
from hypothesis import given, strategies as hs

from efkl import families as fam
from efkl import potentials
from efkl.errors import InvalidParameterError, UnclassifiableError
from efkl.ode1d import Grid1D, Profile1D, action_1d, shift_nodes


@pytest.fixture(scope="module")
def arc():
    grid = Grid1D(1 / 0.4 + 16, 4001)
    return fam.arc_comparison_map(0.4, grid)


def semicircle(grid, pot, upper=True):
    theta = np.pi * (1 - (np.clip(grid.x / grid.half_length * 1.25, -1, 1) + 1) / 2)
    v = np.column_stack([np.cos(theta), np.sin(theta) * (1 if upper else -1)])
    v[0], v[-1] = pot.wells
    return Profile1D(grid, v, pot, 1.0)


def test_arc_map_landmarks(arc):
    x = arc.x
    i0 = np.argmin(abs(x))
    assert np.allclose(arc.values[i0], [0.0, -0.6], atol=1e-12)
    assert np.allclose(arc.values[x <= -(1 / 0.4 + 2)], [-1.0, 0.0])
    assert np.allclose(arc.values[x >= 1 / 0.4 + 2], [1.0, 0.0])
    # junction continuity at x = +-1/eps: jump at most O(h) between neighbours
    steps = np.linalg.norm(np.diff(arc.values, axis=0), axis=1)
    assert steps.max() <= 2 * arc.grid.h


def test_arc_map_needs_room():
    with pytest.raises(InvalidParameterError):
        fam.arc_comparison_map(0.4, Grid1D(3.0, 301))


def test_reflection(arc):
    r = fam.reflect(arc)
    assert np.array_equal(fam.reflect(r).values, arc.values)
    assert action_1d(r) == action_1d(arc)
    assert fam.winding_sign(r) != fam.winding_sign(arc)
    with pytest.raises(InvalidParameterError):
        fam.reflect(Profile1D(Grid1D(5.0, 101), np.tanh(np.linspace(-5, 5, 101)) / np.tanh(5),
                              potentials.allen_cahn(), 3.0))


def test_winding_convention(weps):
    g = Grid1D(10.0, 401)
    # the upper half circle from (-1, 0) to (1, 0) turns clockwise
    assert fam.winding_sign(semicircle(g, weps, upper=True)) == fam.CLOCKWISE
    assert fam.winding_sign(semicircle(g, weps, upper=False)) == fam.COUNTERCLOCKWISE


def test_winding_rejects_paths_through_origin(weps):
    g = Grid1D(10.0, 401)
    v = np.column_stack([np.clip(g.x, -1, 1), np.zeros(g.n)])
    with pytest.raises(UnclassifiableError):
        fam.winding_sign(Profile1D(g, v, weps, 1.0))


def test_distances(arc):
    r = fam.reflect(arc)
    assert fam.l2_distance(arc, arc) == 0.0
    assert fam.l2_distance(arc, r) == fam.l2_distance(r, arc)
    e2 = np.sqrt(arc.grid.weights @ arc.values[:, 1] ** 2)
    assert fam.l2_distance(arc, r) == pytest.approx(2 * e2, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        fam.l2_distance(arc, fam.arc_comparison_map(0.4, Grid1D(arc.grid.half_length, 2001)))


@given(hs.integers(-60, 60))
def test_translation_distance_ignores_shifts(k):
    grid = Grid1D(1 / 0.4 + 16, 2001)
    p = fam.arc_comparison_map(0.4, grid)
    a_minus, a_plus = p.potential.wells
    q = p.with_values(shift_nodes(p.values, k, a_minus, a_plus))
    # squared distances come from an FFT correlation, so their square roots
    # bottom out near sqrt(machine eps * ||p||^2)
    assert fam.translation_distance(p, q) <= 1e-6
    assert fam.translation_distance(p, fam.reflect(q)) <= fam.l2_distance(p, fam.reflect(p)) + 1e-6


def test_wizz_bound_values():
    assert fam.wizz_bound(1.0) == pytest.approx(0.064705, abs=1e-6)
    assert fam.wizz_bound(2.0) == pytest.approx(0.091507, abs=1e-6)
    with pytest.raises(InvalidParameterError):
        fam.wizz_bound(0.0)


def test_mu_homogeneity(arc):
    scaled = arc.with_values(2 * arc.values, clamped=False)
    assert fam.mu_of(scaled) == pytest.approx(4 * fam.mu_of(arc))
    mu, lb = fam.mu_and_lower_bound([arc])
    assert mu > 0 and lb == pytest.approx(1 / np.sqrt(128 * mu))


def test_arc_action_shrinks_with_eps():
    j = [sum(fam.arc_action_parts(e, 1.0)) for e in (0.05, 0.1, 0.2)]
    assert j[0] < j[1] < j[2]


def test_arc_audit_fits_positive_constants():
    j, k1, k2, audit = fam.arc_action_audit(0.4, 1.0, sweep=(0.1, 0.2, 0.3))
    assert k1 > 0 and k2 > 0 and audit.holds
    assert j == audit.actions[-1]


def test_arc_audit_needs_resolution():
    with pytest.raises(InvalidParameterError):
        fam.arc_action_parts(0.4, 1.0, Grid1D(1 / 0.4 + 3, 201))


def test_families_at_default_instance(families04):
    f_minus, f_plus, cert = families04
    assert len(f_minus) and len(f_plus)
    assert all(fam.winding_sign(p) == fam.COUNTERCLOCKWISE for p in f_minus.profiles())
    assert all(fam.winding_sign(p) == fam.CLOCKWISE for p in f_plus.profiles())
    assert abs(f_minus.j_min_estimate - f_plus.j_min_estimate) <= 1e-10
    for m in f_minus.members:
        assert action_1d(fam.reflect(m.profile)) == m.action
    assert cert.d_min > 0 and cert.separated
    assert cert.d_min >= cert.lower_bound
    assert cert.j_min <= cert.arc_action
    assert cert.homotopy_proxy and cert.psi_consistent and cert.wizz_consistent
    assert fam.family_distance(f_plus, f_plus) <= 1e-6


def test_members_avoid_the_inner_disc(families04, weps):
    f_minus, f_plus, cert = families04
    for p in f_minus.profiles() + f_plus.profiles():
        assert np.linalg.norm(p.values, axis=1).min() >= 0.5
        # the member stays on one side of the u1 axis outside the well balls
        far = np.minimum(np.linalg.norm(p.values - weps.a_minus, axis=1),
                         np.linalg.norm(p.values - weps.a_plus, axis=1)) > weps.well_radius
        s = np.sign(p.values[far, 1])
        assert np.all(s == s[0])


def test_d_min_invariant_under_retranslation(families04):
    f_minus, f_plus, cert = families04
    p = f_plus.members[0].profile
    a_minus, a_plus = p.potential.wells
    moved = p.with_values(shift_nodes(p.values, 25, a_minus, a_plus))
    d = min(fam.translation_distance(q, moved) for q in f_minus.profiles())
    assert d == pytest.approx(cert.d_min, abs=1e-6)


def test_family_distance_needs_members():
    with pytest.raises(InvalidParameterError):
        fam.family_distance(fam.HeteroclinicFamily("-"), fam.HeteroclinicFamily("+"))
