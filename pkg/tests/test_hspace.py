import numpy as np
import pytest
from hypothesis import given, strategies as hs

from efkl import hspace as H
from efkl.families import reflect
from efkl.ode1d import Grid1D, shift_nodes


def test_sigma_hat_function():
    g = Grid1D(5.0, 1001)
    a, w = 0.7, 1.5
    hat = a * np.clip(1 - np.abs(g.x) / w, 0, None)
    assert H.sigma(hat, g.h) == pytest.approx(2 * a**2 / w, rel=1e-12)
    assert H.sigma(np.zeros(g.n), g.h) == 0.0


@given(hs.floats(-5, 5, allow_nan=False))
def test_sigma_homogeneity(lam):
    g = Grid1D(3.0, 101)
    h = np.sin(g.x)[:, None] * np.array([1.0, -0.5])
    assert H.sigma(lam * h, g.h) == pytest.approx(lam**2 * H.sigma(h, g.h), rel=1e-12, abs=1e-300)


def test_hilbert_point_arithmetic(ac):
    g = Grid1D(8.0, 201)
    u = H.HilbertPoint.at(ac, 3.0, g)
    assert u.norm() == 0.0
    v = u + np.sin(g.x)
    assert v.inner(v) == pytest.approx(v.norm() ** 2)
    assert np.allclose(v.profile.values[:, 0] - u.profile.values[:, 0], np.sin(g.x))
    with pytest.raises(Exception):
        H.HilbertPoint(u.base, np.zeros(5))


def test_effective_potential(ac, ac_min):
    e = H.HilbertPoint.from_profile(ac_min.profile)
    assert abs(H.effective_potential(e, ac_min.action)) <= 1e-12
    e0 = H.HilbertPoint.at(ac, 3.0, ac_min.profile.grid)
    assert H.effective_potential(e0, ac_min.action) > 0


@given(hs.integers(0, 2**32 - 1), hs.floats(1e-3, 0.3))
def test_effective_potential_nonnegative(ac_min, seed, amp):
    r = np.random.default_rng(seed)
    g = ac_min.profile.grid
    bump = np.exp(-((g.x - r.uniform(-5, 5)) ** 2) / r.uniform(0.5, 4))
    u = H.HilbertPoint.from_profile(ac_min.profile) + amp * r.choice([-1, 1]) * bump
    assert H.effective_potential(u, ac_min.action) >= -1e-12


def test_quadratic_expansion(ac, ac_min):
    e = H.HilbertPoint.from_profile(ac_min.profile)
    assert H.quadratic_expansion_check(e, e) == 0.0
    r = np.random.default_rng(3)
    g = ac_min.profile.grid
    off = r.normal(size=(g.n, 1))
    off[0] = off[-1] = 0.0
    off *= 0.01 / np.sqrt(g.weights @ off[:, 0] ** 2)
    scale = max(1.0, ac_min.action)
    assert H.quadratic_expansion_check(e + off, e) <= 1e-6 * scale
    assert H.quadratic_expansion_check(H.HilbertPoint.at(ac, 3.0, g), e) <= 1e-6 * scale


def test_distance_to_family(families04):
    f_minus, f_plus, cert = families04
    p = f_minus.members[0].profile
    assert H.dist_to_family(p, f_minus) <= 1e-6
    with pytest.raises(Exception):
        H.dist_to_family(p, [])


@given(hs.integers(0, 2**32 - 1))
def test_family_distances_triangle(families04, seed):
    f_minus, f_plus, cert = families04
    r = np.random.default_rng(seed)
    em, ep = f_minus.members[0].profile, f_plus.members[0].profile
    lam = r.uniform(0, 1)
    wiggle = 0.05 * r.normal(size=em.values.shape) * np.exp(-em.x**2 / 20)[:, None]
    u = em.with_values((1 - lam) * em.values + lam * ep.values + wiggle, clamped=False)
    assert H.dist_to_family(u, f_minus) + H.dist_to_family(u, f_plus) >= cert.d_min - 1e-6


def test_tube_membership(families04):
    f_minus, f_plus, cert = families04
    tubes = H.TubeSets(cert.d_min, f_minus, f_plus)
    assert tubes.radius == cert.d_min / 4
    em = f_minus.members[0].profile
    ep = f_plus.members[0].profile
    assert H.tube_membership(em, tubes) == H.F_MINUS
    assert H.tube_membership(ep, tubes) == H.F_PLUS
    # the straight midpoint is equidistant, hence in both tubes
    mid = em.with_values(0.5 * (em.values + ep.values), clamped=False)
    assert H.tube_membership(mid, tubes) == H.BOTH
    # anything within d_min/4 of F+ is excluded from F-
    near = ep.with_values(0.9 * ep.values + 0.1 * em.values, clamped=False)
    assert H.dist_to_family(near, f_plus) < cert.d_min / 4
    assert H.tube_membership(near, tubes) == H.F_PLUS


@given(hs.integers(-50, 50), hs.floats(0.0, 1.0))
def test_tube_membership_translation_invariant(families04, k, lam):
    f_minus, f_plus, cert = families04
    tubes = H.TubeSets(cert.d_min, f_minus, f_plus)
    em, ep = f_minus.members[0].profile, f_plus.members[0].profile
    u = em.with_values((1 - lam) * em.values + lam * ep.values, clamped=False)
    a_minus, a_plus = em.potential.wells
    moved = u.with_values(shift_nodes(u.values, k, a_minus, a_plus))
    assert H.tube_membership(u, tubes) == H.tube_membership(moved, tubes)


def test_h2_offset_norm_of_reflection_pair(families04):
    f_minus, f_plus, _ = families04
    p = f_minus.members[0].profile
    assert H.h2_offset_norm(p) == pytest.approx(H.h2_offset_norm(reflect(p)), rel=1e-12)
