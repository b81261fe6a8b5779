import numpy as np
from hypothesis import given, strategies as hs
from hypothesis.extra import numpy as hnp

from efkl import stencils as st

finite = hs.floats(-10, 10, allow_nan=False)


def test_d2_exact_on_quadratics():
    x = np.linspace(-1, 1, 21)
    h = x[1] - x[0]
    u = 3 * x**2 - x + 2
    assert np.allclose(st.d2(u, h)[1:-1], 6.0)


def test_d2_ghost_end_uses_mirror():
    # a function with zero slope at the ends: u = cos(pi x) on [0, 1]
    x = np.linspace(0, 1, 401)
    h = x[1] - x[0]
    u = np.cos(np.pi * x)
    assert abs(st.d2(u, h)[0] + np.pi**2) < 1e-3
    assert abs(st.d2(u, h)[-1] - np.pi**2) < 1e-3


def test_trapezoid_weights_integrate_linear_exactly():
    w = st.trapezoid_weights(11, 0.1)
    x = np.linspace(0, 1, 11)
    assert np.isclose(w @ (2 * x + 1), 2.0)


def test_fourth_difference_of_quartic():
    x = np.linspace(-1, 1, 41)
    h = x[1] - x[0]
    assert np.allclose(st.fourth_difference(x**4, h)[2:-2], 24.0, rtol=1e-6)


def test_central_first_exact_for_linear():
    x = np.linspace(0, 2, 9)
    out = st.central_first(5 * x, x[1] - x[0])
    assert np.allclose(out[1:-1], 5.0) and out[0] == out[-1] == 0.0


@given(hnp.arrays(float, (12, 2), elements=finite), hnp.arrays(float, (12, 2), elements=finite))
def test_d2_adjoint_is_transpose(u, q):
    h = 0.3
    assert np.isclose(np.sum(st.d2(u, h) * q), np.sum(u * st.d2_adjoint(q, h)),
                      rtol=1e-9, atol=1e-6)


@given(hnp.arrays(float, (7, 9), elements=finite), hnp.arrays(float, (7, 8), elements=finite))
def test_d1_adjoint_is_transpose_along_axis(u, q):
    h = 0.7
    lhs = np.sum(st.d1(u, h, axis=1) * q)
    rhs = np.sum(u * st.d1_adjoint(q, h, axis=1))
    assert np.isclose(lhs, rhs, rtol=1e-9, atol=1e-6)


@given(hnp.arrays(float, (6, 8, 2), elements=finite))
def test_axis_argument_matches_transpose(u):
    a = st.d2(u, 0.5, axis=1)
    b = np.swapaxes(st.d2(np.swapaxes(u, 0, 1), 0.5, axis=0), 0, 1)
    assert np.array_equal(a, b)
