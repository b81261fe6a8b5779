"""Finite-difference operators and their exact transposes.

Conventions used by every discrete energy in the package:

* second differences live on nodes, with a mirror ghost node at each end
  (``u[-1] = u[1]``) which enforces a vanishing normal derivative;
* first differences live on the cells between nodes (forward differences);
* nodal quantities are integrated with trapezoidal weights, cell quantities
  with the midpoint rule.

With these choices the adjoint of each operator is available in closed form,
so gradients of the discrete energies are exact, and in the interior the
gradient divided by the cell volume is the standard 5-point (1D) or
13-point (2D) fourth-order residual.
"""

import numpy as np


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def d2(u, h, axis=0):
    """Nodal second difference along ``axis`` with mirror ghosts."""
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    out /= h * h
    return np.moveaxis(out, 0, axis)


def d2_adjoint(q, h, axis=0):
    """Transpose of :func:`d2`."""
    q = np.moveaxis(q, axis, 0)
    out = -2.0 * q
    out[1:] += q[:-1]
    out[:-1] += q[1:]
    # the ghost doubles the coupling of the end nodes to their neighbours
    out[1] += q[0]
    out[-2] += q[-1]
    out /= h * h
    return np.moveaxis(out, 0, axis)


def d1(u, h, axis=0):
    """Cell-centred first difference (length n-1 along ``axis``)."""
    return np.diff(u, axis=axis) / h


def d1_adjoint(q, h, axis=0):
    q = np.moveaxis(q, axis, 0)
    shape = (q.shape[0] + 1,) + q.shape[1:]
    out = np.zeros(shape, dtype=q.dtype)
    out[:-1] -= q
    out[1:] += q
    out /= h
    return np.moveaxis(out, 0, axis)


def fourth_difference(u, h, axis=0):
    """Plain 5-point fourth difference; only entries 2..n-3 are meaningful."""
    u = np.moveaxis(u, axis, 0)
    out = np.zeros_like(u)
    out[2:-2] = (u[4:] - 4.0 * u[3:-1] + 6.0 * u[2:-2] - 4.0 * u[1:-3] + u[:-4]) / h**4
    return np.moveaxis(out, 0, axis)


def second_difference(u, h, axis=0):
    """Plain 3-point second difference; end entries are left at zero."""
    u = np.moveaxis(u, axis, 0)
    out = np.zeros_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    return np.moveaxis(out, 0, axis)


def central_first(u, h, axis=0):
    """Nodal central first difference; zero at the ends (mirror ghosts)."""
    u = np.moveaxis(u, axis, 0)
    out = np.zeros_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)
