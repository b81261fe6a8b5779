"""Points of e0 + L2, the excess action, and the tube sets around F-/F+."""

import logging
from dataclasses import dataclass

import numpy as np

from . import stencils as st
from .errors import InvalidParameterError
from .families import translation_distance
from .ode1d import DiscreteAction, action_1d, build_e0, shift_nodes, translation_scan

log = logging.getLogger(__name__)

F_MINUS, F_PLUS, BOTH, NEITHER = "F-", "F+", "both", "neither"


@dataclass
class HilbertPoint:
    """u = e0 + offset, with e0 built on the base profile's grid."""

    base: object
    offset: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=float)
        if off.ndim == 1:
            off = off[:, None]
        if off.shape != self.base.values.shape:
            raise InvalidParameterError("offset shape does not match the base profile")
        self.offset = off

    @classmethod
    def at(cls, pot, beta, grid):
        from .ode1d import e0_profile
        base = e0_profile(pot, beta, grid)
        return cls(base, np.zeros_like(base.values))

    @classmethod
    def from_profile(cls, p):
        base = p.with_values(build_e0(p.potential, p.grid))
        return cls(base, p.values - base.values)

    @property
    def grid(self):
        return self.base.grid

    @property
    def profile(self):
        # offsets need not vanish at the ends, so no clamp check here
        return self.base.with_values(self.base.values + self.offset, clamped=False)

    def __add__(self, h):
        return HilbertPoint(self.base, self.offset + np.asarray(h).reshape(self.offset.shape))

    def inner(self, other):
        return float(self.grid.weights @ np.sum(self.offset * other.offset, axis=1))

    def norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))


def _as_profile(u):
    return u.profile if isinstance(u, HilbertPoint) else u


def effective_potential(u, j_min):
    """J(u) - J_min; pair ``j_min`` with a minimizer solved on the same grid."""
    return action_1d(_as_profile(u)) - j_min


def sigma(offset, spacing):
    """Discrete int |h_x|^2 from cell differences."""
    off = np.asarray(offset, dtype=float)
    if off.ndim == 1:
        off = off[:, None]
    return float(spacing * np.sum(st.d1(off, spacing) ** 2))


def quadratic_expansion_check(u, e):
    """|W(u) - Q(u, e)| where Q is the exact second-order-plus-remainder
    expansion of the action about ``e``.

    The defect equals the pairing of the discrete gradient at ``e`` with
    u - e, so it is limited only by how well ``e`` solves the discrete
    Euler-Lagrange equation.
    """
    p = _as_profile(u)
    ep = e.profile
    pot, grid = ep.potential, ep.grid
    if p.grid != grid:
        raise InvalidParameterError("u and e live on different grids")
    act = DiscreteAction(pot, ep.beta, grid)
    h, w = grid.h, grid.weights
    d = p.values - ep.values
    curv = 0.5 * w @ np.sum(st.d2(d, h) ** 2, axis=1)
    grad = 0.5 * ep.beta * h * np.sum(st.d1(d, h) ** 2)
    rem = w @ (pot.value(p.values) - pot.value(ep.values)
               - np.sum(pot.gradient(ep.values) * d, axis=1))
    excess = act.value(p.values) - act.value(ep.values)
    return float(abs(excess - (curv + grad + rem)))


def dist_to_family(u, family):
    profs = family.profiles() if hasattr(family, "profiles") else list(family)
    if not profs:
        raise InvalidParameterError("empty family")
    p = _as_profile(u)
    return min(translation_distance(p, q) for q in profs)


def nearest_member(u, family):
    """(distance, translate of the nearest member aligned with u)."""
    p = _as_profile(u)
    best = None
    for q in family.profiles():
        a_minus, a_plus = q.potential.wells
        ks, d = translation_scan(q.values, p.values, q.grid, a_minus, a_plus)
        i = int(np.argmin(d))
        if best is None or d[i] < best[0]:
            best = (d[i], shift_nodes(q.values, -int(ks[i]), a_minus, a_plus))
    return float(np.sqrt(best[0])), best[1]


def h2_offset_norm(p):
    """Discrete H2 norm of p - e0, a measured proxy for the constant gamma."""
    d = p.values - build_e0(p.potential, p.grid)
    h, w = p.grid.h, p.grid.weights
    return float(np.sqrt(w @ np.sum(d**2 + st.d2(d, h) ** 2, axis=1)
                         + h * np.sum(st.d1(d, h) ** 2)))


@dataclass(frozen=True)
class TubeSets:
    d_min: float
    f_minus: object
    f_plus: object

    @property
    def radius(self):
        return self.d_min / 4.0


def tube_membership(u, tubes):
    """Classify u against the tubes around F- and F+.

    Each tube is decided by certified conditions only:

    * in F-: d(u,F-) <= d(u,F+) (take h = 0), or d(u,F-) <= d_min/2, or a
      trial point v within d_min/4 of u towards the nearest F- member has
      d(v,F-) <= d(v,F+);
    * not in F-: d(u,F-) - d(u,F+) > d_min/2 (no v within d_min/4 of u can
      be closer to F-), which contains the case d(u,F+) < d_min/4.

    Anything undecided is reported as ``"both"`` and logged.
    """
    p = _as_profile(u)
    d_minus = dist_to_family(p, tubes.f_minus)
    d_plus = dist_to_family(p, tubes.f_plus)
    d_min = tubes.d_min

    def decide(d_own, d_other, own):
        if d_own <= d_other or d_own <= 0.5 * d_min:
            return True
        if d_own - d_other > 0.5 * d_min:
            return False
        dist, target = nearest_member(p, own)
        step = min(tubes.radius, dist)
        v = p.with_values(p.values + (target - p.values) * (step / dist), clamped=False)
        other = tubes.f_plus if own is tubes.f_minus else tubes.f_minus
        if dist_to_family(v, own) <= dist_to_family(v, other):
            return True
        return None

    in_minus = decide(d_minus, d_plus, tubes.f_minus)
    in_plus = decide(d_plus, d_minus, tubes.f_plus)
    if in_minus is None or in_plus is None:
        log.info("tube membership undecided (d-=%.4g, d+=%.4g, d_min=%.4g)",
                 d_minus, d_plus, d_min)
    in_minus = in_minus is not False
    in_plus = in_plus is not False
    if in_minus and in_plus:
        return BOTH
    if in_minus:
        return F_MINUS
    if in_plus:
        return F_PLUS
    return NEITHER
