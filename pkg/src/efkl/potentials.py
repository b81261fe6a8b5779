"""Double-well potentials with analytic derivatives.

All evaluators are vectorised over leading axes: ``u`` has shape ``(..., m)``,
``value`` returns ``(...)``, ``gradient`` ``(..., m)`` and ``hessian``
``(..., m, m)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DEFAULT_WELL_RADIUS = 0.2
_BALL_SAMPLES = 10_000


# ---------------------------------------------------------------------------
# smooth switch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MollifierSpec:
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise InvalidParameterError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def inner(self):
        return np.sqrt(1.0 - self.eps)

    @property
    def outer(self):
        return np.sqrt(1.0 - 0.5 * self.eps)


def _smoothstep(s):
    """C-infinity step g(s) = B(s) / (B(s) + B(1 - s)), B(s) = exp(-1/s),
    together with g' and g''."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    sc = np.where(inside, s, 0.5)
    z = 1.0 / sc - 1.0 / (1.0 - sc)
    # logistic form avoids overflow of exp(-1/s) ratios near the knots
    g_in = 0.5 * (1.0 - np.tanh(0.5 * z))
    q = 1.0 / sc**2 + 1.0 / (1.0 - sc) ** 2
    dq = -2.0 / sc**3 + 2.0 / (1.0 - sc) ** 3
    gg = g_in * (1.0 - g_in)
    d1 = gg * q
    d2 = d1 * (1.0 - 2.0 * g_in) * q + gg * dq
    g = np.where(inside, g_in, np.where(s >= 1.0, 1.0, 0.0))
    return g, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def mollifier_phi(t, spec, derivatives=False):
    """Smooth switch: 0 for t <= sqrt(1-eps), 1 for t >= sqrt(1-eps/2).

    With ``derivatives=True`` returns ``(phi, phi', phi'')`` in ``t``.
    """
    width = spec.outer - spec.inner
    s = (np.asarray(t, dtype=float) - spec.inner) / width
    g, d1, d2 = _smoothstep(s)
    if derivatives:
        return g, d1 / width, d2 / width**2
    return g


# ---------------------------------------------------------------------------
# potential base
# ---------------------------------------------------------------------------

class Potential:
    """Base class; subclasses provide ``_value``, ``_gradient``, ``_hessian``.

    The well radius ``r``, convexity ``c`` and upper constant ``mu_w`` are
    calibrated by dense sampling of the closed balls around the wells.
    """

    name = "potential"
    dim = 1

    def __init__(self, a_minus, a_plus, well_radius=None):
        self.a_minus = np.atleast_1d(np.asarray(a_minus, dtype=float))
        self.a_plus = np.atleast_1d(np.asarray(a_plus, dtype=float))
        if well_radius is None:
            well_radius = self._default_radius()
        self.well_radius = float(well_radius)
        self.convexity, self.upper = self._calibrate(self.well_radius)

    def _default_radius(self):
        return DEFAULT_WELL_RADIUS

    # evaluators ------------------------------------------------------------
    def value(self, u):
        return self._value(np.asarray(u, dtype=float))

    def gradient(self, u):
        return self._gradient(np.asarray(u, dtype=float))

    def hessian(self, u):
        return self._hessian(np.asarray(u, dtype=float))

    def value_and_gradient(self, u):
        u = np.asarray(u, dtype=float)
        return self._value(u), self._gradient(u)

    @property
    def wells(self):
        return self.a_minus, self.a_plus

    @property
    def params(self):
        """Parameters identifying the potential in artifacts."""
        return {"name": self.name, "r": self.well_radius, "c": self.convexity,
                "mu_w": self.upper}

    def well_hessian_min(self):
        """Smallest Hessian eigenvalue over the two wells."""
        h = self.hessian(np.stack([self.a_minus, self.a_plus]))
        return float(np.linalg.eigvalsh(h).min())

    # calibration -----------------------------------------------------------
    def ball_samples(self, radius, n_samples=_BALL_SAMPLES):
        """Deterministic samples of the closed ball of ``radius`` around each well.

        Returns ``(points, offsets)`` with ``offsets = points - well``.
        """
        if self.dim == 1:
            offs = np.linspace(-radius, radius, n_samples)[:, None]
        elif self.dim == 2:
            k = int(np.sqrt(n_samples))
            rho = np.linspace(0.0, radius, k)
            theta = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
            rr, tt = np.meshgrid(rho, theta, indexing="ij")
            offs = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        else:
            raise NotImplementedError("ball sampling implemented for m <= 2")
        pts = np.concatenate([self.a_minus + offs, self.a_plus + offs])
        return pts, np.concatenate([offs, offs])

    def _calibrate(self, radius):
        pts, offs = self.ball_samples(radius)
        eig = np.linalg.eigvalsh(self.hessian(pts))
        c = float(eig.min())
        r2 = np.sum(offs**2, axis=-1)
        mask = r2 > 1e-14 * radius**2
        mu = float(np.max(2.0 * self.value(pts[mask]) / r2[mask]))
        return c, mu

    def __repr__(self):
        return (f"{type(self).__name__}(r={self.well_radius:g}, c={self.convexity:.6g}, "
                f"mu_w={self.upper:.6g})")


class AllenCahn(Potential):
    name = "allen_cahn"
    dim = 1

    def __init__(self, well_radius=None):
        super().__init__([-1.0], [1.0], well_radius)

    def _value(self, u):
        return 0.25 * (u[..., 0] ** 2 - 1.0) ** 2

    def _gradient(self, u):
        return u**3 - u

    def _hessian(self, u):
        return (3.0 * u**2 - 1.0)[..., None]


class GinzburgLandau(Potential):
    """F(u) = (|u|^2 - 1)^2 / 4 on the plane.  Vanishes on the unit circle,
    so it is *not* an admissible double well; it is the building block of
    :class:`WEps`."""

    name = "ginzburg_landau"
    dim = 2

    def __init__(self, well_radius=None):
        super().__init__([-1.0, 0.0], [1.0, 0.0], well_radius)

    def _value(self, u):
        return 0.25 * (np.sum(u**2, axis=-1) - 1.0) ** 2

    def _gradient(self, u):
        return (np.sum(u**2, axis=-1) - 1.0)[..., None] * u

    def _hessian(self, u):
        r2 = np.sum(u**2, axis=-1)
        eye = np.eye(2)
        return (r2 - 1.0)[..., None, None] * eye + 2.0 * u[..., :, None] * u[..., None, :]


class WEps(GinzburgLandau):
    """W_eps(u) = F(u) + u_2^2 phi(tau(u)).

    ``argument="square"`` composes the switch with tau = |u|^2, as the
    potential is written; ``argument="modulus"`` uses tau = |u|.
    """

    name = "w_eps"

    def __init__(self, eps, argument="square", well_radius=None):
        self.spec = MollifierSpec(eps)
        if argument not in ("square", "modulus"):
            raise InvalidParameterError(f"unknown mollifier argument {argument!r}")
        self.argument = argument
        super().__init__(well_radius)

    @property
    def eps(self):
        return self.spec.eps

    @property
    def params(self):
        return {**super().params, "eps": self.eps, "argument": self.argument}

    def _tau(self, u):
        r2 = np.sum(u**2, axis=-1)
        if self.argument == "square":
            return r2, 2.0 * u, 2.0 * np.broadcast_to(np.eye(2), u.shape + (2,))
        r = np.sqrt(np.maximum(r2, 1e-300))
        n = u / r[..., None]
        hess = (np.eye(2) - n[..., :, None] * n[..., None, :]) / r[..., None, None]
        return r, n, hess

    def _value(self, u):
        tau = self._tau(u)[0]
        return super()._value(u) + u[..., 1] ** 2 * mollifier_phi(tau, self.spec)

    def _gradient(self, u):
        tau, dtau, _ = self._tau(u)
        phi, dphi, _ = mollifier_phi(tau, self.spec, derivatives=True)
        u2 = u[..., 1]
        g = super()._gradient(u) + (u2**2 * dphi)[..., None] * dtau
        g[..., 1] += 2.0 * u2 * phi
        return g

    def value_and_gradient(self, u):
        u = np.asarray(u, dtype=float)
        tau, dtau, _ = self._tau(u)
        phi, dphi, _ = mollifier_phi(tau, self.spec, derivatives=True)
        u2 = u[..., 1]
        r2m1 = np.sum(u**2, axis=-1) - 1.0
        val = 0.25 * r2m1**2 + u2**2 * phi
        g = r2m1[..., None] * u + (u2**2 * dphi)[..., None] * dtau
        g[..., 1] += 2.0 * u2 * phi
        return val, g

    def _hessian(self, u):
        tau, dtau, d2tau = self._tau(u)
        phi, dphi, ddphi = mollifier_phi(tau, self.spec, derivatives=True)
        u2 = u[..., 1]
        h = super()._hessian(u)
        h[..., 1, 1] += 2.0 * phi
        cross = (2.0 * u2 * dphi)[..., None] * dtau
        h[..., 1, :] += cross
        h[..., :, 1] += cross
        h += (u2**2 * ddphi)[..., None, None] * dtau[..., :, None] * dtau[..., None, :]
        h += (u2**2 * dphi)[..., None, None] * d2tau
        return h

    def _default_radius(self):
        # The switch annulus can reach into the default ball, where the
        # tangential curvature of F is negative; halve the radius until the
        # sampled Hessian stays above a quarter of its value at the wells.
        target = 0.25 * self.well_hessian_min()
        r = DEFAULT_WELL_RADIUS
        while r > 1e-4:
            pts, _ = self.ball_samples(r, 2_500)
            if np.linalg.eigvalsh(self.hessian(pts)).min() >= target:
                return r
            r *= 0.5
        raise InvalidParameterError(f"no convex well ball found for eps={self.eps}")


def allen_cahn():
    return AllenCahn()


def ginzburg_landau():
    return GinzburgLandau()


def w_eps(eps, beta_hint=None, argument="square"):
    """The separated-family potential.  ``beta_hint`` is accepted for
    interface symmetry; the potential itself does not depend on beta."""
    return WEps(eps, argument=argument)


def by_name(name, eps=None, argument="square"):
    if name == "allen_cahn":
        return allen_cahn()
    if name == "ginzburg_landau":
        return ginzburg_landau()
    if name == "w_eps":
        if eps is None:
            raise InvalidParameterError("w_eps requires eps")
        return w_eps(eps, argument=argument)
    raise InvalidParameterError(f"unknown potential {name!r}")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    potential: str
    zeros_in_wells: bool
    stray_zeros: int
    hessian_min: float
    convexity: float
    boundary_min: float
    values_nonnegative: bool

    @property
    def admissible(self):
        return (self.zeros_in_wells and self.hessian_min > 0.0
                and self.boundary_min > 0.0 and self.values_nonnegative)

    def as_dict(self):
        d = dict(self.__dict__)
        d["admissible"] = self.admissible
        return d


def verify_double_well(pot, box_half_width=3.0, samples_per_dim=1024):
    """Sample ``pot`` on a box and check the double-well hypotheses.

    A sample counts as a near-zero when ``W <= 0.01 * spacing**2``: a
    sample that close to zero lies within a small fraction of the spacing of
    a nondegenerate zero.  Near-zeros farther than ``max(r, spacing)`` from
    both wells are reported as stray.
    """
    if samples_per_dim < 16:
        raise InvalidParameterError("samples_per_dim must be >= 16")
    axis = np.linspace(-box_half_width, box_half_width, samples_per_dim)
    spacing = axis[1] - axis[0]
    if pot.dim == 1:
        pts = axis[:, None]
        boundary = np.array([[-box_half_width], [box_half_width]])
    elif pot.dim == 2:
        pts = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        edge = np.stack([axis, np.full_like(axis, box_half_width)], axis=-1)
        boundary = np.concatenate([edge, -edge, edge[:, ::-1], -edge[:, ::-1]])
    else:
        raise NotImplementedError("verification implemented for m <= 2")
    w = pot.value(pts)
    near = pts[w <= 0.01 * spacing**2]
    r = max(pot.well_radius, spacing)
    d_minus = np.linalg.norm(near - pot.a_minus, axis=-1)
    d_plus = np.linalg.norm(near - pot.a_plus, axis=-1)
    stray = int(np.count_nonzero((d_minus > r) & (d_plus > r)))
    ball, _ = pot.ball_samples(pot.well_radius)
    hmin = float(np.linalg.eigvalsh(pot.hessian(ball)).min())
    return VerificationReport(
        potential=pot.name,
        zeros_in_wells=stray == 0,
        stray_zeros=stray,
        hessian_min=hmin,
        convexity=pot.convexity,
        boundary_min=float(pot.value(boundary).min()),
        values_nonnegative=bool(w.min() >= 0.0),
    )


def check_gradient(pot, u, h=1e-5):
    """Max over components of |analytic - central difference| / (1 + |analytic|)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    g = pot.gradient(u)
    err = 0.0
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        fd = (pot.value(u + e) - pot.value(u - e)) / (2.0 * h)
        err = max(err, abs(g[i] - fd) / (1.0 + abs(g[i])))
    return float(err)
