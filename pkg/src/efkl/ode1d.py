"""Minimal heteroclinics of the fourth-order ODE u'''' - beta u'' + grad W(u) = 0.

The action J(u) = int 1/2|u''|^2 + beta/2|u'|^2 + W(u) is discretised on a
uniform grid of [-L, L] with the values clamped to the wells at both ends and
mirror ghosts enforcing u' = 0 there (see :mod:`efkl.stencils`).  The discrete
action is minimized by preconditioned L-BFGS.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, sparse
from scipy.sparse import linalg as splinalg

from . import stencils as st
from .config import RunConfig
from .errors import DomainTooShortError, InvalidParameterError, SolverFailure
from .optim import minimize_lbfgs

log = logging.getLogger(__name__)

DECAY_WINDOW = (1e-8, 1e-2)
MIN_DOMAIN_RATE = 8.0


@dataclass(frozen=True)
class Grid1D:
    half_length: float
    n: int

    def __post_init__(self):
        if not self.half_length > 0.0:
            raise InvalidParameterError("half_length must be positive")
        if self.n < 101 or self.n % 2 == 0:
            raise InvalidParameterError(f"n must be an odd integer >= 101, got {self.n}")

    @property
    def h(self):
        return 2.0 * self.half_length / (self.n - 1)

    @property
    def x(self):
        return np.linspace(-self.half_length, self.half_length, self.n)

    @property
    def weights(self):
        return st.trapezoid_weights(self.n, self.h)

    def __eq__(self, other):
        return (isinstance(other, Grid1D) and self.n == other.n
                and np.isclose(self.half_length, other.half_length, rtol=1e-14, atol=0.0))

    def __hash__(self):
        return hash((self.n, round(self.half_length, 12)))


@dataclass
class Profile1D:
    """Samples ``values[i] = u(x_i)`` of shape ``(n, m)``.

    ``clamped=False`` is a test mode that skips the well boundary check.
    """

    grid: Grid1D
    values: np.ndarray
    potential: object
    beta: float
    clamped: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape != (self.grid.n, self.potential.dim):
            raise InvalidParameterError(
                f"values shape {v.shape} does not match grid/potential "
                f"({self.grid.n}, {self.potential.dim})")
        self.values = v
        if self.clamped:
            a_minus, a_plus = self.potential.wells
            if not (np.allclose(v[0], a_minus, atol=1e-12) and np.allclose(v[-1], a_plus, atol=1e-12)):
                raise InvalidParameterError("profile is not clamped to the wells")

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def x(self):
        return self.grid.x

    def with_values(self, values, clamped=None):
        return Profile1D(self.grid, values, self.potential, self.beta,
                         self.clamped if clamped is None else clamped)


class DiscreteAction:
    """Discrete action on a fixed grid, with its exact gradient."""

    def __init__(self, potential, beta, grid):
        self.potential = potential
        self.beta = float(beta)
        self.grid = grid
        self.h = grid.h
        self.w = grid.weights

    def densities(self, u):
        """Nodal density 1/2|u''|^2 + W(u) and cell density beta/2|u'|^2."""
        u2 = st.d2(u, self.h)
        u1 = st.d1(u, self.h)
        nodal = 0.5 * np.sum(u2**2, axis=-1) + self.potential.value(u)
        cell = 0.5 * self.beta * np.sum(u1**2, axis=-1)
        return nodal, cell

    def value(self, u):
        nodal, cell = self.densities(u)
        return float(self.w @ nodal + self.h * cell.sum())

    def segment(self, u, i, j):
        """Discrete action restricted to nodes ``i..j`` (inclusive)."""
        if j <= i:
            return 0.0
        nodal, cell = self.densities(u)
        w = np.full(j - i + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return float(w @ nodal[i:j + 1] + self.h * cell[i:j].sum())

    def value_and_gradient(self, u):
        h = self.h
        u2 = st.d2(u, h)
        u1 = st.d1(u, h)
        wv, wg = self.potential.value_and_gradient(u)
        f = (self.w @ (0.5 * np.sum(u2**2, axis=-1) + wv)
             + 0.5 * self.beta * h * np.sum(u1**2))
        g = (st.d2_adjoint(self.w[:, None] * u2, h)
             + self.beta * h * st.d1_adjoint(u1, h)
             + self.w[:, None] * wg)
        g[0] = 0.0
        g[-1] = 0.0
        return float(f), g

    def gradient(self, u):
        return self.value_and_gradient(u)[1]

    def quadratic_matrix(self, shift):
        """Sparse Hessian of the quadratic part plus ``shift`` times the mass,
        restricted to the free (interior) nodes."""
        n, h = self.grid.n, self.h
        main = np.full(n, -2.0)
        upper = np.ones(n - 1)
        lower = np.ones(n - 1)
        upper[0] = 2.0
        lower[-1] = 2.0
        a2 = sparse.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2
        a1 = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
        k = (a2.T @ sparse.diags(self.w) @ a2 + self.beta * h * (a1.T @ a1)
             + shift * sparse.diags(self.w))
        return k.tocsc()[1:-1, 1:-1]


def action_1d(p):
    return DiscreteAction(p.potential, p.beta, p.grid).value(p.values)


def action_gradient_1d(p):
    """Exact gradient of the discrete action, zero at the clamped nodes."""
    return DiscreteAction(p.potential, p.beta, p.grid).gradient(p.values)


def build_e0(pot, grid):
    """Cubic interpolant between the wells on [-1, 1], constant outside."""
    if grid.half_length < 1.0:
        raise InvalidParameterError("build_e0 needs L >= 1")
    x = np.clip(grid.x, -1.0, 1.0)[:, None]
    a_minus, a_plus = pot.wells
    vals = 0.5 * (a_plus + a_minus) + (a_plus - a_minus) * (3.0 * x - x**3) / 4.0
    return vals


def e0_profile(pot, beta, grid):
    return Profile1D(grid, build_e0(pot, grid), pot, beta)


def shift_nodes(values, k, a_minus, a_plus):
    """``out[i] = values[i - k]``, padding with the wells."""
    n = len(values)
    out = np.empty_like(values)
    if k >= 0:
        out[:k] = a_minus
        out[k:] = values[:n - k]
    else:
        out[n + k:] = a_plus
        out[:n + k] = values[-k:]
    # re-impose the clamp; the displaced end values are tail residue
    out[0], out[-1] = a_minus, a_plus
    return out


def translation_scan(values, reference, grid, a_minus, a_plus, max_shift=None):
    """Squared L2 distances ``D[k] = ||p(. + k h) - ref||^2`` for
    ``k = -K..K``, with both profiles extended by their wells.

    The part of ``p`` pushed out of the window is compared with the extension
    of ``reference`` (so well tails cost nothing when the wells agree).
    """
    n = grid.n
    K = (n - 1) // 2 if max_shift is None else int(max_shift)
    h = grid.h
    pad_l = np.repeat(a_minus[None, :], K, axis=0)
    pad_r = np.repeat(a_plus[None, :], K, axis=0)
    p_ext = np.concatenate([pad_l, values, pad_r])
    # entry j of a "valid" correlation pairs p_ext[i + j] with reference[i],
    # i.e. shift k = j - K
    w = grid.weights
    sq_p = np.sum(p_ext**2, axis=1)
    cross = sum(signal.correlate(p_ext[:, c], w * reference[:, c], mode="valid")
                for c in range(values.shape[1]))
    d_win = (signal.correlate(sq_p, w, mode="valid") - 2.0 * cross
             + w @ np.sum(reference**2, axis=1))
    # nodes of p pushed out of the window face the well extension of reference
    dev_l = np.sum((values - a_minus) ** 2, axis=1) * h
    dev_r = np.sum((values - a_plus) ** 2, axis=1) * h
    cum_l = np.concatenate([[0.0], np.cumsum(dev_l)])
    cum_r = np.concatenate([[0.0], np.cumsum(dev_r[::-1])])
    ks = np.arange(-K, K + 1)
    extra = np.where(ks > 0, cum_l[np.clip(ks, 0, n)], cum_r[np.clip(-ks, 0, n)])
    return ks, np.maximum(d_win + extra, 0.0)


def _parabolic_offset(d, i):
    if i == 0 or i == len(d) - 1:
        return 0.0
    den = d[i - 1] - 2.0 * d[i] + d[i + 1]
    if den <= 0.0:
        return 0.0
    return float(np.clip(0.5 * (d[i - 1] - d[i + 1]) / den, -0.5, 0.5))


def normalize_translation(p, reference=None):
    """Return ``(p_canonical, T)`` with ``p(x) ~ reference(x - T)``.

    The canonical translate is shifted by a whole number of nodes; ``T``
    carries the sub-node parabolic refinement of the distance minimum.
    """
    ref = build_e0(p.potential, p.grid) if reference is None else reference.values
    a_minus, a_plus = p.potential.wells
    ks, d = translation_scan(p.values, ref, p.grid, a_minus, a_plus)
    i = int(np.argmin(d))
    k = int(ks[i])
    T = (k + _parabolic_offset(d, i)) * p.grid.h
    return p.with_values(shift_nodes(p.values, -k, a_minus, a_plus)), T


def residual_ode(p):
    """sup over nodes 2..n-3 of |u'''' - beta u'' + grad W(u)|."""
    if p.grid.n < 9:
        raise InvalidParameterError("residual needs at least 9 nodes")
    u, h = p.values, p.grid.h
    r = (st.fourth_difference(u, h) - p.beta * st.second_difference(u, h)
         + p.potential.gradient(u))
    return float(np.max(np.linalg.norm(r[2:-2], axis=1)))


def linearized_rate(pot, beta):
    """Smallest positive real part of the roots of mu^4 - beta mu^2 + lam,
    lam the smallest Hessian eigenvalue at the wells.

    Returns ``(k_lin, oscillatory)``.
    """
    lam = pot.well_hessian_min()
    disc = beta * beta - 4.0 * lam
    if disc >= 0.0:
        mu2 = 0.5 * (beta - np.sqrt(disc))
        return float(np.sqrt(mu2)), False
    mu = np.sqrt(complex(0.5 * beta, 0.5 * np.sqrt(-disc)))
    return float(abs(mu.real)), True


def _fit_tail(x, amp):
    sel = (amp >= DECAY_WINDOW[0]) & (amp <= DECAY_WINDOW[1])
    if np.count_nonzero(sel) < 5:
        raise DomainTooShortError("decay window [1e-8, 1e-2] not resolved on this domain")
    xs, ys = x[sel], np.log(amp[sel])
    slope, icpt = np.polyfit(xs, ys, 1)
    rms = float(np.sqrt(np.mean((ys - (slope * xs + icpt)) ** 2)))
    return abs(slope), float(np.exp(icpt)), rms


def fit_decay_rate(p):
    """Least-squares exponential fit of both tails; returns the ``(k, K)`` of
    the tail with the larger fit residual."""
    x = p.x
    a_minus, a_plus = p.potential.wells
    right = x >= 0.0
    left = x <= 0.0
    k_r, K_r, rms_r = _fit_tail(x[right], np.linalg.norm(p.values[right] - a_plus, axis=1))
    k_l, K_l, rms_l = _fit_tail(-x[left], np.linalg.norm(p.values[left] - a_minus, axis=1))
    return (k_r, K_r) if rms_r >= rms_l else (k_l, K_l)


def transition_cost_bound(pot, beta):
    """sqrt(beta c) (r/2)^2: least action to leave a well ball of radius r."""
    return float(np.sqrt(beta * pot.convexity) * (0.5 * pot.well_radius) ** 2)


def transition_segments(p, eps0=None):
    """Actions of the tail segments along which |u - a| runs from <= eps0 to >= r.

    One entry per well that the profile actually leaves; empty when the
    profile never reaches distance r from either well.
    """
    pot = p.potential
    r = pot.well_radius
    eps0 = 0.25 * r if eps0 is None else eps0
    act = DiscreteAction(pot, p.beta, p.grid)
    out = []
    a_minus, a_plus = pot.wells
    for well, order in ((a_plus, np.arange(p.grid.n)[::-1]), (a_minus, np.arange(p.grid.n))):
        dist = np.linalg.norm(p.values[order] - well, axis=1)
        far = np.nonzero(dist >= r)[0]
        if far.size == 0:
            continue
        j = far[0]
        near = np.nonzero(dist[:j] <= eps0)[0]
        if near.size == 0:
            continue
        lo, hi = sorted((order[near[-1]], order[j]))
        out.append(act.segment(p.values, lo, hi))
    return out


@dataclass
class MinimalHeteroclinic:
    profile: Profile1D
    action: float
    residual: float
    decay: tuple
    k_lin: float
    canonical_shift: float
    converged: bool
    iterations: int
    grad_inf: float
    history: list = field(default_factory=list)
    domain_too_short: bool = False
    oscillatory_tails: bool = False


def _preconditioner(act):
    shift = max(act.potential.well_hessian_min(), 1e-3)
    lu = splinalg.splu(act.quadratic_matrix(shift))

    def apply(r):
        return lu.solve(r.reshape(-1, act.potential.dim)).ravel()

    return apply


def _descend(act, u0, cfg, tol_g=None):
    pot = act.potential
    u = np.array(u0, dtype=float, copy=True)
    u[0], u[-1] = pot.wells
    m = pot.dim

    def fun(x):
        u[1:-1] = x.reshape(-1, m)
        f, g = act.value_and_gradient(u)
        return f, g[1:-1].ravel()

    res = minimize_lbfgs(fun, u[1:-1].ravel(), precond=_preconditioner(act),
                         memory=cfg.memory, tol_g=tol_g, tol_g_rel=cfg.tol_g,
                         tol_e=cfg.tol_e, max_iters=cfg.max_iters)
    u[1:-1] = res.x.reshape(-1, m)
    prof = Profile1D(act.grid, u, pot, act.beta)
    if not res.converged:
        raise SolverFailure(f"heteroclinic solver stopped: {res.message} "
                            f"(|g|={res.grad_inf:.3e}, tol={res.tol_g:.3e})", last=prof)
    return prof, res


def minimize_heteroclinic(pot, beta, init, cfg=None, canonical=True):
    """Minimize the discrete action starting from the clamped profile ``init``.

    With ``canonical`` the result is moved by whole nodes towards the
    translate closest to e0 and then re-polished, since the shift displaces
    the clamped ends by the (tiny) tail residue.
    """
    cfg = cfg or RunConfig(beta=beta)
    grid = init.grid
    act = DiscreteAction(pot, beta, grid)
    prof, res = _descend(act, init.values, cfg)
    nit, history = res.nit, list(res.history)
    shift = 0.0
    if canonical:
        shifted, shift = normalize_translation(prof)
        if not np.array_equal(shifted.values, prof.values):
            prof, res = _descend(act, shifted.values, cfg, tol_g=res.tol_g)
            nit += res.nit
            history += res.history
    k_lin, osc = linearized_rate(pot, beta)
    short = k_lin * grid.half_length < MIN_DOMAIN_RATE
    try:
        decay = fit_decay_rate(prof)
    except DomainTooShortError:
        decay = (float("nan"), float("nan"))
        short = True
    if short:
        warnings.warn(f"domain L={grid.half_length} may not resolve tails (k_lin={k_lin:.3f})",
                      RuntimeWarning, stacklevel=2)
    log.info("heteroclinic: J=%.12g it=%d |g|=%.2e", res.fun, nit, res.grad_inf)
    return MinimalHeteroclinic(
        profile=prof, action=act.value(prof.values), residual=residual_ode(prof),
        decay=decay, k_lin=k_lin, canonical_shift=shift, converged=True,
        iterations=nit, grad_inf=res.grad_inf, history=history,
        domain_too_short=short, oscillatory_tails=osc)


# -- class-B junctions and the tail comparison map ---------------------------

def default_eps0(pot):
    return 0.25 * pot.well_radius


def class_b_window(p, eps0=None):
    """Node indices (i-, i+) bounding the core: every node left of i- has
    |u - a-| <= eps0/16 and |u'| <= eps0/8, likewise right of i+."""
    eps0 = default_eps0(p.potential) if eps0 is None else eps0
    a_minus, a_plus = p.potential.wells
    du = np.linalg.norm(st.central_first(p.values, p.grid.h), axis=1)
    ok_l = (np.linalg.norm(p.values - a_minus, axis=1) <= eps0 / 16) & (du <= eps0 / 8)
    ok_r = (np.linalg.norm(p.values - a_plus, axis=1) <= eps0 / 16) & (du <= eps0 / 8)
    bad_l = np.nonzero(~ok_l)[0]
    bad_r = np.nonzero(~ok_r)[0]
    if bad_l.size == 0 or bad_r.size == 0 or bad_l[0] == 0 or bad_r[-1] == p.grid.n - 1:
        raise DomainTooShortError("profile never settles into the class-B tails")
    return int(bad_l[0] - 1), int(bad_r[-1] + 1)


def core_action_bound(pot, beta, eps0):
    """2 (4 + beta + mu_w) eps0^2: the most the two tails can carry."""
    return 2.0 * (4.0 + beta + pot.upper) * eps0**2


def core_action(p, eps0=None):
    """(J over [lambda-, lambda+], J - 2 (4 + beta + mu_w) eps0^2)."""
    eps0 = default_eps0(p.potential) if eps0 is None else eps0
    i, j = class_b_window(p, eps0)
    act = DiscreteAction(p.potential, p.beta, p.grid)
    return act.segment(p.values, i, j), act.value(p.values) - core_action_bound(
        p.potential, p.beta, eps0)


@dataclass
class TailExtension:
    x: np.ndarray
    values: np.ndarray
    first: np.ndarray
    second: np.ndarray
    action: float
    bound: float
    eps0: float
    well: np.ndarray

    @property
    def bullets(self):
        dev = np.linalg.norm(self.values - self.well, axis=-1).max()
        return {
            "value": bool(dev <= self.eps0 / 4 * (1 + 1e-12)),
            "slope": bool(np.linalg.norm(self.first, axis=-1).max() <= self.eps0 * (1 + 1e-12)),
            "curvature": bool(np.linalg.norm(self.second, axis=-1).max()
                              <= 2 * self.eps0 * (1 + 1e-12)),
            "action": bool(self.action <= self.bound),
        }

    @property
    def ok(self):
        return all(self.bullets.values())


def _tail_pieces(v, w, well):
    """Extension in the outward coordinate s in [0, 2] from a junction with
    value ``v`` and outward slope ``w``; returns z(s), z_s, z_ss."""
    phi = v + 0.5 * w

    def z(s):
        s = np.asarray(s, dtype=float)[:, None]
        q = s - 1.0
        near, far = s <= 1.0, s >= 2.0
        zz = np.where(near, v + (s - 0.5 * s**2) * w,
                      np.where(far, well, phi + (2 * q**2 - q**4) * (well - phi)))
        dz = np.where(near, (1.0 - s) * w,
                      np.where(far, 0.0, (4 * q - 4 * q**3) * (well - phi)))
        d2z = np.where(near, -w, np.where(far, 0.0, (4 - 12 * q**2) * (well - phi)))
        return zz, dz, d2z

    return z


def build_tail_extension(v_end, v_prime_end, side, pot, beta, eps0=None, grid=None,
                         junction=0.0, check=True):
    """Two-piece polynomial continuation of a junction state (v, v') into the
    well a^side over two unit intervals, constant beyond.

    On the left side, for lambda - 1 <= x <= lambda,
    z = v + ((x - lambda) + (x - lambda)^2 / 2) v'; then with phi = v - v'/2
    and y = x - lambda + 1, z = phi + (2 y^2 - y^4)(a- - phi) down to
    lambda - 2.  The right side is the mirror image (phi = v + v'/2).
    Values are sampled on ``grid`` nodes in the extension interval when a
    grid is given; the action is integrated exactly by Gauss-Legendre.
    """
    if side not in ("-", "+"):
        raise InvalidParameterError("side must be '-' or '+'")
    eps0 = default_eps0(pot) if eps0 is None else float(eps0)
    well = pot.a_minus if side == "-" else pot.a_plus
    v = np.atleast_1d(np.asarray(v_end, dtype=float))
    dv = np.atleast_1d(np.asarray(v_prime_end, dtype=float))
    if check:
        if not 0.0 < eps0 < 0.5 * pot.well_radius:
            raise InvalidParameterError("eps0 must lie in (0, r/2)")
        if np.linalg.norm(v - well) > eps0 / 8 * (1 + 1e-12):
            raise InvalidParameterError("junction value is farther than eps0/8 from the well")
        if np.linalg.norm(dv) > eps0 / 4 * (1 + 1e-12):
            raise InvalidParameterError("junction slope exceeds eps0/4")
    sign = -1.0 if side == "-" else 1.0
    # outward coordinate s = sign (x - junction); d/dx = sign d/ds
    zfun = _tail_pieces(v, sign * dv, well)
    if grid is not None:
        x = grid.x
        sel = (sign * (x - junction) >= 0.0) & (sign * (x - junction) <= 2.0)
        x = x[sel]
    else:
        x = junction + sign * np.linspace(0.0, 2.0, 801)
    zz, dz, d2z = zfun(sign * (x - junction))
    gx, gw = np.polynomial.legendre.leggauss(24)
    total = 0.0
    for lo in (0.0, 1.0):
        s = lo + 0.5 * (gx + 1.0)
        q, dq, d2q = zfun(s)
        dens = 0.5 * np.sum(d2q**2, axis=1) + 0.5 * beta * np.sum(dq**2, axis=1) + pot.value(q)
        total += 0.5 * gw @ dens
    bound = (4.0 + beta + pot.upper) * eps0**2
    return TailExtension(x, zz, sign * dz, d2z, float(total), float(bound), eps0, well)
