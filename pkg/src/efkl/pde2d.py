"""Double-layer solutions of a2 u_tttt + ... + grad W(u) = 0 on a rectangle.

The energy

    E(u) = sum 1/2 a11 |u_tt|^2 + 1/2 a12 |u_tx|^2 + 1/2 a22 |u_xx|^2
               + 1/2 b1 |u_t|^2 + 1/2 b2 |u_x|^2 + W(u)

is discretised like the 1D action, axis by axis: nodal second differences
with mirror ghosts, cell first differences, and a cell-centred mixed
difference.  The full biharmonic operator is (a11, a12, a22) = (1, 2, 1),
the split quartic one (1, 0, 1); both use b1 = b2 = beta.

Rows t = -T and t = T are clamped to e- and e+, columns x = -L and x = L
to the wells.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from . import stencils as st
from .config import RunConfig
from .errors import InvalidParameterError, SolverFailure
from .families import HeteroclinicFamily, family_distance, translation_distance
from .hspace import BOTH, F_MINUS, F_PLUS, TubeSets, tube_membership
from .ode1d import DiscreteAction, Grid1D, Profile1D, minimize_heteroclinic
from .optim import minimize_lbfgs
from .potentials import _smoothstep

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid2D:
    T: float
    L: float
    nt: int
    nx: int

    def __post_init__(self):
        if not (self.T > 0 and self.L > 0):
            raise InvalidParameterError("half lengths must be positive")
        if self.nt < 101 or self.nx < 101:
            raise InvalidParameterError("nt and nx must be >= 101")

    @property
    def ht(self):
        return 2.0 * self.T / (self.nt - 1)

    @property
    def hx(self):
        return 2.0 * self.L / (self.nx - 1)

    @property
    def t(self):
        return np.linspace(-self.T, self.T, self.nt)

    @property
    def x(self):
        return np.linspace(-self.L, self.L, self.nx)

    def x_grid(self):
        return Grid1D(self.L, self.nx)


@dataclass(frozen=True)
class Operator:
    a11: float
    a12: float
    a22: float
    b1: float
    b2: float
    variant: str = "general"

    @classmethod
    def of(cls, variant, beta, coeffs=None):
        if variant == "biharmonic":
            return cls(1.0, 2.0, 1.0, beta, beta, variant)
        if variant == "split-quartic":
            return cls(1.0, 0.0, 1.0, beta, beta, variant)
        if variant == "general":
            if coeffs is None:
                raise InvalidParameterError("general variant needs (a11, a12, a22, b1, b2)")
            return cls(*map(float, coeffs), variant)
        raise InvalidParameterError(f"unknown operator variant {variant!r}")

    @classmethod
    def from_config(cls, cfg, beta):
        return cls.of(cfg.variant, beta, (cfg.a11, cfg.a12, cfg.a22, cfg.b1, cfg.b2))

    def as_tuple(self):
        return (self.a11, self.a12, self.a22, self.b1, self.b2)


@dataclass
class Field2D:
    """Values u(t_i, x_j) of shape (nt, nx, m).

    ``clamped=False`` (test mode) skips the boundary checks.
    """

    grid: Grid2D
    values: np.ndarray
    potential: object
    beta: float
    op: Operator = None
    clamped: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[..., None]
        if v.shape != (self.grid.nt, self.grid.nx, self.potential.dim):
            raise InvalidParameterError(f"field shape {v.shape} does not match the grid")
        self.values = v
        if self.op is None:
            self.op = Operator.of("biharmonic", self.beta)
        if self.clamped:
            a_minus, a_plus = self.potential.wells
            if not (np.allclose(v[:, 0], a_minus, atol=1e-12)
                    and np.allclose(v[:, -1], a_plus, atol=1e-12)):
                raise InvalidParameterError("field is not clamped to the wells at x = -L, L")

    @property
    def variant(self):
        return self.op.variant

    def with_values(self, values, clamped=None):
        return Field2D(self.grid, values, self.potential, self.beta, self.op,
                       self.clamped if clamped is None else clamped)

    def slice_profile(self, i):
        return Profile1D(self.grid.x_grid(), self.values[i], self.potential, self.beta,
                         clamped=self.clamped)


class Energy2D:
    def __init__(self, grid, potential, op):
        self.grid = grid
        self.potential = potential
        self.op = op
        self.wt = st.trapezoid_weights(grid.nt, grid.ht)
        self.wx = st.trapezoid_weights(grid.nx, grid.hx)
        self.w = np.outer(self.wt, self.wx)

    def densities(self, u):
        """Nodal, t-cell, x-cell and mixed-cell energy densities."""
        g, op = self.grid, self.op
        utt = st.d2(u, g.ht, axis=0)
        uxx = st.d2(u, g.hx, axis=1)
        ut = st.d1(u, g.ht, axis=0)
        ux = st.d1(u, g.hx, axis=1)
        utx = st.d1(ut, g.hx, axis=1)
        nodal = (0.5 * op.a11 * np.sum(utt**2, axis=-1) + 0.5 * op.a22 * np.sum(uxx**2, axis=-1)
                 + self.potential.value(u))
        return (nodal, 0.5 * op.b1 * np.sum(ut**2, axis=-1),
                0.5 * op.b2 * np.sum(ux**2, axis=-1), 0.5 * op.a12 * np.sum(utx**2, axis=-1))

    def value(self, u):
        g = self.grid
        nodal, ct, cx, cm = self.densities(u)
        return float(np.sum(self.w * nodal) + g.ht * np.sum(ct * self.wx)
                     + g.hx * np.sum(cx * self.wt[:, None]) + g.ht * g.hx * np.sum(cm))

    def value_and_gradient(self, u):
        g, op = self.grid, self.op
        ht, hx = g.ht, g.hx
        w = self.w[..., None]
        utt = st.d2(u, ht, axis=0)
        uxx = st.d2(u, hx, axis=1)
        ut = st.d1(u, ht, axis=0)
        ux = st.d1(u, hx, axis=1)
        wx = self.wx[None, :, None]
        wt = self.wt[:, None, None]
        wv, wg = self.potential.value_and_gradient(u)
        f = (0.5 * op.a11 * np.sum(w * utt**2) + 0.5 * op.a22 * np.sum(w * uxx**2)
             + np.sum(self.w * wv)
             + 0.5 * op.b1 * ht * np.sum(wx * ut**2) + 0.5 * op.b2 * hx * np.sum(wt * ux**2))
        grad = w * wg
        if op.a11:
            grad += op.a11 * st.d2_adjoint(w * utt, ht, axis=0)
        if op.a22:
            grad += op.a22 * st.d2_adjoint(w * uxx, hx, axis=1)
        if op.b1:
            grad += op.b1 * ht * st.d1_adjoint(wx * ut, ht, axis=0)
        if op.b2:
            grad += op.b2 * hx * st.d1_adjoint(wt * ux, hx, axis=1)
        if op.a12:
            utx = st.d1(ut, hx, axis=1)
            f += 0.5 * op.a12 * ht * hx * np.sum(utx**2)
            grad += op.a12 * ht * hx * st.d1_adjoint(st.d1_adjoint(utx, hx, axis=1), ht, axis=0)
        grad[0] = grad[-1] = 0.0
        grad[:, 0] = grad[:, -1] = 0.0
        return float(f), grad


def _energy(f, pot=None, beta=None):
    op = f.op
    if beta is not None and op.variant != "general":
        op = Operator.of(op.variant, beta)
    return Energy2D(f.grid, pot or f.potential, op)


def energy_2d(f, pot=None, beta=None):
    return _energy(f, pot, beta).value(f.values)


def energy_gradient_2d(f, pot=None, beta=None):
    """Exact gradient of :func:`energy_2d`, zero on the clamped edges."""
    return _energy(f, pot, beta).value_and_gradient(f.values)[1]


def residual_pde(f, margin=2):
    """sup over nodes at least ``margin`` from the edges of the pointwise residual
    a11 u_tttt + a12 u_ttxx + a22 u_xxxx - b1 u_tt - b2 u_xx + grad W(u)."""
    g, op = f.grid, f.op
    if margin < 2 or 2 * margin >= min(g.nt, g.nx):
        raise InvalidParameterError("margin must be >= 2 and leave interior nodes")
    u = f.values
    r = f.potential.gradient(u)
    if op.a11:
        r = r + op.a11 * st.fourth_difference(u, g.ht, axis=0)
    if op.a22:
        r = r + op.a22 * st.fourth_difference(u, g.hx, axis=1)
    if op.a12:
        r = r + op.a12 * st.second_difference(st.second_difference(u, g.ht, axis=0), g.hx, axis=1)
    r = r - op.b1 * st.second_difference(u, g.ht, axis=0) - op.b2 * st.second_difference(u, g.hx, axis=1)
    inner = r[margin:-margin, margin:-margin]
    return float(np.max(np.linalg.norm(inner, axis=-1)))


def residual_scale(f):
    """max(1, largest potential-gradient magnitude), the natural size of the
    residual terms for a field of unit amplitude."""
    return float(max(1.0, np.max(np.linalg.norm(f.potential.gradient(f.values), axis=-1))))


def build_V0(e_minus, e_plus, grid, op=None):
    """Cubic blend in t: e- for t <= -1, e+ for t >= 1."""
    for e in (e_minus, e_plus):
        if e.grid != grid.x_grid():
            raise InvalidParameterError("boundary profiles are not on the x grid")
    if grid.T < 1.0:
        raise InvalidParameterError("build_V0 needs T >= 1")
    t = np.clip(grid.t, -1.0, 1.0)[:, None, None]
    em, ep = e_minus.values[None], e_plus.values[None]
    v = 0.5 * (ep + em) + (ep - em) * (3 * t - t**3) / 4.0
    return Field2D(grid, v, e_minus.potential, e_minus.beta,
                   op or Operator.of("biharmonic", e_minus.beta))


def dst_preconditioner(grid, op, shift, m):
    """Diagonal inverse of the constant-coefficient energy in the DST-I basis
    of the interior nodes."""
    nt, nx = grid.nt - 2, grid.nx - 2
    lt = (4.0 / grid.ht**2) * np.sin(np.pi * np.arange(1, nt + 1) / (2 * (nt + 1))) ** 2
    lx = (4.0 / grid.hx**2) * np.sin(np.pi * np.arange(1, nx + 1) / (2 * (nx + 1))) ** 2
    LT, LX = np.meshgrid(lt, lx, indexing="ij")
    symbol = grid.ht * grid.hx * (op.a11 * LT**2 + op.a12 * LT * LX + op.a22 * LX**2
                                  + op.b1 * LT + op.b2 * LX + shift)
    inv = (1.0 / symbol)[..., None]

    def apply(r):
        r = r.reshape(nt, nx, m)
        return fft.dstn(fft.dstn(r, type=1, axes=(0, 1), norm="ortho") * inv,
                        type=1, axes=(0, 1), norm="ortho").ravel()

    return apply


@dataclass
class DoubleLayer:
    field: Field2D
    energy: float
    residual: float
    iterations: int
    grad_inf: float
    tol_g: float
    history: list = field(default_factory=list)


def minimize_double_layer(pot, beta, e_minus, e_plus, grid, cfg=None, init=None, op=None):
    """Minimize the discrete energy with t-clamps e-/e+ and x-clamps a-/a+,
    starting from ``init`` (default: the cubic blend of e- and e+)."""
    cfg = cfg or RunConfig(beta=beta)
    op = op or Operator.from_config(cfg, beta)
    start = init if init is not None else build_V0(e_minus, e_plus, grid, op)
    u = start.values.copy()
    u[0], u[-1] = e_minus.values, e_plus.values
    u[:, 0], u[:, -1] = pot.wells
    en = Energy2D(grid, pot, op)
    m = pot.dim
    shape = (grid.nt - 2, grid.nx - 2, m)

    def fun(z):
        u[1:-1, 1:-1] = z.reshape(shape)
        f, g = en.value_and_gradient(u)
        return f, g[1:-1, 1:-1].ravel()

    pre = dst_preconditioner(grid, op, max(pot.well_hessian_min(), 1e-3), m)
    res = minimize_lbfgs(fun, u[1:-1, 1:-1].ravel(), precond=pre, memory=cfg.memory,
                         tol_g_rel=cfg.tol_g, tol_e=cfg.tol_e, max_iters=cfg.max_iters)
    u[1:-1, 1:-1] = res.x.reshape(shape)
    fld = Field2D(grid, u.copy(), pot, beta, op)
    if not res.converged:
        raise SolverFailure(f"double-layer solver stopped: {res.message} "
                            f"(|g|={res.grad_inf:.3e}, tol={res.tol_g:.3e})", last=fld)
    log.info("double layer: E=%.12g it=%d |g|=%.2e", res.fun, res.nit, res.grad_inf)
    return DoubleLayer(fld, en.value(u), residual_pde(fld), res.nit, res.grad_inf,
                       res.tol_g, res.history)


# -- a posteriori checks -----------------------------------------------------

def _slice_action(f, j_min):
    """Per-slice pieces of the orbit action: (1/2|u_tt|^2, beta/2|u_t|^2,
    sigma(u_t), W(u(t))) with nodal central t-differences."""
    g, op = f.grid, f.op
    if op.a22 != 1.0 or op.b2 != f.beta:
        raise InvalidParameterError("slice action needs a22 = 1 and b2 = beta")
    u = f.values
    wx = st.trapezoid_weights(g.nx, g.hx)
    utt = st.d2(u, g.ht, axis=0)
    ut = st.central_first(u, g.ht, axis=0)
    curv = 0.5 * op.a11 * (np.sum(utt**2, axis=-1) @ wx)
    kin = 0.5 * op.b1 * (np.sum(ut**2, axis=-1) @ wx)
    sig = 0.5 * op.a12 * g.hx * np.sum(st.d1(ut, g.hx, axis=1) ** 2, axis=(1, 2))
    act = DiscreteAction(f.potential, f.beta, g.x_grid())
    excess = np.array([act.value(u[i]) for i in range(g.nt)]) - j_min
    return curv, kin, sig, excess


def action_functional_J(f, j_min):
    """Trapezoidal t-integral of 1/2|u_tt|^2 + beta/2 |u_t|^2 + sigma(u_t) + (J(u(t)) - J_min).

    For the full biharmonic operator sigma carries the mixed term once,
    matching the 2 |u_tx|^2 of |D^2 u|^2 after the 1/2; it drops out for
    the split quartic operator.
    """
    wt = st.trapezoid_weights(f.grid.nt, f.grid.ht)
    curv, kin, sig, excess = _slice_action(f, j_min)
    return float(wt @ (curv + kin + sig + excess))


def splitting_defect(f, j_min):
    """(E, J, relative defect |E - J - 2T J_min| / J)."""
    e = energy_2d(f)
    jj = action_functional_J(f, j_min)
    return e, jj, abs(e - jj - 2.0 * f.grid.T * j_min) / max(abs(jj), 1e-300)


def ut_norms(f):
    g = f.grid
    wx = st.trapezoid_weights(g.nx, g.hx)
    ut = st.central_first(f.values, g.ht, axis=0)
    return np.sqrt(np.sum(ut**2, axis=-1) @ wx)


@dataclass
class SliceTrace:
    t: np.ndarray
    d_minus: np.ndarray
    d_plus: np.ndarray
    ut_norm: np.ndarray
    labels: list
    d_min: float

    @property
    def t_minus(self):
        """Last t whose slice lies in the F- tube."""
        idx = [i for i, lab in enumerate(self.labels) if lab in (F_MINUS, BOTH)]
        return float(self.t[idx[-1]]) if idx else float("nan")

    @property
    def t_plus(self):
        idx = [i for i, lab in enumerate(self.labels) if lab in (F_PLUS, BOTH)]
        return float(self.t[idx[0]]) if idx else float("nan")

    def single_crossing(self):
        """F- slices, then a (possibly empty) run of 'both', then F+ slices."""
        order = {F_MINUS: 0, BOTH: 1, F_PLUS: 2}
        ranks = [order.get(lab, -1) for lab in self.labels]
        if -1 in ranks or ranks[0] != 0 or ranks[-1] != 2:
            return False
        return all(a <= b for a, b in zip(ranks, ranks[1:]))

    def ut_decays(self, frac=0.1, ratio=0.25):
        """||u_t|| peaks inside, falls monotonically towards both ends and is
        below ``ratio`` of its peak at distance ``frac`` of the t-range from
        either end."""
        u = self.ut_norm
        n = len(u)
        k = max(1, int(round(frac * (n - 1))))
        i_peak = int(np.argmax(u))
        if not k < i_peak < n - 1 - k:
            return False
        slack = 1e-9 * u[i_peak]
        falling = (np.all(np.diff(u[:i_peak + 1]) >= -slack)
                   and np.all(np.diff(u[i_peak:]) <= slack))
        return bool(falling and max(u[k], u[n - 1 - k]) <= ratio * u[i_peak])

    def first_decile_in_minus(self):
        n = len(self.t)
        k = max(1, (n - 1) // 10)
        return bool(np.all(self.d_minus[:k + 1] <= self.d_min / 4.0))

    def last_decile_in_plus(self):
        n = len(self.t)
        k = max(1, (n - 1) // 10)
        return bool(np.all(self.d_plus[n - 1 - k:] <= self.d_min / 4.0))

    def tube_exit(self):
        """True when the layer is squeezed against the t-clamps: the slices
        near the ends are not settled inside the tubes."""
        return not (self.ut_decays() and self.first_decile_in_minus()
                    and self.last_decile_in_plus())

    def rows(self):
        return [(float(a), float(b), float(c), float(d))
                for a, b, c, d in zip(self.t, self.d_minus, self.d_plus, self.ut_norm)]


def layer_asymptotics(f, f_minus, f_plus, d_min=None):
    """Per-slice distances to both families, u_t norms and tube labels."""
    d_min = family_distance(f_minus, f_plus) if d_min is None else d_min
    tubes = TubeSets(d_min, f_minus, f_plus)
    dm, dp, labels = [], [], []
    for i in range(f.grid.nt):
        p = f.slice_profile(i)
        dm.append(min(translation_distance(p, q) for q in f_minus.profiles()))
        dp.append(min(translation_distance(p, q) for q in f_plus.profiles()))
        labels.append(tube_membership(p, tubes))
    return SliceTrace(f.grid.t, np.array(dm), np.array(dp), ut_norms(f), labels, d_min)


def uniform_well_convergence(f, frac=0.1):
    """max over slices of |u - a-| on the leftmost and |u - a+| on the rightmost
    ``frac`` of the x-range."""
    x = f.grid.x
    a_minus, a_plus = f.potential.wells
    left = x <= -f.grid.L * (1 - 2 * frac)
    right = x >= f.grid.L * (1 - 2 * frac)
    dl = np.linalg.norm(f.values[:, left] - a_minus, axis=-1)
    dr = np.linalg.norm(f.values[:, right] - a_plus, axis=-1)
    return float(max(dl.max(), dr.max()))


def _bump(tau):
    return _smoothstep(2.0 * (1.0 - np.abs(tau)))[0]


@dataclass
class ProbeReport:
    deficits: np.ndarray
    scale: float

    @property
    def worst(self):
        return float(self.deficits.min()) if self.deficits.size else 0.0

    def passes(self, rel=1e-8):
        return self.worst >= -rel * self.scale


def minimality_probe(f, seed=0, n_trials=200):
    """E(u + phi) - E(u) for seeded smooth bumps phi supported inside the
    rectangle; returns a report whose ``worst`` entry is the minimum."""
    g = f.grid
    en = _energy(f)
    base = en.value(f.values)
    rng = np.random.Generator(np.random.Philox(seed))
    t, x = g.t, g.x
    r_max = min(g.T, g.L) / 4.0
    r_min = min(r_max, 6.0 * max(g.ht, g.hx))
    out = np.empty(n_trials)
    for k in range(n_trials):
        radius = rng.uniform(r_min, r_max)
        tc = rng.uniform(-g.T + radius + 2 * g.ht, g.T - radius - 2 * g.ht)
        xc = rng.uniform(-g.L + radius + 2 * g.hx, g.L - radius - 2 * g.hx)
        amp = 10.0 ** rng.uniform(-3.0, -1.0)
        nu = rng.normal(size=f.potential.dim)
        nu /= np.linalg.norm(nu)
        bt = _bump((t - tc) / radius)
        bx = _bump((x - xc) / radius)
        phi = amp * bt[:, None, None] * bx[None, :, None] * nu
        out[k] = en.value(f.values + phi) - base
    return ProbeReport(out, max(1.0, abs(base)))


def holder_bound_check(f, j0, beta=None, n_slices=50):
    """Worst ratio ||u(t2) - u(t1)|| / (M |t2 - t1|^(1/2)) over slice pairs,
    with M = sqrt(2 J0 / beta)."""
    beta = f.beta if beta is None else beta
    g = f.grid
    m_const = np.sqrt(2.0 * j0 / beta)
    idx = np.unique(np.linspace(0, g.nt - 1, n_slices).round().astype(int))
    wx = st.trapezoid_weights(g.nx, g.hx)
    u = f.values[idx]
    tt = g.t[idx]
    worst = 0.0
    for a in range(len(idx)):
        diff = np.sqrt(np.sum((u[a + 1:] - u[a]) ** 2, axis=-1) @ wx)
        ratio = diff / (m_const * np.sqrt(tt[a + 1:] - tt[a]))
        if ratio.size:
            worst = max(worst, float(ratio.max()))
    return worst


def slab_bound_check(f, j_min):
    """Per slice: (int |u_x|^2, 4 (W(u(t)) + J_min)/beta + 2 ||e0'||^2)."""
    g = f.grid
    act = DiscreteAction(f.potential, f.beta, g.x_grid())
    lhs = g.hx * np.sum(st.d1(f.values, g.hx, axis=1) ** 2, axis=(1, 2))
    excess = np.array([act.value(f.values[i]) for i in range(g.nt)]) - j_min
    a_minus, a_plus = f.potential.wells
    # ||e0'||^2 = int_{-1}^{1} |a+ - a-|^2 (3 - 3x^2)^2 / 16 = 6/5 |a+ - a-|^2 / 2
    e0p = 0.6 * float(np.sum((a_plus - a_minus) ** 2))
    rhs = 4.0 * (excess + j_min) / f.beta + 2.0 * e0p
    return lhs, rhs


def boundary_profiles(members, pot, beta, grid, cfg=None):
    """Resample 1D minimizers onto the x grid of ``grid`` and re-solve there,
    so that the t-clamps are discrete minimizers of the same x-discretisation."""
    xg = grid.x_grid()
    out = []
    for m in members:
        p = getattr(m, "profile", m)
        vals = np.column_stack([np.interp(xg.x, p.x, p.values[:, c],
                                          left=p.values[0, c], right=p.values[-1, c])
                                for c in range(p.m)])
        vals[0], vals[-1] = pot.wells
        init = Profile1D(xg, vals, pot, beta)
        out.append(minimize_heteroclinic(pot, beta, init, cfg, canonical=False))
    return out


def family_on_grid(family, pot, beta, grid, cfg=None):
    return HeteroclinicFamily(family.label,
                              boundary_profiles(family.members, pot, beta, grid, cfg))
