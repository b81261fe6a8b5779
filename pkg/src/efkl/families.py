"""Two families of minimal heteroclinics for W_eps, told apart by winding.

W_eps is even in u2, so reflecting a minimizer through the u1 axis gives
another one.  Members going around the origin clockwise form the "+"
family and counterclockwise ones the "-" family; the certificate records
the L2 gap between them together with the bound 1/sqrt(128 mu).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from . import potentials
from .config import RunConfig
from .errors import (InvalidParameterError, SeparationNotFound, SolverFailure,
                     UnclassifiableError)
from .ode1d import (DiscreteAction, Grid1D, Profile1D, _parabolic_offset, action_1d,
                    minimize_heteroclinic, shift_nodes, translation_scan)

log = logging.getLogger(__name__)

CLOCKWISE = "+"
COUNTERCLOCKWISE = "-"
AUDIT_EPS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)


def _same_grid(p, q):
    if p.grid != q.grid:
        raise InvalidParameterError("profiles live on different grids")
    if p.m != q.m:
        raise InvalidParameterError("profiles have different dimensions")


def l2_distance(p, q):
    """Trapezoidal L2 distance; both profiles equal their wells outside the window."""
    _same_grid(p, q)
    diff = np.sum((p.values - q.values) ** 2, axis=1)
    return float(np.sqrt(p.grid.weights @ diff))


def translation_distance(p, q):
    """inf over translates T of ||p(. + T) - q||, scanned over +-n/2 nodes
    with a parabolic refinement of the squared distance."""
    _same_grid(p, q)
    a_minus, a_plus = p.potential.wells
    _, d = translation_scan(p.values, q.values, p.grid, a_minus, a_plus)
    i = int(np.argmin(d))
    best = d[i]
    off = _parabolic_offset(d, i)
    if off:
        # vertex value of the fitted parabola
        best = d[i] - 0.25 * (d[i - 1] - d[i + 1]) * off
    return float(np.sqrt(max(best, 0.0)))


def reflect(p):
    """(u1, u2) -> (u1, -u2)."""
    if p.m != 2:
        raise InvalidParameterError("reflect needs a planar profile")
    v = p.values.copy()
    v[:, 1] = -v[:, 1]
    return p.with_values(v)


def winding_sign(p):
    """'+' for clockwise passage from a- to a+ around the origin, '-' otherwise.

    With a- = (-1, 0) and a+ = (1, 0), a clockwise path crosses the u2 axis
    with u2 > 0.
    """
    if p.m != 2:
        raise InvalidParameterError("winding needs a planar profile")
    u = p.values
    if np.min(np.linalg.norm(u, axis=1)) < 0.25:
        raise UnclassifiableError("profile passes within 1/4 of the origin")
    u2 = u[np.argmin(np.abs(u[:, 0])), 1]
    if u2 == 0.0:
        u2 = p.grid.weights @ u[:, 1]
    if u2 == 0.0:
        raise UnclassifiableError("no preferred side of the u1 axis")
    return CLOCKWISE if u2 > 0.0 else COUNTERCLOCKWISE


def arc_comparison_map(eps, grid, pot=None, beta=1.0):
    """Explicit finite-action map a- -> a+ through the lower half plane.

    Two cubic caps move along the u1 axis between the wells and the circle
    of radius 1 - eps; in between the map follows that circle with phase
    pi/4 (3 eps x - (eps x)^3) - pi/2.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError("eps must lie in (0, 1)")
    if grid.half_length < 1.0 / eps + 2.0:
        raise InvalidParameterError("the arc map needs L >= 1/eps + 2")
    x = grid.x
    a = 1.0 / eps
    v = np.zeros((grid.n, 2))
    v[:, 0] = np.sign(x)
    left = (x > -a - 2.0) & (x < -a)
    s = x[left] + a + 1.0
    v[left, 0] = -1.0 + eps / 2 + eps / 4 * (3 * s - s**3)
    right = (x > a) & (x < a + 2.0)
    s = x[right] - a - 1.0
    v[right, 0] = 1.0 - eps / 2 + eps / 4 * (3 * s - s**3)
    mid = np.abs(x) <= a
    y = eps * x[mid]
    theta = np.pi / 4 * (3 * y - y**3) - np.pi / 2
    v[mid, 0] = (1 - eps) * np.cos(theta)
    v[mid, 1] = (1 - eps) * np.sin(theta)
    v[0], v[-1] = (-1.0, 0.0), (1.0, 0.0)
    pot = pot or potentials.w_eps(eps)
    return Profile1D(grid, v, pot, beta)


def audit_grid(eps, spacing=None):
    """Grid on [-(1/eps + 3), 1/eps + 3] with spacing at most eps/50."""
    L = 1.0 / eps + 3.0
    h = eps / 50.0 if spacing is None else spacing
    n = int(np.ceil(2 * L / h)) + 1
    return Grid1D(L, n + (n % 2 == 0))


def arc_action_parts(eps, beta, grid=None):
    """(potential part, derivative part) of the discrete action of the arc map."""
    grid = grid or audit_grid(eps)
    if grid.h > eps / 50.0 * (1 + 1e-12):
        raise InvalidParameterError("arc audit needs spacing <= eps/50")
    p = arc_comparison_map(eps, grid, beta=beta)
    act = DiscreteAction(p.potential, beta, grid)
    nodal, cell = act.densities(p.values)
    pot_part = float(grid.weights @ p.potential.value(p.values))
    total = float(grid.weights @ nodal + grid.h * cell.sum())
    return pot_part, total - pot_part


def arc_bound(eps, beta, k1, k2):
    return 2 * eps * (2 - eps) ** 2 + (1 - eps) ** 2 * (beta * k1 * eps + k2 * eps**3)


@dataclass
class ArcAudit:
    eps: tuple
    actions: tuple
    kappa1: float
    kappa2: float
    bounds: tuple

    @property
    def holds(self):
        return all(j <= b for j, b in zip(self.actions, self.bounds))


def arc_action_audit(eps, beta, sweep=AUDIT_EPS):
    """Action of the arc map at ``eps`` plus nonnegative least-squares
    constants in ``J <= 2 eps (2 - eps)^2 + (1 - eps)^2 (beta k1 eps + k2 eps^3)``.

    The derivative part divided by (1 - eps)^2 is fitted by beta k1 eps + k2 eps^3
    across ``sweep`` (which always includes ``eps``).  Returns
    ``(J_v(eps), k1, k2, audit)``.
    """
    sweep = tuple(sorted(set(sweep) | {eps}))
    parts = [arc_action_parts(e, beta) for e in sweep]
    es = np.array(sweep)
    deriv = np.array([d for _, d in parts]) / (1 - es) ** 2
    (k1, k2), _ = nnls(np.column_stack([beta * es, es**3]), deriv)
    actions = tuple(w + d for w, d in parts)
    bounds = tuple(float(arc_bound(e, beta, k1, k2)) for e in sweep)
    audit = ArcAudit(sweep, actions, float(k1), float(k2), bounds)
    return actions[sweep.index(eps)], float(k1), float(k2), audit


def wizz_bound(beta):
    """Least action needed to run from |v| >= sqrt(3)/2 down to |v| <= 1/2."""
    if beta <= 0:
        raise InvalidParameterError("beta must be positive")
    return float(np.sqrt(2 * beta) * (np.sqrt(3) - 1) / 16)


def inner_crossings(p):
    """Actions of the stretches where |u| falls from >= sqrt(3)/2 to <= 1/2
    (or climbs back), one per entry into or exit from the disc of radius 1/2."""
    r = np.linalg.norm(p.values, axis=1)
    act = DiscreteAction(p.potential, p.beta, p.grid)
    out = []
    inside = np.nonzero(r <= 0.5)[0]
    if inside.size == 0:
        return out
    outside = np.nonzero(r >= np.sqrt(3) / 2)[0]
    runs = np.split(inside, np.nonzero(np.diff(inside) > 1)[0] + 1)
    for run in runs:
        before = outside[outside < run[0]]
        after = outside[outside > run[-1]]
        if before.size:
            out.append(act.segment(p.values, before[-1], run[0]))
        if after.size:
            out.append(act.segment(p.values, run[-1], after[0]))
    return out


def mu_of(p):
    """max |u'| * max |u| with u' the cell differences."""
    du = np.linalg.norm(np.diff(p.values, axis=0), axis=1) / p.grid.h
    return float(du.max() * np.linalg.norm(p.values, axis=1).max())


def mu_and_lower_bound(members):
    profiles = [getattr(m, "profile", m) for m in members]
    if not profiles:
        raise InvalidParameterError("no members")
    mu = max(mu_of(p) for p in profiles)
    return mu, float(1.0 / np.sqrt(128.0 * mu))


@dataclass
class HeteroclinicFamily:
    label: str
    members: list = field(default_factory=list)

    @property
    def j_min_estimate(self):
        return min(m.action for m in self.members)

    def profiles(self):
        return [m.profile for m in self.members]

    def __len__(self):
        return len(self.members)


def family_distance(f_minus, f_plus):
    """d(F-, F+): smallest translation-scanned distance over member pairs."""
    if not len(f_minus) or not len(f_plus):
        raise InvalidParameterError("empty family")
    return min(translation_distance(p, q)
               for p in f_minus.profiles() for q in f_plus.profiles())


@dataclass
class SeparationCertificate:
    epsilon: float
    beta: float
    j_min: float
    d_min: float
    mu: float
    lower_bound: float
    arc_action: float
    wizz: float
    min_modulus: float
    crossing_actions: list
    sup_gap: float
    psi_integral: float
    reflection_defect: float

    @property
    def separated(self):
        return self.d_min > 0.0 and self.d_min >= self.lower_bound

    @property
    def psi_consistent(self):
        return self.sup_gap**2 < 0.25 or self.psi_integral >= 1.0 / (128.0 * self.mu)

    @property
    def homotopy_proxy(self):
        return self.sup_gap > 0.5

    @property
    def wizz_consistent(self):
        """Either the action is below the threshold and |u| stays >= 1/2, or
        every stretch through |u| <= 1/2 costs at least the threshold."""
        if self.j_min < self.wizz:
            return self.min_modulus >= 0.5
        return all(a >= self.wizz for a in self.crossing_actions)


def _sup_gap_and_psi(p, q):
    """sup|p - q| and int|p - q|^2 at the translate of q nearest to p."""
    a_minus, a_plus = p.potential.wells
    ks, d = translation_scan(q.values, p.values, p.grid, a_minus, a_plus)
    k = int(ks[np.argmin(d)])
    qs = shift_nodes(q.values, -k, a_minus, a_plus)
    diff = np.sum((p.values - qs) ** 2, axis=1)
    return float(np.sqrt(diff.max())), float(p.grid.weights @ diff)


def _dedupe(members, tol):
    out = []
    for m in members:
        if all(translation_distance(m.profile, o.profile) > tol for o in out):
            out.append(m)
    return out


def _reflected(m):
    prof = reflect(m.profile)
    return type(m)(**{**m.__dict__, "profile": prof,
                      "action": action_1d(prof)})


def find_families(eps, beta, cfg=None):
    """Solve from the lower arc map and its reflection, sort the minimizers by
    winding and close both families under reflection."""
    cfg = cfg or RunConfig(potential="w_eps", eps=eps, beta=beta)
    pot = potentials.w_eps(eps)
    report = potentials.verify_double_well(pot)
    if not report.admissible:
        raise InvalidParameterError(f"W_eps({eps}) failed the double-well check")
    grid = Grid1D(cfg.half_length(), cfg.nodes())
    lower = arc_comparison_map(eps, grid, pot, beta)
    inits = [lower, reflect(lower)]
    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = [pool.submit(minimize_heteroclinic, pot, beta, p, cfg) for p in inits]
        runs = []
        for fut in futures:
            try:
                runs.append(fut.result())
            except SolverFailure as exc:
                log.warning("family run failed: %s", exc)
    fams = {CLOCKWISE: [], COUNTERCLOCKWISE: []}
    for run in runs:
        try:
            label = winding_sign(run.profile)
        except UnclassifiableError as exc:
            log.warning("unclassifiable member: %s", exc)
            continue
        fams[label].append(run)
        other = COUNTERCLOCKWISE if label == CLOCKWISE else CLOCKWISE
        fams[other].append(_reflected(run))
    if not fams[CLOCKWISE] or not fams[COUNTERCLOCKWISE]:
        raise SeparationNotFound("a family stayed empty")
    j_min = min(m.action for ms in fams.values() for m in ms)
    slack = 10.0 * cfg.tol_e * max(1.0, abs(j_min)) + 1e-12
    tol = 1e-6
    for key in fams:
        keep = [m for m in fams[key] if m.action <= j_min + max(slack, 1e-9)]
        fams[key] = _dedupe(keep, tol)
    f_minus = HeteroclinicFamily(COUNTERCLOCKWISE, fams[COUNTERCLOCKWISE])
    f_plus = HeteroclinicFamily(CLOCKWISE, fams[CLOCKWISE])
    if not len(f_minus) or not len(f_plus):
        raise SeparationNotFound("no minimal member left in a family")
    cert = certify(eps, beta, f_minus, f_plus)
    return f_minus, f_plus, cert


def certify(eps, beta, f_minus, f_plus):
    members = f_minus.members + f_plus.members
    mu, lb = mu_and_lower_bound(members)
    d_min = family_distance(f_minus, f_plus)
    gaps = [_sup_gap_and_psi(p, q) for p in f_minus.profiles() for q in f_plus.profiles()]
    worst = min(gaps, key=lambda g: g[0])
    crossings = [a for m in members for a in inner_crossings(m.profile)]
    grid = members[0].profile.grid
    j_v = action_1d(arc_comparison_map(eps, grid, members[0].profile.potential, beta)) \
        if grid.half_length >= 1.0 / eps + 2.0 else float("nan")
    refl = max(abs(action_1d(reflect(m.profile)) - m.action) for m in members)
    return SeparationCertificate(
        epsilon=float(eps), beta=float(beta),
        j_min=min(m.action for m in members), d_min=d_min, mu=mu, lower_bound=lb,
        arc_action=j_v, wizz=wizz_bound(beta),
        min_modulus=float(min(np.linalg.norm(m.profile.values, axis=1).min() for m in members)),
        crossing_actions=crossings, sup_gap=worst[0], psi_integral=worst[1],
        reflection_defect=float(refl))
