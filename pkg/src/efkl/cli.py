"""Command line driver.

    efkl [--config FILE] COMMAND [--key value ...]

Commands: hetero, separation, doublelayer, verify, report.  Every
RunConfig field is accepted as ``--key value`` (dashes or underscores).

Exit codes: 0 all checks passed, 1 a check failed, 2 solver failure,
3 separation not found, 4 double layer pressed against the t-clamps,
64 usage or configuration error, 65 malformed artifact, 66 missing input.
"""

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import families as fam
from . import io
from . import ode1d
from . import pde2d
from . import potentials
from .config import RunConfig, parse_config_text, _coerce
from .errors import (DomainTooShortError, FormatError, InvalidParameterError,
                     SeparationNotFound, SolverFailure)

log = logging.getLogger("efkl")

EXIT_OK, EXIT_CHECK, EXIT_SOLVER, EXIT_SEPARATION, EXIT_TUBE = 0, 1, 2, 3, 4
EXIT_USAGE, EXIT_FORMAT, EXIT_NOINPUT = 64, 65, 66

COMMANDS = ("hetero", "separation", "doublelayer", "verify", "report")
PROBE_REL = 1e-8
SPLIT_REL = 1e-2
HOLDER_MAX = 1.01
TAIL_MAX = 1e-3
DECAY_REL = 0.05

UNITS = {
    "j_min": "action", "action": "action", "residual": "force density",
    "residual_scale": "force density", "k": "1/length", "k_lin": "1/length",
    "K": "displacement", "transition_bound": "action", "transition_min": "action",
    "core_action": "action", "core_lower_bound": "action", "canonical_shift": "length",
    "grad_inf": "action/displacement", "d_min": "displacement*sqrt(length)",
    "mu": "displacement^2/length", "lower_bound": "displacement*sqrt(length)",
    "arc_action": "action", "wizz_bound": "action", "min_modulus": "displacement",
    "sup_gap": "displacement", "psi_integral": "displacement^2*length",
    "reflection_defect": "action", "energy": "energy", "orbit_action": "energy",
    "J0": "energy", "splitting_defect": "1", "probe_min": "energy",
    "probe_scale": "energy", "probe_V0_min": "energy", "holder_ratio": "1",
    "slab_ratio": "1", "tail_sup": "displacement", "t_minus": "time",
    "t_plus": "time", "iterations": "count", "n_members": "count",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="efkl", description="Heteroclinics, separation certificates and "
                "double layers for fourth-order phase-transition problems.")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name in ("verify", "report"):
            sp.add_argument("paths", nargs="*")
        for f in fields(RunConfig):
            sp.add_argument("--" + f.name.replace("_", "-"), dest="opt_" + f.name,
                            default=None, metavar=f.name.upper())
        if name in ("hetero", "separation"):
            sp.add_argument("--sweep", default=None, metavar="KEY=START:STOP:STEP")
    return p


# -- configuration -------------------------------------------------------------

_COMMAND_DEFAULTS = {
    "separation": {"potential": "w_eps", "beta": 1.0},
    "doublelayer": {"potential": "w_eps", "beta": 1.0},
}


def resolve_config(command, config_path, overrides):
    values = {}
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        values.update(parse_config_text(text))
    for key, raw in overrides.items():
        values[key] = _coerce(key, raw)
    explicit_out = "out" in overrides
    for key, val in _COMMAND_DEFAULTS.get(command, {}).items():
        values.setdefault(key, val)
    if not explicit_out and os.environ.get("EFKL_OUT"):
        values["out"] = os.environ["EFKL_OUT"]
    return RunConfig(**values)


def _pot(cfg):
    return potentials.by_name(cfg.potential, cfg.eps, cfg.argument)


def _values(d):
    return {k: {"value": v, "unit": UNITS.get(k, "1")} for k, v in d.items()}


def _report(command, cfg, pot, values, checks, artifacts, extra=None):
    rep = {
        "command": command,
        "config": cfg.as_dict(),
        "config_hash": cfg.hash(),
        "potential": pot.params,
        "values": _values(values),
        "checks": checks,
        "passed": all(checks.values()),
        "artifacts": sorted(artifacts),
    }
    if extra:
        rep.update(extra)
    return rep


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_profile(out, stem, prof, cfg, artifacts):
    if cfg.emit_binary:
        io.write_efk1(out / f"{stem}.efk1", prof)
        artifacts.append(f"{stem}.efk1")
    if cfg.emit_csv:
        io.write_profile_csv(out / f"{stem}.csv", prof)
        artifacts.append(f"{stem}.csv")


# -- hetero --------------------------------------------------------------------

def hetero_checks(p, cfg, converged=True):
    """Values and pass/fail checks for a (loaded or fresh) 1D minimizer."""
    pot, beta = p.potential, p.beta
    eps0 = cfg.eps0 or ode1d.default_eps0(pot)
    k_lin, osc = ode1d.linearized_rate(pot, beta)
    vals = {"action": ode1d.action_1d(p), "residual": ode1d.residual_ode(p), "k_lin": k_lin,
            "transition_bound": ode1d.transition_cost_bound(pot, beta)}
    checks = {"converged": bool(converged), "residual": vals["residual"] <= cfg.residual_tol}
    try:
        k, K = ode1d.fit_decay_rate(p)
        vals.update(k=k, K=K)
        checks["decay_rate"] = bool(osc or abs(k - k_lin) <= DECAY_REL * k_lin)
    except DomainTooShortError:
        vals.update(k=None, K=None)
        checks["decay_rate"] = False
    segs = ode1d.transition_segments(p, eps0)
    vals["transition_min"] = min(segs) if segs else None
    checks["transition_bound"] = all(s > vals["transition_bound"] for s in segs)
    try:
        core, lower = ode1d.core_action(p, eps0)
        vals.update(core_action=core, core_lower_bound=lower)
        checks["core_bound"] = bool(core >= lower)
    except DomainTooShortError:
        vals.update(core_action=None, core_lower_bound=None)
        checks["core_bound"] = False
    return vals, checks


def _initial_profile(pot, beta, grid, cfg):
    if cfg.potential == "w_eps" and grid.half_length >= 1.0 / cfg.eps + 2.0:
        return fam.arc_comparison_map(cfg.eps, grid, pot, beta)
    return ode1d.e0_profile(pot, beta, grid)


def cmd_hetero(cfg):
    if cfg.beta is None:
        raise UsageError("hetero needs --beta")
    pot = _pot(cfg)
    if not potentials.verify_double_well(pot).admissible:
        raise UsageError(f"{cfg.potential} is not an admissible double-well potential")
    grid = ode1d.Grid1D(cfg.half_length(), cfg.nodes())
    init = _initial_profile(pot, cfg.beta, grid, cfg)
    res = ode1d.minimize_heteroclinic(pot, cfg.beta, init, cfg)
    out = _outdir(cfg)
    artifacts = []
    _save_profile(out, "profile", res.profile, cfg, artifacts)
    vals, checks = hetero_checks(res.profile, cfg)
    vals.update(j_min=res.action, canonical_shift=res.canonical_shift,
                iterations=res.iterations)
    rep = _report("hetero", cfg, pot, vals, checks, artifacts + ["hetero.json"],
                  {"oscillatory_tails": res.oscillatory_tails})
    if cfg.emit_json:
        io.write_json(out / "hetero.json", rep)
    return EXIT_OK if rep["passed"] else EXIT_CHECK


# -- separation ----------------------------------------------------------------

def separation_checks(cert):
    vals = {"j_min": cert.j_min, "d_min": cert.d_min, "mu": cert.mu,
            "lower_bound": cert.lower_bound, "arc_action": cert.arc_action,
            "wizz_bound": cert.wizz, "min_modulus": cert.min_modulus,
            "sup_gap": cert.sup_gap, "psi_integral": cert.psi_integral,
            "reflection_defect": cert.reflection_defect}
    checks = {"separated": bool(cert.separated), "psi": bool(cert.psi_consistent),
              "homotopy_proxy": bool(cert.homotopy_proxy), "wizz": bool(cert.wizz_consistent),
              "reflection": bool(cert.reflection_defect <= 1e-10),
              "below_arc": bool(not np.isfinite(cert.arc_action)
                                or cert.j_min <= cert.arc_action)}
    return vals, checks


def _load_members(cert_path, pot, beta):
    data = io.read_json(cert_path)
    try:
        refs = data["members"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{cert_path}: no member list") from exc
    base = Path(cert_path).parent
    out = {fam.CLOCKWISE: [], fam.COUNTERCLOCKWISE: []}
    for ref in refs:
        rec = io.read_efk1(base / ref["file"])
        grid = ode1d.Grid1D(rec.L, rec.n)
        prof = ode1d.Profile1D(grid, rec.values, pot, rec.beta)
        out[ref["label"]].append(prof)
    return data, out


class _Member:
    """Light stand-in for a solved minimizer rebuilt from disk."""

    def __init__(self, profile):
        self.profile = profile
        self.action = ode1d.action_1d(profile)


def _families_from_profiles(groups):
    return (fam.HeteroclinicFamily(fam.COUNTERCLOCKWISE,
                                   [_Member(p) for p in groups[fam.COUNTERCLOCKWISE]]),
            fam.HeteroclinicFamily(fam.CLOCKWISE, [_Member(p) for p in groups[fam.CLOCKWISE]]))


def _write_certificate(out, cfg, f_minus, f_plus, cert, artifacts):
    members = []
    for f in (f_minus, f_plus):
        tag = "minus" if f.label == fam.COUNTERCLOCKWISE else "plus"
        for i, m in enumerate(f.members):
            stem = f"member_{tag}_{i}"
            io.write_efk1(out / f"{stem}.efk1", m.profile)
            artifacts.append(f"{stem}.efk1")
            if cfg.emit_csv:
                io.write_profile_csv(out / f"{stem}.csv", m.profile)
                artifacts.append(f"{stem}.csv")
            members.append({"file": f"{stem}.efk1", "label": f.label,
                            "action": m.action})
    body = {"epsilon": cert.epsilon, "beta": cert.beta, "j_min": cert.j_min,
            "d_min": cert.d_min, "mu": cert.mu, "lower_bound": cert.lower_bound,
            "members": members, "config_hash": cfg.hash()}
    io.write_json(out / "certificate.json", body)
    artifacts.append("certificate.json")


def cmd_separation(cfg):
    if cfg.potential != "w_eps":
        raise UsageError("separation needs potential = w_eps")
    pot = _pot(cfg)
    out = _outdir(cfg)
    artifacts = []
    if cfg.resume:
        try:
            _, groups = _load_members(cfg.resume, pot, cfg.beta)
            f_minus, f_plus = _families_from_profiles(groups)
        except (FormatError, FileNotFoundError, KeyError, InvalidParameterError) as exc:
            raise _NoInput(f"cannot resume from {cfg.resume}: {exc}") from exc
        if not len(f_minus) or not len(f_plus):
            raise SeparationNotFound("resumed certificate has an empty family")
        cert = fam.certify(cfg.eps, cfg.beta, f_minus, f_plus)
    else:
        f_minus, f_plus, cert = fam.find_families(cfg.eps, cfg.beta, cfg)
    _write_certificate(out, cfg, f_minus, f_plus, cert, artifacts)
    vals, checks = separation_checks(cert)
    vals["n_members"] = len(f_minus) + len(f_plus)
    rep = _report("separation", cfg, pot, vals, checks, artifacts + ["separation.json"])
    if cfg.emit_json:
        io.write_json(out / "separation.json", rep)
    return EXIT_OK if cert.separated else EXIT_CHECK


# -- double layer --------------------------------------------------------------

def doublelayer_checks(fld, f_minus, f_plus, j_min, cfg):
    """Values, checks and slice trace of a double layer (fresh or loaded)."""
    e_minus = f_minus.members[0].profile
    e_plus = f_plus.members[0].profile
    v0 = pde2d.build_V0(e_minus, e_plus, fld.grid, fld.op)
    j0 = pde2d.action_functional_J(v0, j_min)
    scale = pde2d.residual_scale(fld)
    residual = pde2d.residual_pde(fld)
    energy, orbit, split = pde2d.splitting_defect(fld, j_min)
    trace = pde2d.layer_asymptotics(fld, f_minus, f_plus)
    probe = pde2d.minimality_probe(fld, cfg.seed, cfg.n_trials)
    probe_v0 = pde2d.minimality_probe(v0, cfg.seed, cfg.n_trials)
    holder = pde2d.holder_bound_check(fld, j0)
    lhs, rhs = pde2d.slab_bound_check(fld, j_min)
    tail = pde2d.uniform_well_convergence(fld)
    vals = {"energy": energy, "orbit_action": orbit, "J0": j0, "j_min": j_min,
            "residual": residual, "residual_scale": scale, "splitting_defect": split,
            "probe_min": probe.worst, "probe_scale": probe.scale,
            "probe_V0_min": probe_v0.worst, "holder_ratio": holder,
            "slab_ratio": float(np.max(lhs / rhs)), "tail_sup": tail,
            "d_min": trace.d_min, "t_minus": trace.t_minus, "t_plus": trace.t_plus}
    checks = {"residual": residual <= cfg.residual_tol * scale,
              "splitting": split <= SPLIT_REL,
              "probe": probe.passes(PROBE_REL),
              "probe_V0_negative": probe_v0.worst < 0.0 if cfg.n_trials else True,
              "holder": holder <= HOLDER_MAX,
              "slab": bool(np.all(lhs <= rhs)),
              "tail": tail <= TAIL_MAX,
              "single_crossing": trace.single_crossing(),
              "ut_decay": trace.ut_decays(),
              "tubes": not trace.tube_exit()}
    return vals, {k: bool(v) for k, v in checks.items()}, trace


def _doublelayer_families(cfg, pot):
    if cfg.certificate:
        try:
            _, groups = _load_members(cfg.certificate, pot, cfg.beta)
        except FileNotFoundError as exc:
            raise _NoInput(str(exc)) from exc
        f_minus, f_plus = _families_from_profiles(groups)
        if not len(f_minus) or not len(f_plus):
            raise SeparationNotFound("certificate has an empty family")
        return f_minus, f_plus
    f_minus, f_plus, cert = fam.find_families(cfg.eps, cfg.beta, cfg)
    if not cert.separated:
        raise SeparationNotFound("families are not certified as separated")
    return f_minus, f_plus


def cmd_doublelayer(cfg):
    pot = _pot(cfg)
    if pot.dim != 2:
        raise UsageError("doublelayer needs a planar potential (w_eps)")
    f_minus, f_plus = _doublelayer_families(cfg, pot)
    grid = pde2d.Grid2D(cfg.T, cfg.x_half_length(), cfg.nt, cfg.nx)
    fm = pde2d.family_on_grid(f_minus, pot, cfg.beta, grid, cfg)
    fp = pde2d.family_on_grid(f_plus, pot, cfg.beta, grid, cfg)
    j_min = min(m.action for m in fm.members + fp.members)
    op = pde2d.Operator.from_config(cfg, cfg.beta)
    res = pde2d.minimize_double_layer(pot, cfg.beta, fm.members[0].profile,
                                      fp.members[0].profile, grid, cfg, op=op)
    out = _outdir(cfg)
    artifacts = []
    if cfg.emit_binary:
        io.write_efk2(out / "field.efk2", res.field)
        artifacts.append("field.efk2")
    io.write_efk1(out / "e_minus.efk1", fm.members[0].profile)
    io.write_efk1(out / "e_plus.efk1", fp.members[0].profile)
    artifacts += ["e_minus.efk1", "e_plus.efk1"]
    vals, checks, trace = doublelayer_checks(res.field, fm, fp, j_min, cfg)
    vals["iterations"] = res.iterations
    if cfg.emit_csv:
        io.write_trace_csv(out / "trace.csv", trace.rows())
        artifacts.append("trace.csv")
    rep = _report("doublelayer", cfg, pot, vals, checks, artifacts + ["doublelayer.json"],
                  {"variant": op.variant, "operator": list(op.as_tuple())})
    if cfg.emit_json:
        io.write_json(out / "doublelayer.json", rep)
    if not checks["tubes"]:
        log.error("the layer is squeezed between the t-clamps; raise T (now %g)", cfg.T)
        return EXIT_TUBE
    return EXIT_OK if rep["passed"] else EXIT_CHECK


# -- verify / report -----------------------------------------------------------

class _NoInput(Exception):
    pass


def _config_from_report(rep):
    try:
        return RunConfig(**rep["config"])
    except (KeyError, TypeError, InvalidParameterError) as exc:
        raise FormatError(f"report carries an invalid config: {exc}") from exc


def _verify_one(path):
    rep = io.read_json(path)
    if not isinstance(rep, dict) or "command" not in rep or "checks" not in rep:
        raise FormatError(f"{path}: not a report")
    cfg = _config_from_report(rep)
    pot = _pot(cfg)
    base = Path(path).parent
    cmd = rep["command"]
    if cmd == "hetero":
        rec = io.read_efk1(base / "profile.efk1")
        prof = ode1d.Profile1D(ode1d.Grid1D(rec.L, rec.n), rec.values, pot, rec.beta)
        _, checks = hetero_checks(prof, cfg, rep["checks"].get("converged", True))
    elif cmd == "separation":
        _, groups = _load_members(base / "certificate.json", pot, cfg.beta)
        f_minus, f_plus = _families_from_profiles(groups)
        _, checks = separation_checks(fam.certify(cfg.eps, cfg.beta, f_minus, f_plus))
    elif cmd == "doublelayer":
        rec = io.read_efk2(base / "field.efk2")
        grid = pde2d.Grid2D(rec.T, rec.L, rec.values.shape[0], rec.values.shape[1])
        op = pde2d.Operator.from_config(cfg, rec.beta)
        fld = pde2d.Field2D(grid, rec.values, pot, rec.beta, op)
        members = {}
        for key in ("e_minus", "e_plus"):
            r = io.read_efk1(base / f"{key}.efk1")
            members[key] = _Member(ode1d.Profile1D(grid.x_grid(), r.values, pot, r.beta))
        fm = fam.HeteroclinicFamily(fam.COUNTERCLOCKWISE, [members["e_minus"]])
        fp = fam.HeteroclinicFamily(fam.CLOCKWISE, [members["e_plus"]])
        j_min = min(members["e_minus"].action, members["e_plus"].action)
        _, checks, _ = doublelayer_checks(fld, fm, fp, j_min, cfg)
    else:
        raise FormatError(f"{path}: unknown command {cmd!r}")
    same = checks == rep["checks"]
    if not same:
        for k in sorted(set(checks) | set(rep["checks"])):
            if checks.get(k) != rep["checks"].get(k):
                log.error("%s: check %s stored %s, recomputed %s", path, k,
                          rep["checks"].get(k), checks.get(k))
    return same


def _find_reports(paths):
    found = []
    for p in paths:
        p = Path(p)
        if p.is_file() and p.suffix == ".json":
            found.append(p)
        elif p.is_dir():
            found += sorted(q for name in ("hetero.json", "separation.json", "doublelayer.json")
                            for q in p.rglob(name))
    return found


def cmd_verify(cfg, paths):
    paths = paths or [cfg.out]
    for p in paths:
        if not Path(p).exists():
            raise _NoInput(f"{p} does not exist")
    reports = _find_reports(paths)
    if not reports:
        raise _NoInput("no reports found")
    ok = True
    for rep in reports:
        try:
            ok &= _verify_one(rep)
        except (FileNotFoundError, KeyError) as exc:
            raise _NoInput(f"{rep}: missing artifact ({exc})") from exc
    return EXIT_OK if ok else EXIT_CHECK


def cmd_report(cfg, paths):
    reports = _find_reports(paths or [cfg.out])
    if not reports:
        raise _NoInput("no reports found")
    out = _outdir(cfg)
    rows = []
    for path in reports:
        rep = io.read_json(path)
        for key, entry in sorted(rep.get("values", {}).items()):
            rows.append([str(path), rep.get("command", ""), rep.get("config_hash", ""),
                         key, repr(entry.get("value")), entry.get("unit", "")])
        for key, passed in sorted(rep.get("checks", {}).items()):
            rows.append([str(path), rep.get("command", ""), rep.get("config_hash", ""),
                         "check:" + key, str(bool(passed)).lower(), "bool"])
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["report", "command", "config_hash", "key", "value", "unit"])
        w.writerows(rows)
    return EXIT_OK


# -- sweeps and entry point ----------------------------------------------------

def parse_sweep(spec):
    try:
        key, rng = spec.split("=", 1)
        start, stop, step = (float(v) for v in rng.split(":"))
    except ValueError as exc:
        raise UsageError(f"bad sweep {spec!r}; expected key=start:stop:step") from exc
    if step <= 0 or stop < start:
        raise UsageError("sweep needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return key.replace("-", "_"), [round(start + i * step, 12) for i in range(count)]


_RUNNERS = {"hetero": cmd_hetero, "separation": cmd_separation,
            "doublelayer": cmd_doublelayer}


def _run_guarded(fn, *args):
    try:
        return fn(*args)
    except (UsageError, InvalidParameterError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except SeparationNotFound as exc:
        log.error("separation not found: %s", exc)
        return EXIT_SEPARATION
    except FormatError as exc:
        log.error("format error: %s", exc)
        return EXIT_FORMAT
    except (_NoInput, FileNotFoundError) as exc:
        log.error("missing input: %s", exc)
        return EXIT_NOINPUT


def _sweep(command, cfg, spec):
    key, grid = parse_sweep(spec)
    if key not in RunConfig.__dataclass_fields__:
        raise UsageError(f"unknown sweep key {key!r}")
    jobs = []
    for v in grid:
        sub = cfg.with_(**{key: _coerce(key, v)}, out=str(Path(cfg.out) / f"{key}={v:g}"))
        jobs.append(sub)
    with ThreadPoolExecutor(max_workers=min(4, len(jobs))) as pool:
        codes = list(pool.map(lambda c: _run_guarded(_RUNNERS[command], c), jobs))
    return max(codes)


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"efkl: {exc}\n{parser.format_usage()}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="efkl: %(message)s")
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr)
        return EXIT_USAGE
    overrides = {k[4:]: v for k, v in vars(args).items()
                 if k.startswith("opt_") and v is not None}

    def run():
        cfg = resolve_config(args.command, args.config, overrides)
        if args.command in ("verify", "report"):
            fn = cmd_verify if args.command == "verify" else cmd_report
            return fn(cfg, args.paths)
        if getattr(args, "sweep", None):
            return _sweep(args.command, cfg, args.sweep)
        return _RUNNERS[args.command](cfg)

    code = _run_guarded(run)
    if code == EXIT_USAGE:
        print(parser.format_usage(), file=sys.stderr, end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
