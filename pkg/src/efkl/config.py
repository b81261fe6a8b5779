"""Run configuration: ``key = value`` files with ``--key value`` overrides."""

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import InvalidParameterError

VARIANTS = ("biharmonic", "split-quartic", "general")
# W_eps minimizers spread over roughly 1/eps + 10 on each side, with slowly
# decaying oscillatory tails beyond
W_EPS_MARGIN = 16.0


@dataclass(frozen=True)
class RunConfig:
    potential: str = "allen_cahn"
    eps: float = 0.4
    beta: float = None
    argument: str = "square"
    # 1D grid; zero selects the defaults of half_length() and nodes()
    L: float = 0.0
    n: int = 0
    # 2D grid; Lx <= 0 follows the 1D rule
    T: float = 12.0
    Lx: float = 0.0
    nt: int = 401
    nx: int = 401
    variant: str = "biharmonic"
    a11: float = 1.0
    a12: float = 2.0
    a22: float = 1.0
    b1: float = 0.0
    b2: float = 0.0
    tol_g: float = 1e-9
    tol_e: float = 1e-13
    residual_tol: float = 1e-4
    max_iters: int = 20000
    memory: int = 10
    seed: int = 0
    n_trials: int = 200
    eps0: float = 0.0
    out: str = "efkl_out"
    certificate: str = ""
    resume: str = ""
    emit_csv: bool = True
    emit_json: bool = True
    emit_binary: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        def check(cond, msg):
            if not cond:
                raise InvalidParameterError(msg)

        check(self.potential in ("allen_cahn", "ginzburg_landau", "w_eps"),
              f"unknown potential {self.potential!r}")
        check(0.0 < self.eps < 1.0, "eps must lie in (0, 1)")
        check(self.beta is None or self.beta > 0.0, "beta must be positive")
        check(self.argument in ("square", "modulus"), "argument must be square|modulus")
        check(self.L >= 0.0 and self.Lx >= 0.0, "half lengths must be nonnegative")
        check(self.n == 0 or (self.n >= 101 and self.n % 2 == 1),
              "n must be an odd integer >= 101")
        check(self.nt >= 101 and self.nx >= 101, "nt and nx must be >= 101")
        check(self.T > 0.0, "T must be positive")
        check(self.variant in VARIANTS, f"variant must be one of {VARIANTS}")
        check(min(self.a11, self.a12, self.a22, self.b1, self.b2) >= 0.0,
              "operator coefficients must be nonnegative")
        check(0.0 < self.tol_g < 1.0 and 0.0 < self.tol_e < 1.0, "tolerances must lie in (0, 1)")
        check(self.residual_tol > 0.0, "residual_tol must be positive")
        check(self.max_iters >= 1 and self.memory >= 1, "max_iters and memory must be >= 1")
        check(self.n_trials >= 0 and self.seed >= 0, "seed and n_trials must be >= 0")
        check(self.eps0 >= 0.0, "eps0 must be nonnegative")

    # derived ----------------------------------------------------------------
    def half_length(self):
        if self.L > 0.0:
            return self.L
        return 1.0 / self.eps + W_EPS_MARGIN if self.potential == "w_eps" else 20.0

    def nodes(self):
        if self.n:
            return self.n
        return 4001 if self.potential == "w_eps" else 2001

    def x_half_length(self):
        return self.Lx if self.Lx > 0.0 else self.half_length()

    def with_(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        return asdict(self)

    def hash(self):
        """Short content hash, stamped into every report."""
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    if key not in _TYPES:
        raise InvalidParameterError(f"unknown config key {key!r}")
    default = RunConfig.__dataclass_fields__[key].default
    kind = type(default) if default is not None else float
    try:
        if kind is bool:
            low = str(raw).strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise InvalidParameterError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = _coerce(key.replace("-", "_"), raw)
    return values


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for key, raw in (overrides or {}).items():
        key = key.replace("-", "_")
        values[key] = _coerce(key, raw)
    return RunConfig(**values)
