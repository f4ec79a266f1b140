"""Flat ``section.key = value`` run configuration."""
from dataclasses import dataclass
import hashlib

from .errors import ConfigError, InvalidParameter, MissingKey, StabilityViolation, UnknownKey
from .mesh import build_mesh, parse_domain
from .model import PRESET_DEFAULTS, preset
from .stepper import MAX_FP, TOL_FP, n_steps_for

MODES = ("simulate", "continuous_dependence", "convergence", "validate")
REQUIRED = ("mesh.domain", "mesh.nodes", "time.T", "time.tau", "model.preset", "model.lambda")
OPTIONAL = {
    "time.tol_fp": TOL_FP,
    "time.max_fp": MAX_FP,
    "output.snapshot_stride": 10,
    "output.dir": "out",
    "run.mode": "simulate",
    "run.seed": 0,
}
# preset parameters that have their own config keys
_RESERVED_PARAMS = {"T", "lam"}


@dataclass(frozen=True)
class RunConfig:
    domain: str
    nodes: int
    T: float
    tau: float
    lam: float
    preset: str
    overrides: tuple = ()
    tol_fp: float = TOL_FP
    max_fp: int = MAX_FP
    snapshot_stride: int = 10
    output_dir: str = "out"
    mode: str = "simulate"
    seed: int = 0

    def coefficients(self):
        return preset(self.preset, T=self.T, lam=self.lam, **dict(self.overrides))

    def mesh(self):
        return build_mesh(self.domain, self.nodes)

    @property
    def n_steps(self):
        return n_steps_for(self.T, self.tau)

    def hash(self):
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _pairs(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        yield lineno, key, value


def _number(key, value, kind=float):
    try:
        if kind is int:
            v = float(value)
            if not v.is_integer():
                raise ValueError
            return int(v)
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def parse_config(text):
    """Parse and validate a configuration document."""
    raw = {}
    for lineno, key, value in _pairs(text):
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise MissingKey(f"missing required key(s): {', '.join(missing)}")

    name = raw["model.preset"]
    if name not in PRESET_DEFAULTS:
        preset(name)  # raises UnknownPreset
    allowed_overrides = {f"model.{p}" for p in PRESET_DEFAULTS[name]} - {f"model.{p}" for p in _RESERVED_PARAMS}
    for key in raw:
        if key not in REQUIRED and key not in OPTIONAL and key not in allowed_overrides:
            raise UnknownKey(f"unknown key {key!r}")

    domain = parse_domain(raw["mesh.domain"])
    overrides = tuple(sorted((k.split(".", 1)[1], _number(k, v)) for k, v in raw.items()
                             if k in allowed_overrides))
    cfg = RunConfig(
        domain=str(domain),
        nodes=_number("mesh.nodes", raw["mesh.nodes"], int),
        T=_number("time.T", raw["time.T"]),
        tau=_number("time.tau", raw["time.tau"]),
        lam=_number("model.lambda", raw["model.lambda"]),
        preset=name,
        overrides=overrides,
        tol_fp=_number("time.tol_fp", raw.get("time.tol_fp", TOL_FP)),
        max_fp=_number("time.max_fp", raw.get("time.max_fp", MAX_FP), int),
        snapshot_stride=_number("output.snapshot_stride", raw.get("output.snapshot_stride", 10), int),
        output_dir=raw.get("output.dir", "out"),
        mode=raw.get("run.mode", "simulate"),
        seed=_number("run.seed", raw.get("run.seed", 0), int),
    )
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.mode not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {cfg.mode!r}")
    if not cfg.tau > 0 or not cfg.lam > 0:
        raise InvalidParameter("time.tau and model.lambda must be positive")
    if cfg.tau > cfg.lam:
        raise StabilityViolation(f"time.tau = {cfg.tau} exceeds model.lambda = {cfg.lam}")
    if cfg.T < 0:
        raise InvalidParameter("time.T must be non-negative")
    cfg.n_steps  # T / tau must be an integer
    if cfg.snapshot_stride < 1 or cfg.max_fp < 1 or not cfg.tol_fp > 0:
        raise InvalidParameter("snapshot_stride and max_fp must be >= 1, tol_fp > 0")
    cfg.mesh()  # surfaces invalid resolution / domain
    cfg.coefficients()


def serialize(cfg):
    """Inverse of :func:`parse_config` (all keys written, defaults included)."""
    lines = [
        f"mesh.domain = {cfg.domain}",
        f"mesh.nodes = {cfg.nodes}",
        f"time.T = {cfg.T!r}",
        f"time.tau = {cfg.tau!r}",
        f"time.tol_fp = {cfg.tol_fp!r}",
        f"time.max_fp = {cfg.max_fp}",
        f"model.preset = {cfg.preset}",
        f"model.lambda = {cfg.lam!r}",
    ]
    lines += [f"model.{k} = {v!r}" for k, v in cfg.overrides]
    lines += [
        f"output.snapshot_stride = {cfg.snapshot_stride}",
        f"output.dir = {cfg.output_dir}",
        f"run.mode = {cfg.mode}",
        f"run.seed = {cfg.seed}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
