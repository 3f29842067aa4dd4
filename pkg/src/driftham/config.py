"""INI model configuration for the command-line front end.

A model file is a flat sectioned file; expression values are quoted
strings in the calculator grammar of :mod:`driftham.expr` over the state
names ``x1..xn``, control names ``u1..um``, declared parameters, and (for
invariants) momenta ``p1..pm̄``::

    [model]
    n = 3
    m = 1

    [parameters]
    m = 1.0
    alpha = 1.0

    [Z1]                    ; one section per generator, components c1..cn
    c1 = "1"
    c2 = "0"
    c3 = "0"

    [V]
    c1 = "0"
    c2 = "x3/(m*x1^2)"
    c3 = "0"

    [lagrangian]
    L = "m*u1^2/2 + x3^2/(2*m*x1^2) + alpha/x1"

    [sample_box]            ; per-coordinate ranges avoiding singular loci
    x1 = 0.5 : 3.0
    x2 = 0.0 : 6.2832
    x3 = 0.5 : 2.0

    [tolerances]            ; optional, defaults shown
    rank_tol = 1e-7
    closure_tol = 1e-6
    rtol = 1e-10
    atol = 1e-12

    [invariants]            ; optional ledger expressions over x·, p·
    E = "p1^2/(2*m) - x3^2/(2*m*x1^2) - x1/2*p2 - alpha/x1"

    [events]                ; optional terminal radial floor
    r_min = 1e-3
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from . import expr as ex
from .geometry import VectorField
from .hamiltonize import ControlSystem


class ConfigError(ValueError):
    pass


DEFAULT_TOLERANCES = {
    "rank_tol": 1e-7,
    "closure_tol": 1e-6,
    "hessian_tol": 1e-10,
    "rtol": 1e-10,
    "atol": 1e-12,
}


@dataclass
class ModelConfig:
    name: str
    n: int
    m: int
    parameters: dict
    Z_sources: list  # m lists of n expression strings
    V_sources: list  # n expression strings
    L_source: str
    box: tuple  # n pairs (lo, hi)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    invariant_sources: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)


def _unquote(value: str, where: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    raise ConfigError(f"{where}: expression values must be quoted, got {value!r}")


def _parse_range(value: str, where: str):
    parts = value.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected 'min : max', got {value!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from None
    if not lo < hi:
        raise ConfigError(f"{where}: empty range {value!r}")
    return lo, hi


def load_model_config(path: str) -> ModelConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # parameter and invariant names are case-sensitive
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    if "model" not in cp:
        raise ConfigError(f"{path}: missing [model] section")
    try:
        n = cp.getint("model", "n")
        m = cp.getint("model", "m")
    except (configparser.NoOptionError, ValueError) as err:
        raise ConfigError(f"{path}: [model] needs integer n and m ({err})") from None
    name = cp.get("model", "name", fallback="user-model")

    parameters = {}
    if "parameters" in cp:
        for key, value in cp["parameters"].items():
            try:
                parameters[key] = float(value)
            except ValueError:
                raise ConfigError(f"{path}: parameter {key} = {value!r} is not a number") from None

    def components(section, count):
        if section not in cp:
            raise ConfigError(f"{path}: missing [{section}] section")
        out = []
        for i in range(count):
            key = f"c{i + 1}"
            if key not in cp[section]:
                raise ConfigError(f"{path}: [{section}] missing component {key}")
            out.append(_unquote(cp[section][key], f"[{section}] {key}"))
        return out

    Z_sources = [components(f"Z{a + 1}", n) for a in range(m)]
    V_sources = components("V", n)
    if "lagrangian" not in cp or "L" not in cp["lagrangian"]:
        raise ConfigError(f"{path}: missing [lagrangian] L")
    L_source = _unquote(cp["lagrangian"]["L"], "[lagrangian] L")

    if "sample_box" not in cp:
        raise ConfigError(f"{path}: missing [sample_box] section")
    box = []
    for i in range(n):
        key = f"x{i + 1}"
        if key not in cp["sample_box"]:
            raise ConfigError(f"{path}: [sample_box] missing {key}")
        box.append(_parse_range(cp["sample_box"][key], f"[sample_box] {key}"))

    tolerances = dict(DEFAULT_TOLERANCES)
    if "tolerances" in cp:
        for key, value in cp["tolerances"].items():
            if key not in tolerances:
                raise ConfigError(f"{path}: unknown tolerance {key!r}")
            tolerances[key] = float(value)

    invariant_sources = {}
    if "invariants" in cp:
        for key, value in cp["invariants"].items():
            invariant_sources[key] = _unquote(value, f"[invariants] {key}")

    events = {}
    if "events" in cp:
        for key, value in cp["events"].items():
            events[key] = float(value)

    cfg = ModelConfig(name=name, n=n, m=m, parameters=parameters,
                      Z_sources=Z_sources, V_sources=V_sources, L_source=L_source,
                      box=tuple(box), tolerances=tolerances,
                      invariant_sources=invariant_sources, events=events)
    _validate_names(cfg)
    return cfg


def _validate_names(cfg: ModelConfig):
    state_names = {f"x{i + 1}" for i in range(cfg.n)}
    control_names = {f"u{a + 1}" for a in range(cfg.m)}
    params = set(cfg.parameters)
    field_allowed = state_names | params
    for a, sources in enumerate(cfg.Z_sources):
        for i, src in enumerate(sources):
            extra = ex.free_names(ex.parse(src)) - field_allowed
            if extra:
                raise ConfigError(
                    f"[Z{a + 1}] c{i + 1}: undeclared names {sorted(extra)}")
    for i, src in enumerate(cfg.V_sources):
        extra = ex.free_names(ex.parse(src)) - field_allowed
        if extra:
            raise ConfigError(f"[V] c{i + 1}: undeclared names {sorted(extra)}")
    extra = ex.free_names(ex.parse(cfg.L_source)) - (field_allowed | control_names)
    if extra:
        raise ConfigError(f"[lagrangian] L: undeclared names {sorted(extra)}")
    # invariants may use momenta p1..p(n) — the closure size is unknown
    # until computed, so allow up to n momenta here
    momenta = {f"p{a + 1}" for a in range(cfg.n)}
    for key, src in cfg.invariant_sources.items():
        extra = ex.free_names(ex.parse(src)) - (field_allowed | momenta)
        if extra:
            raise ConfigError(f"[invariants] {key}: undeclared names {sorted(extra)}")


def control_system(cfg: ModelConfig) -> ControlSystem:
    Z = tuple(
        VectorField.from_exprs(sources, cfg.n, parameters=cfg.parameters,
                               provenance=f"Z{a + 1}")
        for a, sources in enumerate(cfg.Z_sources))
    V = VectorField.from_exprs(cfg.V_sources, cfg.n, parameters=cfg.parameters,
                               provenance="V")
    tree = ex.parse(cfg.L_source)
    x_names = tuple(f"x{i + 1}" for i in range(cfg.n))
    u_names = tuple(f"u{a + 1}" for a in range(cfg.m))

    def lagrangian(x, u):
        bindings = dict(cfg.parameters)
        bindings.update(zip(x_names, x))
        bindings.update(zip(u_names, u))
        return ex.evaluate(tree, bindings)

    return ControlSystem(n=cfg.n, m=cfg.m, Z=Z, V=V, lagrangian=lagrangian,
                         parameters=cfg.parameters)


def invariant_callables(cfg: ModelConfig, m_bar: int):
    """Ledger functions over phase points from the [invariants] section."""
    names = tuple(f"x{i + 1}" for i in range(cfg.n)) + tuple(
        f"p{a + 1}" for a in range(m_bar))
    out = {}
    for key, src in cfg.invariant_sources.items():
        tree = ex.parse(src)

        def func(z, _tree=tree):
            bindings = dict(cfg.parameters)
            bindings.update(zip(names, z))
            return ex.evaluate(_tree, bindings)

        out[key] = func
    return out
