"""Run configuration: a strict ``key = value`` text format.

Grammar (one item per line)::

    line    := blank | comment | key "=" value [comment]
    comment := "#" anything
    key     := [A-Za-z_][A-Za-z0-9_]*
    value   := number | word | number "," number        (g only)

Keys are case-sensitive and may appear once. Unknown keys, malformed
lines and values of the wrong type raise :class:`ConfigError` carrying the
line number. ``case`` is required; it is either an initial-data name
(``steady-tanh``, ``random``, ``bubbles``, ``rotating-bubble``,
``rayleigh-taylor``, ``pure-phase``) or one of the presets ``test1`` ..
``test6``, which fill in mesh, case and physical parameters that the
remaining keys may then override.
"""
import math
import re
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, InvalidSpecError
from .mesh import parse_mesh_spec
from .model import ModelParams
from .scheme import CASES, NewtonSettings

PRESETS = {
    "test1": {"initial": "steady-tanh", "mesh": "interval(-1,1,128)"},
    "test2": {"initial": "random", "mesh": "rectangle(-1,1,-1,1,40,40)", "amplitude": 0.01},
    "test3": {"initial": "bubbles", "mesh": "rectangle(0,1,0,1,32,32)"},
    "test4": {"initial": "rotating-bubble", "mesh": "disk(1,8)", "viscosity": "ns",
              "eta1": 1e-3, "eta2": 5e-3, "omega": 1.0},
    "test5": {"initial": "rayleigh-taylor", "mesh": "rectangle(-1,1,-2,2,16,32)", "g": (0.0, 0.01)},
    "test6": {"initial": "random", "mesh": "interval(-1,1,256)", "amplitude": 0.01,
              "well": "modified", "rho2": 10.0},
}

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run.

    ``timestep`` is a positive number or the word ``h2`` (``k = h^2`` with
    the largest element diameter). ``snapshot_every = 0`` writes only the
    first and last level.
    """
    case: str
    mesh: str = None
    degree: int = 1
    timestep: object = 0.01
    final_time: float = 1.0
    seed: int = 0
    amplitude: float = 0.01
    output: str = "run"
    snapshot_every: int = 10
    pin_lambda: str = "auto"
    params: ModelParams = field(default_factory=ModelParams)
    newton: NewtonSettings = field(default_factory=NewtonSettings)

    @property
    def initial(self):
        return PRESETS[self.case]["initial"] if self.case in PRESETS else self.case

    @property
    def pin(self):
        return {"auto": None, "true": True, "false": False}[self.pin_lambda]


_RUN_KEYS = {
    "case": str, "mesh": str, "degree": int, "timestep": "timestep", "final_time": float,
    "seed": int, "amplitude": float, "output": str, "snapshot_every": int, "pin_lambda": str,
}
_PARAM_KEYS = {
    "rho1": float, "rho2": float, "gamma": float, "eta": float, "m_j": float, "m_r": float,
    "viscosity": str, "eta1": float, "eta2": float, "sigma": "optfloat", "well": str,
    "A": "optfloat", "omega": float, "g": "vector",
}
_NEWTON_KEYS = {
    "newton_tol": ("tol", float), "newton_max_iter": ("max_iter", int),
    "newton_max_halvings": ("max_halvings", int), "linear_solver": ("linear_solver", str),
    "krylov_rtol": ("krylov_rtol", float), "krylov_maxiter": ("krylov_maxiter", int),
}


def _convert(kind, text, line):
    try:
        if kind is str:
            if not re.fullmatch(r"[A-Za-z0-9_.,()+\-/]+", text):
                raise ValueError
            return text
        if kind is int:
            return int(text)
        if kind is float:
            x = float(text)
            if not math.isfinite(x):
                raise ValueError
            return x
        if kind == "optfloat":
            return None if text == "default" else _convert(float, text, line)
        if kind == "timestep":
            return "h2" if text == "h2" else _convert(float, text, line)
        if kind == "vector":
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise ValueError
            return tuple(_convert(float, p, line) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {getattr(kind, '__name__', kind)}", line) from None
    raise AssertionError(kind)


def parse_config(text):
    """Parse the configuration text into a :class:`RunConfig`."""
    raw = {}
    where = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"malformed key {key!r}", lineno)
        if key not in _RUN_KEYS and key not in _PARAM_KEYS and key not in _NEWTON_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first on line {where[key]})", lineno)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno)
        kind = (_RUN_KEYS.get(key) or _PARAM_KEYS.get(key) or _NEWTON_KEYS[key][1])
        raw[key] = _convert(kind, value, lineno)
        where[key] = lineno
    if "case" not in raw:
        raise ConfigError("missing required key 'case'", 1 if not text.strip() else None)
    return _build(raw, where)


def _build(raw, where):
    case = raw["case"]
    if case not in PRESETS and case not in CASES:
        raise ConfigError(f"unknown case {case!r}; expected one of "
                          f"{', '.join(list(PRESETS) + list(CASES))}", where.get("case"))
    values = {k: v for k, v in PRESETS.get(case, {}).items() if k != "initial"}
    values.update(raw)

    def fail(key, msg):
        raise ConfigError(msg, where.get(key))

    run = {k: values[k] for k in _RUN_KEYS if k in values}
    if run.get("mesh") is None:
        fail("case", f"case {case!r} needs a 'mesh' entry")
    try:
        parse_mesh_spec(run["mesh"])
    except InvalidSpecError as exc:
        fail("mesh", str(exc))
    if run.get("degree", 1) < 1:
        fail("degree", "degree must be >= 1")
    ts = run.get("timestep", 0.01)
    if ts != "h2" and not ts > 0:
        fail("timestep", "timestep must be positive or 'h2'")
    if not run.get("final_time", 1.0) >= 0:
        fail("final_time", "final_time must be non-negative")
    if not run.get("amplitude", 0.01) > 0:
        fail("amplitude", "amplitude must be positive")
    if run.get("snapshot_every", 10) < 0:
        fail("snapshot_every", "snapshot_every must be >= 0")
    if run.get("pin_lambda", "auto") not in ("auto", "true", "false"):
        fail("pin_lambda", "pin_lambda must be auto, true or false")

    pkw = {k: values[k] for k in _PARAM_KEYS if k in values}
    try:
        params = ModelParams(**pkw)
    except InvalidSpecError as exc:
        bad = next((k for k in pkw if k in str(exc)), None)
        fail(bad, str(exc))
    nkw = {attr: values[k] for k, (attr, _) in _NEWTON_KEYS.items() if k in values}
    try:
        newton = NewtonSettings(**nkw)
    except ValueError as exc:
        fail(next(iter(nkw), None), str(exc))
    return RunConfig(params=params, newton=newton, **run)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return ", ".join(_fmt(c) for c in x)
    if x is None:
        return "default"
    return str(x)


def serialize_config(cfg):
    """Text form listing every value explicitly; ``parse_config`` inverts it."""
    lines = []
    for k in _RUN_KEYS:
        lines.append(f"{k} = {_fmt(getattr(cfg, k))}")
    for k in _PARAM_KEYS:
        lines.append(f"{k} = {_fmt(getattr(cfg.params, k))}")
    for k, (attr, _) in _NEWTON_KEYS.items():
        lines.append(f"{k} = {_fmt(getattr(cfg.newton, attr))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)


def config_dict(cfg):
    out = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name not in ("params", "newton")}
    out["params"] = cfg.params.as_dict()
    out["newton"] = {f.name: getattr(cfg.newton, f.name) for f in fields(cfg.newton)}
    return out
