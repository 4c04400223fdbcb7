"""Run configuration read from an INI file.

Every key is validated, and the objects the library needs are built,
before any computation starts.  Unknown sections or keys are errors.

Example::

    [problem]
    potential = gaussian_well
    depth = 3
    width = 1

    [grid]
    a = -250
    b = 15
    m = 8832

    [cap]
    eps0 = 0.5
    ratio = 0.6
    count = 20
    re_min = -2
    re_max = 1
    im_min = -0.2
    im_max = 0
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

from .cap import EpsilonSchedule, SolverConfig, Window
from .distort import ConeParams
from .grid import POTENTIALS, Grid1D, make_potential


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending ``section.key``."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


_POTENTIAL_KEYS = {
    "zero": (),
    "gaussian_well": ("depth", "width", "center"),
    "soft_coulomb": ("charge", "reg", "center"),
    "square_well": ("depth", "half_width"),
}

_SCHEMA = {
    "problem": {"potential": str, "include_stark": bool,
                "depth": float, "width": float, "center": float,
                "charge": float, "reg": float, "half_width": float},
    "grid": {"a": float, "b": float, "m": int, "fd_order": int},
    "method": {"solver": str, "sigma": complex, "k": int, "tol": float,
               "max_restarts": int, "k_max": int, "workers": int},
    "cap": {"eps": float, "eps0": float, "ratio": float, "count": int,
            "re_min": float, "re_max": float, "im_min": float, "im_max": float,
            "speed_threshold": float, "allow_boundary": bool},
    "distortion": {"k": float, "rho": float, "mollifier_radius": float, "delta": float},
    "output": {"formats": str, "prefix": str},
}

_FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class RunConfig:
    potential: object
    include_stark: bool
    grid: Grid1D
    fd_order: int
    solver: SolverConfig
    sigma: complex | None
    eps: float | None
    schedule: EpsilonSchedule
    window: Window | None
    speed_threshold: float
    allow_boundary: bool
    cone: ConeParams
    delta: float
    formats: tuple
    prefix: str
    raw: dict = field(compare=False)

    @property
    def theta(self):
        return complex(0.0, -self.delta)

    def canonical(self):
        """The parsed values as a JSON-ready dict with sorted keys."""
        return {s: dict(sorted(v.items())) for s, v in sorted(self.raw.items())}

    @property
    def sha256(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _convert(section, key, typ, text):
    name = f"{section}.{key}"
    text = text.strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            val = float(text)
        elif typ is complex:
            val = complex(text.replace(" ", ""))
        else:
            return text
    except ValueError:
        raise ConfigError(name, f"cannot parse {text!r} as {typ.__name__}") from None
    if val != val or abs(val) == float("inf"):
        raise ConfigError(name, "must be finite")
    if typ is complex:
        return [val.real, val.imag]
    return val


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    raw = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, f"unknown section; expected one of {sorted(_SCHEMA)}")
        raw[section] = {}
        for key, text_value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            raw[section][key] = _convert(section, key, _SCHEMA[section][key], text_value)
    return raw


def _checked(name, build):
    try:
        return build()
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


def parse_config(text):
    """Parse and validate INI text into a :class:`RunConfig`."""
    raw = _read(text)
    get = lambda s, k, d=None: raw.get(s, {}).get(k, d)

    prob = raw.get("problem", {})
    kind = prob.get("potential", "zero")
    if kind not in POTENTIALS:
        raise ConfigError("problem.potential", f"unknown kind {kind!r}; expected one of {sorted(POTENTIALS)}")
    allowed = set(_POTENTIAL_KEYS[kind]) | {"potential", "include_stark"}
    for key in prob:
        if key not in allowed:
            raise ConfigError(f"problem.{key}", f"not a parameter of {kind}")
    pot = _checked("problem", lambda: make_potential(kind, **{k: prob[k] for k in _POTENTIAL_KEYS[kind] if k in prob}))

    if "grid" not in raw or any(k not in raw["grid"] for k in ("a", "b", "m")):
        raise ConfigError("grid", "a, b and m are required")
    grid = _checked("grid", lambda: Grid1D(raw["grid"]["a"], raw["grid"]["b"], raw["grid"]["m"]))
    fd_order = get("grid", "fd_order", 2)
    if fd_order not in (2, 4):
        raise ConfigError("grid.fd_order", f"must be 2 or 4, got {fd_order}")

    method = raw.get("method", {})
    for key, lo in (("k", 1), ("max_restarts", 1), ("k_max", 1), ("workers", 1)):
        if key in method and method[key] < lo:
            raise ConfigError(f"method.{key}", f"must be >= {lo}")
    if "tol" in method and not method["tol"] > 0:
        raise ConfigError("method.tol", "must be > 0")
    solver = _checked("method.solver", lambda: SolverConfig(
        method=method.get("solver", "auto"),
        k=method.get("k", 8),
        tol=method.get("tol", 1e-8),
        max_restarts=method.get("max_restarts", 300),
        k_max=method.get("k_max", 128),
        workers=method.get("workers", 1),
    ))
    sigma = complex(*method["sigma"]) if "sigma" in method else None

    cap = raw.get("cap", {})
    eps = cap.get("eps")
    if eps is not None and eps < 0:
        raise ConfigError("cap.eps", "must be >= 0")
    sched_kw = {k: cap[k] for k in ("eps0", "ratio", "count") if k in cap}
    try:
        schedule = EpsilonSchedule(**sched_kw)
    except ValueError as exc:
        bad = next((k for k in ("eps0", "ratio", "count") if k in str(exc)), "schedule")
        raise ConfigError(f"cap.{bad}", str(exc)) from None
    wkeys = ("re_min", "re_max", "im_min", "im_max")
    present = [k for k in wkeys if k in cap]
    if present and len(present) < 4:
        missing = next(k for k in wkeys if k not in cap)
        raise ConfigError(f"cap.{missing}", "window needs all of re_min, re_max, im_min, im_max")
    window = _checked("cap.window", lambda: Window(*(cap[k] for k in wkeys))) if present else None
    threshold = cap.get("speed_threshold", 1e-2)
    if not threshold > 0:
        raise ConfigError("cap.speed_threshold", "must be > 0")

    dist = raw.get("distortion", {})
    cone = _checked("distortion", lambda: ConeParams(dist.get("k", 0.25), dist.get("rho", 5.0),
                                                     dist.get("mollifier_radius", 1.0)))
    delta = dist.get("delta", 0.3)
    if not delta > 0:
        raise ConfigError("distortion.delta", "must be > 0")

    out = raw.get("output", {})
    formats = tuple(f.strip() for f in out.get("formats", "csv,json,svg").split(",") if f.strip())
    for f in formats:
        if f not in _FORMATS:
            raise ConfigError("output.formats", f"unknown format {f!r}; expected a subset of {list(_FORMATS)}")
    prefix = out.get("prefix", "run")
    if not prefix or "/" in prefix or "\\" in prefix:
        raise ConfigError("output.prefix", "must be a plain file name stem")

    return RunConfig(
        potential=pot, include_stark=prob.get("include_stark", True), grid=grid, fd_order=fd_order,
        solver=solver, sigma=sigma, eps=eps, schedule=schedule, window=window,
        speed_threshold=threshold, allow_boundary=cap.get("allow_boundary", False),
        cone=cone, delta=delta, formats=formats, prefix=prefix, raw=raw,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
