"""INI-style run configuration with line-anchored validation errors.

Blocks: [model] sigma, v2_eps, v3_eps, r, spot; [clock] kind plus the
regime's parameters; [option] kind, strike, maturity; [grid] maturities and
either log_strikes or lmmr = lo, hi, n; [numerics] omega_i, truncation,
tolerance, seed, n_paths; [output] precision; [calibrate] free parameters,
bounds and iteration limit. A preset supplies defaults for model and clock.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .impliedvol import DEFAULT_MATURITIES, lmmr_grid
from .presets import get_preset
from .spectral import Contour, GroupParams
from .timechange import CIRClock, CompositeClock, IdentityClock, LevyExpCP

LEVY_KEYS = ("drift", "intensity", "jump_rate")
CIR_KEYS = ("kappa", "theta", "vol2", "z0")
CLOCK_KEYS = {
    "identity": (),
    "levy": LEVY_KEYS,
    "cir": CIR_KEYS,
    "composite": LEVY_KEYS + CIR_KEYS,
}
KNOWN = {
    "model": {"preset", "sigma", "v2_eps", "v3_eps", "r", "spot"},
    "clock": {"kind", *LEVY_KEYS, *CIR_KEYS},
    "option": {"kind", "strike", "maturity"},
    "grid": {"maturities", "log_strikes", "lmmr"},
    "numerics": {"omega_i", "truncation", "tolerance", "seed", "n_paths"},
    "output": {"precision"},
    "calibrate": {"free", "max_iter", *(f"{p}_bounds" for p in
                                        ("sigma", "v2_eps", "v3_eps", *LEVY_KEYS, *CIR_KEYS))},
}


@dataclass
class RunConfig:
    params: GroupParams
    clock: object
    r: float = 0.0
    spot: float = 1.0
    option_kind: str = "call"
    strike: float = 1.0
    maturity: float = 1.0
    maturities: tuple = DEFAULT_MATURITIES
    log_strikes: Optional[np.ndarray] = None
    lmmr: Optional[np.ndarray] = None
    contour: Optional[Contour] = None
    seed: int = 0
    n_paths: int = 100_000
    precision: int = 12
    free: tuple = ("sigma", "v2_eps", "v3_eps")
    bounds: dict = field(default_factory=dict)
    max_iter: int = 4000

    @property
    def x(self) -> float:
        return math.log(self.spot)


class _Source:
    """Parsed file plus a (section, key) -> line map for error messages."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(text, source=name)
        except configparser.Error as exc:
            raise ConfigError(str(exc).replace("\n", " ")) from None
        self.lines = {}
        section = None
        for lineno, line in enumerate(text.splitlines(), 1):
            head = re.match(r"\s*\[([^\]]+)\]", line)
            if head:
                section = head.group(1).strip().lower()
                self.lines[(section, None)] = lineno
                continue
            item = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
            if item and section:
                self.lines[(section, item.group(1).strip().lower())] = lineno

    def where(self, section, key=None) -> str:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.name}:{line}" if line else self.name

    def error(self, section, key, msg) -> ConfigError:
        label = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{self.where(section, key)}: {label}: {msg}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key):
        return self.parser.get(section, key)

    def number(self, section, key, default=None, cast=float):
        if not self.has(section, key):
            if default is None:
                raise self.error(section, key, "missing required field")
            return default
        try:
            value = cast(self.raw(section, key))
        except ValueError:
            raise self.error(section, key, f"not a number: {self.raw(section, key)!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise self.error(section, key, "must be finite")
        return value

    def numbers(self, section, key):
        parts = [p for p in re.split(r"[,\s]+", self.raw(section, key).strip()) if p]
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise self.error(section, key, f"not a list of numbers: {self.raw(section, key)!r}") from None
        if not all(map(math.isfinite, values)):
            raise self.error(section, key, "values must be finite")
        return values


def _clock_from(src: _Source, base_clock):
    if not src.parser.has_section("clock"):
        if base_clock is None:
            return IdentityClock()
        return base_clock
    kind = src.raw("clock", "kind").strip().lower() if src.has("clock", "kind") else None
    if kind is None:
        raise src.error("clock", "kind", "missing required field")
    if kind not in CLOCK_KEYS:
        raise src.error("clock", "kind", f"unknown clock kind {kind!r}; choose from {sorted(CLOCK_KEYS)}")
    stray = set(src.parser.options("clock")) - {"kind", *CLOCK_KEYS[kind]}
    if stray:
        key = sorted(stray)[0]
        raise src.error("clock", key, f"field not used by a {kind} clock")
    vals = {key: src.number("clock", key) for key in CLOCK_KEYS[kind]}
    try:
        levy = LevyExpCP(*(vals[k] for k in LEVY_KEYS)) if kind in ("levy", "composite") else None
        cir = CIRClock(*(vals[k] for k in CIR_KEYS)) if kind in ("cir", "composite") else None
    except ValueError as exc:
        raise src.error("clock", None, str(exc)) from None
    return {"identity": IdentityClock(), "levy": levy, "cir": cir,
            "composite": CompositeClock(outer=levy, inner=cir) if kind == "composite" else None}[kind]


def parse_config(text: str, name: str = "<config>", preset: Optional[str] = None) -> RunConfig:
    src = _Source(text, name)
    for section in src.parser.sections():
        if section not in KNOWN:
            raise src.error(section, None, f"unknown block; expected one of {sorted(KNOWN)}")
        for key in src.parser.options(section):
            if key not in KNOWN[section]:
                raise src.error(section, key, "unknown field")
    if preset is None and src.has("model", "preset"):
        preset = src.raw("model", "preset").strip()
    base = None
    if preset is not None:
        try:
            base = get_preset(preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None

    model = "model"
    if base is None and not src.parser.has_section(model):
        raise ConfigError(f"{name}: [model] block required when no preset is given")
    dflt = lambda attr, fallback=None: getattr(base.params, attr) if base else fallback
    sigma = src.number(model, "sigma", dflt("sigma"))
    v2 = src.number(model, "v2_eps", dflt("v2_eps", 0.0))
    v3 = src.number(model, "v3_eps", dflt("v3_eps", 0.0))
    try:
        params = GroupParams(sigma=sigma, v2_eps=v2, v3_eps=v3)
    except ValueError as exc:
        raise src.error(model, "sigma", str(exc)) from None
    r = src.number(model, "r", base.r if base else 0.0)
    if r < 0:
        raise src.error(model, "r", "rate must be >= 0")
    spot = src.number(model, "spot", base.spot if base else 1.0)
    if spot <= 0:
        raise src.error(model, "spot", "spot must be > 0")
    cfg = RunConfig(params=params, clock=_clock_from(src, base.clock if base else None), r=r, spot=spot)

    if src.has("option", "kind"):
        cfg.option_kind = src.raw("option", "kind").strip().lower()
        if cfg.option_kind not in ("call", "put"):
            raise src.error("option", "kind", "must be call or put")
    cfg.strike = src.number("option", "strike", spot)
    cfg.maturity = src.number("option", "maturity", 1.0)
    if cfg.strike <= 0:
        raise src.error("option", "strike", "strike must be > 0")
    if cfg.maturity <= 0:
        raise src.error("option", "maturity", "maturity must be > 0")

    if src.has("grid", "maturities"):
        mats = src.numbers("grid", "maturities")
        if not mats:
            raise src.error("grid", "maturities", "empty grid")
        if min(mats) <= 0:
            raise src.error("grid", "maturities", "maturities must be > 0")
        cfg.maturities = tuple(mats)
    if src.has("grid", "log_strikes") and src.has("grid", "lmmr"):
        raise src.error("grid", "lmmr", "give either log_strikes or lmmr, not both")
    if src.has("grid", "log_strikes"):
        ks = src.numbers("grid", "log_strikes")
        if not ks:
            raise src.error("grid", "log_strikes", "empty grid")
        cfg.log_strikes = np.array(ks)
    elif src.has("grid", "lmmr"):
        spec = src.numbers("grid", "lmmr")
        if len(spec) != 3 or spec[2] < 1 or spec[2] != int(spec[2]):
            raise src.error("grid", "lmmr", "expected lo, hi, n with integer n >= 1")
        cfg.lmmr = lmmr_grid(spec[0], spec[1], int(spec[2]))
    else:
        cfg.lmmr = lmmr_grid()

    num = "numerics"
    if any(src.has(num, k) for k in ("omega_i", "truncation", "tolerance")):
        try:
            cfg.contour = Contour(omega_i=src.number(num, "omega_i", -1.0),
                                  truncation=src.number(num, "truncation", 1e3),
                                  tolerance=src.number(num, "tolerance", 1e-9))
        except ValueError as exc:
            raise src.error(num, None, str(exc)) from None
    cfg.seed = src.number(num, "seed", 0, cast=int)
    cfg.n_paths = src.number(num, "n_paths", 100_000, cast=int)
    if cfg.n_paths < 1000:
        raise src.error(num, "n_paths", "need at least 1000 paths")
    cfg.precision = src.number("output", "precision", 12, cast=int)
    if not 1 <= cfg.precision <= 17:
        raise src.error("output", "precision", "precision must be in 1..17")

    cal = "calibrate"
    if src.has(cal, "free"):
        free = tuple(p for p in re.split(r"[,\s]+", src.raw(cal, "free").strip()) if p)
        allowed = {"sigma", "v2_eps", "v3_eps", *clock_param_names(cfg.clock)}
        for p in free:
            if p not in allowed:
                raise src.error(cal, "free", f"{p!r} is not a free parameter of this model")
        if not free:
            raise src.error(cal, "free", "no free parameters")
        cfg.free = free
    for key in src.parser.options(cal) if src.parser.has_section(cal) else ():
        if key.endswith("_bounds"):
            pair = src.numbers(cal, key)
            if len(pair) != 2 or not pair[0] < pair[1]:
                raise src.error(cal, key, "expected lo, hi with lo < hi")
            cfg.bounds[key[: -len("_bounds")]] = tuple(pair)
    cfg.max_iter = src.number(cal, "max_iter", 4000, cast=int)
    return cfg


def clock_param_names(clock) -> tuple:
    if isinstance(clock, LevyExpCP):
        return LEVY_KEYS
    if isinstance(clock, CIRClock):
        return CIR_KEYS
    if isinstance(clock, CompositeClock):
        return LEVY_KEYS + CIR_KEYS
    return ()


def load_config(path: str, preset: Optional[str] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, name=path, preset=preset)
