"""Weighted implied-vol least squares over group and clock parameters."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, NumericError
from .impliedvol import implied_vol
from .pricing import PricingRequest, price_strikes
from .spectral import GroupParams
from .timechange import CIRClock, CompositeClock, LevyExpCP

GROUP_NAMES = ("sigma", "v2_eps", "v3_eps")
DEFAULT_BOUNDS = {
    "sigma": (1e-3, 3.0), "v2_eps": (-1.0, 1.0), "v3_eps": (-1.0, 1.0),
    "drift": (0.0, 5.0), "intensity": (1e-6, 20.0), "jump_rate": (1e-3, 50.0),
    "kappa": (1e-3, 20.0), "theta": (1e-3, 10.0), "vol2": (1e-4, 20.0), "z0": (1e-3, 20.0),
}
# Added per quote whose model price has no implied vol.
OUT_OF_BAND_PENALTY = 1.0


@dataclass(frozen=True)
class Quote:
    maturity: float
    strike: float
    implied_vol: float
    weight: float = 1.0


@dataclass(frozen=True)
class CalibrationProblem:
    quotes: tuple
    free_params: tuple
    bounds: dict

    def __post_init__(self):
        if len(self.quotes) < len(self.free_params):
            raise ConfigError(f"{len(self.quotes)} quotes cannot pin down "
                              f"{len(self.free_params)} free parameters")
        for q in self.quotes:
            if not q.weight > 0:
                raise ConfigError(f"quote weight must be > 0, got {q.weight}")
            if not (q.maturity > 0 and q.strike > 0 and q.implied_vol > 0):
                raise ConfigError(f"invalid quote {q}")
        for p in self.free_params:
            lo, hi = self.bounds[p]
            if not lo < hi:
                raise ConfigError(f"empty bounds for {p}")


@dataclass
class CalibrationResult:
    values: dict
    rmse: float
    iterations: int
    converged: bool
    residuals: np.ndarray
    message: str = ""


def read_quotes(path: str) -> list:
    """CSV with columns maturity, strike, implied_vol and optional weight."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read quotes {path}: {exc.strerror}") from None
    quotes = []
    for lineno, row in enumerate(rows, 2):
        try:
            quotes.append(Quote(float(row["maturity"]), float(row["strike"]),
                                float(row["implied_vol"]), float(row.get("weight") or 1.0)))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{path}:{lineno}: expected maturity,strike,implied_vol[,weight]") from None
    return quotes


def apply_params(params: GroupParams, clock, values: dict):
    """New (GroupParams, clock) with ``values`` substituted by name."""
    group = {k: v for k, v in values.items() if k in GROUP_NAMES}
    rest = {k: v for k, v in values.items() if k not in GROUP_NAMES}
    params = replace(params, **group) if group else params
    if not rest:
        return params, clock
    if isinstance(clock, CompositeClock):
        outer = {k: v for k, v in rest.items() if hasattr(clock.outer, k)}
        inner = {k: v for k, v in rest.items() if hasattr(clock.inner, k)}
        return params, CompositeClock(outer=replace(clock.outer, **outer),
                                      inner=replace(clock.inner, **inner))
    if isinstance(clock, (LevyExpCP, CIRClock)):
        return params, replace(clock, **rest)
    raise ConfigError(f"clock {type(clock).__name__} has no parameters {sorted(rest)}")


def model_vols(params: GroupParams, clock, quotes: Sequence[Quote], x: float, r: float):
    """Model implied vols per quote; NaN where the price has none."""
    out = np.full(len(quotes), math.nan)
    spot = math.exp(x)
    by_t = {}
    for i, q in enumerate(quotes):
        by_t.setdefault(q.maturity, []).append(i)
    for t, idx in by_t.items():
        req = PricingRequest(x=x, k=0.0, r=r, t=t, params=params, clock=clock)
        ks = [math.log(quotes[i].strike) for i in idx]
        for i, res in zip(idx, price_strikes(req, ks)):
            try:
                out[i] = implied_vol(res.total, spot, quotes[i].strike, r, t)
            except NumericError:
                pass
    return out


def calibrate(problem: CalibrationProblem, params: GroupParams, clock, x: float = 0.0,
              r: float = 0.0, max_iter: int = 4000) -> CalibrationResult:
    """Nelder-Mead on box-projected parameters, starting from ``params``/``clock``.

    Iterates are clipped to the bounds before every evaluation, so the simplex
    may wander outside while the model only sees admissible values.
    """
    names = problem.free_params
    lo = np.array([problem.bounds[n][0] for n in names])
    hi = np.array([problem.bounds[n][1] for n in names])
    quotes = problem.quotes
    target = np.array([q.implied_vol for q in quotes])
    weights = np.array([q.weight for q in quotes])

    def start_value(name):
        if name in GROUP_NAMES:
            return getattr(params, name)
        for part in (clock, getattr(clock, "outer", None), getattr(clock, "inner", None)):
            if part is not None and hasattr(part, name):
                return getattr(part, name)
        raise ConfigError(f"unknown parameter {name}")

    x0 = np.clip([start_value(n) for n in names], lo, hi)

    def residuals(theta):
        values = dict(zip(names, np.clip(theta, lo, hi)))
        try:
            p, c = apply_params(params, clock, values)
            vols = model_vols(p, c, quotes, x, r)
        except (ValueError, NumericError):
            return None
        return vols - target

    def objective(theta):
        res = residuals(theta)
        if res is None:
            return OUT_OF_BAND_PENALTY * len(quotes)
        bad = ~np.isfinite(res)
        return float(np.sum(weights[~bad] * res[~bad] ** 2) + OUT_OF_BAND_PENALTY * bad.sum())

    opt = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-16,
                            "adaptive": len(names) > 3})
    best = np.clip(opt.x, lo, hi)
    res = residuals(best)
    if res is None:
        res = np.full(len(quotes), math.nan)
    finite = np.isfinite(res)
    rmse = (math.sqrt(np.sum(weights[finite] * res[finite] ** 2) / np.sum(weights[finite]))
            if finite.any() else math.nan)
    return CalibrationResult(values=dict(zip(names, map(float, best))), rmse=rmse,
                             iterations=int(opt.nit), converged=bool(opt.success),
                             residuals=res, message=str(opt.message))
