"""Black-Scholes prices, implied volatility inversion and LMMR surface tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import NumericError, OutOfBand
from .pricing import PricingRequest, price_strikes

VOL_BRACKET = (1e-6, 5.0)
PRICE_TOL = 1e-10


def bs_price(spot, strike, r, t, vol):
    """Black-Scholes call value; vol -> 0 and t -> 0 give the intrinsic limits."""
    spot, strike, r, t, vol = np.broadcast_arrays(*map(np.asarray, (spot, strike, r, t, vol)))
    disc_strike = strike * np.exp(-r * t)
    sd = vol * np.sqrt(t)
    intrinsic = np.maximum(spot - disc_strike, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / disc_strike) + 0.5 * sd * sd) / sd
        value = spot * ndtr(d1) - disc_strike * ndtr(d1 - sd)
    out = np.where(sd > 0, value, intrinsic)
    return out[()] if out.ndim == 0 else out


def implied_vol(price: float, spot: float, strike: float, r: float, t: float) -> float:
    lower = max(spot - strike * math.exp(-r * t), 0.0)
    if not (lower < price < spot):
        raise OutOfBand(f"price {price:.12g} outside no-arbitrage band ({lower:.12g}, {spot:.12g})")
    f = lambda v: float(bs_price(spot, strike, r, t, v)) - price
    lo, hi = VOL_BRACKET
    if f(lo) > 0 or f(hi) < 0:
        raise OutOfBand(f"price {price:.12g} not attained for vol in {VOL_BRACKET}")
    vol = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(vol)) > PRICE_TOL:
        raise NumericError(f"implied vol residual {f(vol):.3e} above {PRICE_TOL}")
    return vol


@dataclass(frozen=True)
class SurfaceRow:
    maturity: float
    log_strike: float
    lmmr: float
    price0: float
    correction: float
    price: float
    implied_vol: Optional[float]
    flag: str = ""


@dataclass
class SurfaceTable:
    rows: list

    def maturities(self):
        return sorted({row.maturity for row in self.rows})

    def slice(self, maturity: float):
        return [row for row in self.rows if row.maturity == maturity]

    def failures(self):
        return [row for row in self.rows if row.flag]


def lmmr_grid(lo: float = -1.0, hi: float = 1.0, n: int = 41) -> np.ndarray:
    return np.linspace(lo, hi, n)


DEFAULT_MATURITIES = (0.125, 0.25, 0.5, 1.0)


def surface(template: PricingRequest, t_grid: Iterable[float],
            k_grid: Optional[Sequence[float]] = None,
            lmmr: Optional[Sequence[float]] = None) -> SurfaceTable:
    """Price and invert a grid of calls.

    Strikes come either from ``k_grid`` (log strikes, shared by all maturities)
    or from ``lmmr`` via k = x + lmmr * t. Cells whose price has no implied
    volatility are kept with an empty vol and a flag.
    """
    t_grid = list(t_grid)
    if not t_grid or (k_grid is None and lmmr is None):
        raise ValueError("surface needs at least one maturity and a strike grid")
    if k_grid is not None and len(k_grid) == 0 or lmmr is not None and len(lmmr) == 0:
        raise ValueError("empty strike grid")
    spot = math.exp(template.x)
    rows = []
    for t in t_grid:
        req = replace(template, t=float(t), payoff_kind="call", payoff=None)
        ks = (np.asarray(k_grid, dtype=float) if k_grid is not None
              else template.x + np.asarray(lmmr, dtype=float) * t)
        try:
            results = price_strikes(req, ks)
        except NumericError as exc:
            rows.extend(SurfaceRow(t, k, (k - template.x) / t, math.nan, math.nan, math.nan,
                                   None, f"pricing:{type(exc).__name__}") for k in ks)
            continue
        for k, res in zip(ks, results):
            vol, flag = None, ""
            try:
                vol = implied_vol(res.total, spot, math.exp(k), req.r, t)
            except NumericError as exc:
                flag = type(exc).__name__
            rows.append(SurfaceRow(float(t), float(k), (float(k) - template.x) / t,
                                   res.p0, res.correction, res.total, vol, flag))
    return SurfaceTable(rows)
