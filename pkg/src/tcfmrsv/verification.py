"""Oracle checks behind ``tcfmrsv verify``.

Each check returns its worst residual; it passes when that residual is at
most the tolerance. Tolerances can be overridden by check name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .impliedvol import bs_price
from .mc_oracle import (FullModelSpec, group_params_from_model, mc_price_order0_strikes,
                        mc_weighted_laplace, shooting_phi_prime)
from .presets import PRESETS
from .pricing import PricingRequest, price, price_strikes
from .spectral import Contour, GroupParams, eigenvalue0, eigenvalue1_scaled
from .timechange import CIRClock, CompositeClock, IdentityClock, LevyExpCP


@dataclass(frozen=True)
class Outcome:
    name: str
    residual: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


FD_CLOCKS = {
    "identity": IdentityClock(),
    "levy": PRESETS["fig2"].clock,
    "cir": PRESETS["fig3"].clock,
    "composite": PRESETS["fig4"].clock,
}


def bs_degeneration(**_):
    params = GroupParams(sigma=0.34)
    worst = 0.0
    for t in (0.25, 1.0, 2.0):
        ks = np.linspace(-0.4, 0.4, 5)
        req = PricingRequest(x=0.0, k=0.0, r=0.0, t=t, params=params)
        got = np.array([res.total for res in price_strikes(req, ks)])
        want = bs_price(1.0, np.exp(ks), 0.0, t, 0.34)
        worst = max(worst, float(np.max(np.abs(got / want - 1.0))))
    return worst, "relative error, 5 strikes x 3 maturities"


def put_call_parity(**_):
    worst = 0.0
    ks = np.linspace(-0.3, 0.3, 5)
    for preset in PRESETS.values():
        for t in (0.25, 0.5, 1.0):
            req = PricingRequest(x=0.0, k=0.0, r=0.02, t=t, params=preset.params, clock=preset.clock)
            calls = price_strikes(req, ks)
            puts = price_strikes(replace(req, payoff_kind="put"), ks)
            for k, c, p in zip(ks, calls, puts):
                gap = c.total - p.total - (1.0 - math.exp(k - req.r * t))
                worst = max(worst, abs(gap))
    return worst, "|call - put - forward parity|, 4 presets x 15 cells"


def random_domain_points(clock, rng, n=100):
    bound = clock.lower_bound()
    lo = bound + 0.05 * max(1.0, abs(bound)) if math.isfinite(bound) else -2.0
    re = rng.uniform(lo, lo + 4.0, n)
    im = rng.uniform(-5.0, 5.0, n)
    return re + 1j * im


def laplace_derivative(seed=0, **_):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for clock in FD_CLOCKS.values():
        for lam in random_domain_points(clock, rng):
            step = 1e-5 * max(1.0, abs(lam))
            fd = (clock.laplace(1.0, lam + step) - clock.laplace(1.0, lam - step)) / (2 * step)
            exact = clock.dlaplace(1.0, lam)
            worst = max(worst, abs(exact - fd) / max(abs(exact), 1e-300))
    return worst, "relative gap to central differences, 100 points per clock"


def mc_order0(seed=0, n_paths=100_000, **_):
    worst = 0.0
    for name in ("fig2", "fig3", "fig4"):
        preset = PRESETS[name]
        for t in (0.25, 1.0):
            req = PricingRequest(x=0.0, k=0.0, r=0.0, t=t, params=preset.params, clock=preset.clock)
            ks = [-0.2, 0.0, 0.2]
            mc = mc_price_order0_strikes(req, ks, n_paths, seed)
            for res, (mean, se) in zip(price_strikes(req, ks), mc):
                worst = max(worst, abs(res.p0 - mean) / se)
    return worst, "max |analytic - MC| in standard errors"


def mc_weighted(seed=0, n_paths=100_000, **_):
    worst = 0.0
    params = PRESETS["fig1"].params
    for clock in (FD_CLOCKS["levy"], FD_CLOCKS["cir"], FD_CLOCKS["composite"]):
        lam1 = complex(eigenvalue1_scaled(0.3j - 0.1, params))
        mean, se = mc_weighted_laplace(clock, 1.0, 0.3, lam1, n_paths, seed)
        exact = lam1 * clock.dlaplace(1.0, 0.3)
        worst = max(worst, abs(mean - exact) / se)
    return worst, "max weighted-laplace gap in standard errors, real lam0 = 0.3"


def imaginary_residual(**_):
    worst = 0.0
    for preset in PRESETS.values():
        req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.5, params=preset.params, clock=preset.clock)
        for res in price_strikes(req, [-0.2, 0.0, 0.2]):
            worst = max(worst, res.imag_residual / max(1.0, abs(res.total)))
    return worst, "imaginary part of the folded integral"


def contour_independence(**_):
    worst = 0.0
    for preset in PRESETS.values():
        req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.5, params=preset.params, clock=preset.clock)
        a = price_strikes(req, [-0.2, 0.0, 0.2], Contour(omega_i=-0.8, tolerance=1e-12))
        b = price_strikes(req, [-0.2, 0.0, 0.2], Contour(omega_i=-1.2, tolerance=1e-12))
        for ra, rb in zip(a, b):
            worst = max(worst, abs(ra.total - rb.total) / abs(rb.total))
    return worst, "relative price change between omega_i = -0.8 and -1.2"


def centering(**_):
    _, sol = group_params_from_model(FullModelSpec())
    return abs(sol.centering_residual), "centering residual of the Poisson source"


def poisson_shooting(**_):
    spec = FullModelSpec()
    _, sol = group_params_from_model(spec)
    ys = np.linspace(spec.m - 4 * spec.nu, spec.m + 4 * spec.nu, 81)
    gap = np.max(np.abs(sol.phi_prime(ys) - shooting_phi_prime(spec, ys)))
    return float(gap), "phi' integrating factor vs ODE shooting on [m-4nu, m+4nu]"


CHECKS: dict = {
    "bs_degeneration": (bs_degeneration, 1e-6),
    "put_call_parity": (put_call_parity, 1e-10),
    "laplace_derivative": (laplace_derivative, 1e-6),
    "mc_order0": (mc_order0, 3.0),
    "mc_weighted_laplace": (mc_weighted, 3.0),
    "imaginary_residual": (imaginary_residual, 1e-10),
    "contour_independence": (contour_independence, 1e-8),
    "centering": (centering, 1e-8),
    "poisson_shooting": (poisson_shooting, 1e-6),
}


def run_all(seed: int = 0, n_paths: int = 100_000, tolerances=None) -> list:
    tolerances = tolerances or {}
    outcomes = []
    for name, (check, tol) in CHECKS.items():
        residual, detail = check(seed=seed, n_paths=n_paths)
        outcomes.append(Outcome(name, float(residual), float(tolerances.get(name, tol)), detail))
    return outcomes
