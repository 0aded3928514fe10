"""Asymptotic option prices from the shifted-contour spectral integral.

The order-zero price and the sqrt(eps) correction are integrated together
along omega_r >= 0 using the Hermitian symmetry of the integrand; the
imaginary part of the folded integral is kept as a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import spectral
from .errors import ContourViolation, NumericError
from .quadrature import integrate_to_tail
from .spectral import Contour, GroupParams
from .timechange import Clock, IdentityClock

CALL_STRIP = (-math.inf, -0.5)
MARGIN = 0.1
# With zero drift the atom-free remainder decays only like omega^-4.
ATOM_TRUNCATION = 1e5


@dataclass(frozen=True)
class Payoff:
    """Custom European payoff h(S).

    ``strip`` is the open interval of Im(omega) on which the coefficient
    integral of ``func - offset`` converges; the constant ``offset`` is priced
    in closed form (the correction annihilates constants).
    """

    func: Callable[[np.ndarray], np.ndarray]
    strip: tuple = CALL_STRIP
    offset: float = 0.0

    def __post_init__(self):
        lo, hi = self.strip
        if not lo < hi:
            raise ValueError(f"empty convergence strip {self.strip}")

    def reduced(self, s):
        return np.asarray(self.func(s), dtype=float) - self.offset


@dataclass(frozen=True)
class PricingRequest:
    x: float
    k: float
    r: float
    t: float
    params: GroupParams
    clock: Clock = field(default_factory=IdentityClock)
    payoff_kind: str = "call"
    payoff: Optional[Payoff] = None

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"maturity must be > 0, got {self.t}")
        if not self.r >= 0:
            raise ValueError(f"rate must be >= 0, got {self.r}")
        if self.payoff_kind not in ("call", "put", "custom"):
            raise ValueError(f"unknown payoff kind {self.payoff_kind!r}")
        if self.payoff_kind == "custom" and self.payoff is None:
            raise ValueError("custom payoff_kind needs a Payoff")


@dataclass(frozen=True)
class PriceResult:
    p0: float
    correction: float
    total: float
    imag_residual: float
    contour_used: Contour
    n_evals: int
    error_estimate: float = 0.0


def _min_real_lambda0(sigma: float, omega_i: float) -> float:
    return 0.5 * sigma * sigma * (0.25 - omega_i * omega_i)


def choose_contour(params: GroupParams, clock: Clock, strip=CALL_STRIP,
                   start: float = -1.0, **contour_kw) -> Contour:
    """Pick omega_i inside ``strip`` whose eigenvalue line clears the clock bound.

    The minimum over omega_r of Re(lambda0) must exceed the clock's admissible
    lower bound with a 10% margin. Starting from ``start`` (clipped into the
    strip), omega_i is bisected toward the strip point nearest zero, where
    Re(lambda0) is largest.
    """
    lo, hi = strip
    bound = clock.lower_bound()
    target = min(max(0.0, lo), hi)
    if lo < start < hi:
        omega_i = start
    elif math.isfinite(lo) and math.isfinite(hi):
        omega_i = 0.5 * (lo + hi)
    else:
        omega_i = target - 0.5 if math.isfinite(hi) else target + 0.5
    if bound == -math.inf:
        return Contour(omega_i=omega_i, **contour_kw)
    if bound >= 0:
        raise NumericError(f"clock reports a nonnegative admissible bound {bound}")
    for _ in range(200):
        if _min_real_lambda0(params.sigma, omega_i) > (1.0 - MARGIN) * bound:
            return Contour(omega_i=omega_i, **contour_kw)
        omega_i = 0.5 * (omega_i + target)
    raise NumericError("no admissible contour found")


def _strip_of(req: PricingRequest):
    return req.payoff.strip if req.payoff_kind == "custom" else CALL_STRIP


def _coefficients(req: PricingRequest, omega, ks):
    """Payoff coefficients, shape (len(omega), len(ks))."""
    omega = np.asarray(omega)
    if req.payoff_kind == "custom":
        coef = spectral.generic_coefficient(req.payoff.reduced, req.t, req.r, omega)
        return np.broadcast_to(coef[:, None], (omega.size, len(ks)))
    return spectral.call_coefficient(omega[:, None], req.t, np.asarray(ks)[None, :], req.r)


def _atom_payoff(req: PricingRequest, ks):
    fwd = math.exp(req.r * req.t + req.x)
    if req.payoff_kind == "custom":
        return np.full(len(ks), float(req.payoff.reduced(np.array([fwd]))[0]))
    return np.maximum(fwd - np.exp(np.asarray(ks)), 0.0)


def _spectral_prices(req: PricingRequest, ks: Sequence[float], contour: Contour):
    """Return (p0, correction, imag_residual, error, n_evals) arrays over strikes ``ks``."""
    lo, hi = _strip_of(req)
    if not lo < contour.omega_i < hi:
        raise ContourViolation(
            f"omega_i = {contour.omega_i} outside the payoff's convergence strip {lo, hi}"
        )
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    nk = ks.size
    t, x, params, clock = req.t, req.x, req.params, req.clock
    atom = clock.atom_mass(t)

    def side(omega):
        lam0 = spectral.eigenvalue0(omega, params.sigma)
        lam1 = spectral.eigenvalue1_scaled(omega, params)
        trans = clock.laplace(t, lam0)
        if atom:
            trans = trans - atom
        weighted = lam1 * clock.dlaplace(t, lam0)
        base = _coefficients(req, omega, ks) * spectral.eigenfunction0(omega, x)[:, None]
        return np.concatenate([base * trans[:, None], base * weighted[:, None]], axis=1)

    def integrand(omega_r):
        return (side(omega_r + 1j * contour.omega_i)
                + side(-omega_r + 1j * contour.omega_i))

    scale = math.exp(x)
    res = integrate_to_tail(integrand, 0.0, abs_tol=contour.tolerance * scale,
                            cap=contour.truncation)
    disc = math.exp(-req.r * t)
    raw = disc * res.value
    p0 = raw[:nk].real
    corr = raw[nk:].real
    imag = np.maximum(np.abs(raw[:nk].imag), np.abs(raw[nk:].imag))
    if atom:
        p0 = p0 + atom * disc * _atom_payoff(req, ks)
    if req.payoff_kind == "custom" and req.payoff.offset:
        p0 = p0 + disc * req.payoff.offset
    return p0, corr, imag, disc * res.error, 2 * res.n_evals


def _resolve_contour(req: PricingRequest, contour: Optional[Contour]) -> Contour:
    if contour is None:
        kw = {"truncation": ATOM_TRUNCATION} if req.clock.atom_mass(req.t) else {}
        return choose_contour(req.params, req.clock, _strip_of(req), **kw)
    return contour


def price_strikes(req: PricingRequest, ks: Sequence[float],
                  contour: Optional[Contour] = None) -> list[PriceResult]:
    """Price one maturity across many log-strikes with a single vector quadrature."""
    contour = _resolve_contour(req, contour)
    call_req = replace(req, payoff_kind="call") if req.payoff_kind == "put" else req
    p0, corr, imag, err, n_evals = _spectral_prices(call_req, ks, contour)
    if req.payoff_kind == "put":
        # Parity is exact for both orders: the correction operator kills e^x and constants.
        p0 = p0 - math.exp(req.x) + np.exp(np.asarray(ks) - req.r * req.t)
    return [
        PriceResult(p0=float(a), correction=float(b), total=float(a + b),
                    imag_residual=float(c), contour_used=contour, n_evals=n_evals,
                    error_estimate=float(err))
        for a, b, c in zip(p0, corr, imag)
    ]


def price(req: PricingRequest, contour: Optional[Contour] = None) -> PriceResult:
    return price_strikes(req, [req.k], contour)[0]


def price_order0(req: PricingRequest, contour: Optional[Contour] = None) -> complex:
    res = price(req, contour)
    return complex(res.p0, res.imag_residual)


def price_correction(req: PricingRequest, contour: Optional[Contour] = None) -> complex:
    res = price(req, contour)
    return complex(res.correction, 0.0)
