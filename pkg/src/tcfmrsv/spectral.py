"""Order-zero eigen system, scaled eigenvalue correction and payoff coefficients.

All functions broadcast over numpy arrays of the spectral variable ``omega``,
which is complex once the integration line is shifted off the real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContourViolation, NonConvergent, PoleHit
from .quadrature import integrate_adaptive

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GroupParams:
    """Observable triple fixing the asymptotic price.

    ``v2_eps`` and ``v3_eps`` already carry the sqrt(eps) factor, so the time
    scale of the fast factor never appears on its own.
    """

    sigma: float
    v2_eps: float = 0.0
    v3_eps: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not (np.isfinite(self.v2_eps) and np.isfinite(self.v3_eps)):
            raise ValueError("v2_eps and v3_eps must be finite")


@dataclass(frozen=True)
class Contour:
    """Horizontal integration line omega = omega_r + i*omega_i, |omega_r| <= truncation.

    ``tolerance`` is the absolute quadrature tolerance per unit of spot.
    """

    omega_i: float = -1.0
    truncation: float = 1e3
    tolerance: float = 1e-9

    def __post_init__(self):
        if not np.isfinite(self.omega_i):
            raise ValueError("omega_i must be finite")
        if not self.truncation > 0:
            raise ValueError("truncation must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class EigenData:
    lambda0: complex
    lambda1_scaled: complex


def eigenvalue0(omega, sigma: float):
    """(sigma^2 / 2)(omega^2 + 1/4)."""
    omega = np.asarray(omega)
    return 0.5 * sigma * sigma * (omega * omega + 0.25)


def eigenvalue1_scaled(omega, params: GroupParams):
    """sqrt(eps) times the first eigenvalue correction; linear in (v2_eps, v3_eps)."""
    u = 1j * np.asarray(omega) + 0.5
    u2 = u * u
    return -params.v3_eps * (u2 * u - u2) - params.v2_eps * (u2 - u)


def eigen_data(omega: complex, params: GroupParams) -> EigenData:
    return EigenData(complex(eigenvalue0(omega, params.sigma)),
                     complex(eigenvalue1_scaled(omega, params)))


def eigenfunction0(omega, x):
    return INV_SQRT_2PI * np.exp((1j * np.asarray(omega) + 0.5) * np.asarray(x))


def call_coefficient(omega, t: float, k, r: float):
    """Inner product of the call payoff (e^{rt+x} - e^k)^+ with the eigenfunction.

    Converges only for Im(omega) < -1/2. Written in forward-strike form
    e^{rt} * C(k - rt; r=0), which equals the defining integral for every r.
    """
    omega = np.asarray(omega, dtype=complex)
    if np.any(omega.imag >= -0.5):
        raise ContourViolation("call coefficient needs Im(omega) < -1/2")
    denom = 1.0 + 4.0 * omega * omega
    if np.any(denom == 0):
        raise PoleHit("omega = +-i/2 is a pole of the call coefficient")
    kf = np.asarray(k) - r * t
    return -4.0 * INV_SQRT_2PI * np.exp(r * t + kf * (0.5 - 1j * omega)) / denom


def generic_coefficient(payoff: Callable, t: float, r: float, omega,
                        x_window=(-40.0, 40.0), abs_tol: float = 1e-10,
                        edge_tol: float = 1e-12, max_half_width: float = 640.0):
    """Payoff coefficient by adaptive quadrature over log-price.

    ``payoff`` maps an array of prices to payoff values. The window is doubled
    until the weighted integrand is below ``edge_tol`` at both ends.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=complex))
    expo = -1j * omega - 0.5

    def integrand(x):
        x = np.asarray(x)[:, None]
        h = np.asarray(payoff(np.exp(r * t + x)), dtype=float)
        return INV_SQRT_2PI * np.exp(expo[None, :] * x) * h

    lo, hi = map(float, x_window)
    while True:
        edges = integrand(np.array([lo, hi]))
        left, right = np.max(np.abs(edges[0])), np.max(np.abs(edges[1]))
        if left < edge_tol and right < edge_tol:
            break
        if max(-lo, hi) >= max_half_width:
            raise NonConvergent(
                f"coefficient integrand still {max(left, right):.3e} at x-window edge {lo, hi}"
            )
        if left >= edge_tol:
            lo *= 2.0
        if right >= edge_tol:
            hi *= 2.0
    res = integrate_adaptive(integrand, lo, hi, abs_tol=abs_tol, n_initial=32)
    return res.value
