"""Random business clocks and their complex-argument Laplace transforms.

Every clock exposes ``laplace(t, lam) = E[exp(-lam T_t)]``, its derivative in
``lam``, the real lower bound of its admissible half-plane and the probability
mass of a time atom at zero. Arguments broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainViolation


def _check_half_plane(lam, bound: float, what: str):
    lam = np.asarray(lam)
    if np.any(np.real(lam) <= bound):
        worst = float(np.min(np.real(lam)))
        raise DomainViolation(f"{what}: Re(lambda) = {worst:.6g} not above bound {bound:.6g}")


@dataclass(frozen=True)
class IdentityClock:
    """Deterministic calendar clock T_t = t."""

    def lower_bound(self) -> float:
        return -math.inf

    def laplace(self, t, lam):
        return np.exp(-np.asarray(lam) * t)

    def dlaplace(self, t, lam):
        return -t * np.exp(-np.asarray(lam) * t)

    def atom_mass(self, t) -> float:
        return 0.0


@dataclass(frozen=True)
class LevyExpCP:
    """Subordinator gamma*t plus compound Poisson jumps with Exp(jump_rate) sizes."""

    drift: float
    intensity: float
    jump_rate: float

    def __post_init__(self):
        if not self.drift >= 0:
            raise ValueError(f"drift must be >= 0, got {self.drift}")
        if not self.intensity > 0:
            raise ValueError(f"intensity must be > 0, got {self.intensity}")
        if not self.jump_rate > 0:
            raise ValueError(f"jump_rate must be > 0, got {self.jump_rate}")

    def lower_bound(self) -> float:
        return -self.jump_rate

    def exponent(self, lam):
        lam = np.asarray(lam)
        _check_half_plane(lam, -self.jump_rate, "levy exponent")
        return self.drift * lam + self.intensity * lam / (lam + self.jump_rate)

    def exponent_derivative(self, lam):
        lam = np.asarray(lam)
        _check_half_plane(lam, -self.jump_rate, "levy exponent")
        return self.drift + self.intensity * self.jump_rate / (lam + self.jump_rate) ** 2

    def laplace(self, t, lam):
        return np.exp(-self.exponent(lam) * t)

    def dlaplace(self, t, lam):
        return -t * self.exponent_derivative(lam) * np.exp(-self.exponent(lam) * t)

    def atom_mass(self, t) -> float:
        return math.exp(-self.intensity * t) if self.drift == 0 else 0.0


@dataclass(frozen=True)
class GenericLevy:
    """Subordinator given by a user-supplied exponent and its derivative.

    ``jump_intensity`` is the total jump rate when finite; with zero drift it
    determines the atom of T_t at zero.
    """

    exponent_fn: Callable
    derivative_fn: Callable
    bound: float = 0.0
    drift: Optional[float] = None
    jump_intensity: Optional[float] = None

    def lower_bound(self) -> float:
        return self.bound

    def exponent(self, lam):
        _check_half_plane(lam, self.bound, "levy exponent")
        return self.exponent_fn(np.asarray(lam))

    def exponent_derivative(self, lam):
        _check_half_plane(lam, self.bound, "levy exponent")
        return self.derivative_fn(np.asarray(lam))

    def laplace(self, t, lam):
        return np.exp(-self.exponent(lam) * t)

    def dlaplace(self, t, lam):
        return -t * self.exponent_derivative(lam) * np.exp(-self.exponent(lam) * t)

    def atom_mass(self, t) -> float:
        if self.drift == 0 and self.jump_intensity is not None:
            return math.exp(-self.jump_intensity * t)
        return 0.0


@dataclass(frozen=True)
class CIRClock:
    """Integrated CIR rate, T_t = int_0^t Z_s ds with dZ = kappa(theta - Z)dt + sqrt(vol2 Z) dW."""

    kappa: float
    theta: float
    vol2: float
    z0: float

    def __post_init__(self):
        for name in ("kappa", "theta", "vol2", "z0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if 2 * self.kappa * self.theta < self.vol2:
            raise ValueError("Feller condition 2*kappa*theta >= vol2 violated")

    def lower_bound(self) -> float:
        return -self.kappa ** 2 / (2.0 * self.vol2)

    def _parts(self, t, lam):
        lam = np.asarray(lam, dtype=complex)
        _check_half_plane(lam, self.lower_bound(), "CIR laplace")
        kap = self.kappa
        # Re(kappa^2 + 2 vol2 lam) > 0 in the domain, so the principal root has Re > 0.
        gamma_bar = np.sqrt(kap * kap + 2.0 * self.vol2 * lam)
        decay = np.exp(-gamma_bar * t)
        ratio = (gamma_bar - kap) / (gamma_bar + kap)   # |ratio| < 1
        denom = (gamma_bar - kap) * decay + gamma_bar + kap
        log_r = (np.log(2.0 * gamma_bar) + 0.5 * (kap - gamma_bar) * t
                 - np.log(gamma_bar + kap) - np.log1p(ratio * decay))
        cir_U = -2.0 / self.vol2 * log_r
        cir_V = 2.0 * lam * (1.0 - decay) / denom
        return lam, gamma_bar, decay, denom, log_r, cir_U, cir_V

    def laplace(self, t, lam):
        _, _, _, _, _, cir_U, cir_V = self._parts(t, lam)
        return np.exp(-self.kappa * self.theta * cir_U - self.z0 * cir_V)

    def dlaplace(self, t, lam):
        lam, g, decay, denom, _, cir_U, cir_V = self._parts(t, lam)
        kap = self.kappa
        dg = self.vol2 / g
        ddenom = 1.0 + decay - t * (g - kap) * decay
        dlog_r = 1.0 / g - 0.5 * t - ddenom / denom
        dU = -2.0 / g * dlog_r
        dV = (2.0 * (1.0 - decay) / denom
              + 2.0 * lam * dg * (t * decay * denom - (1.0 - decay) * ddenom) / denom ** 2)
        value = np.exp(-kap * self.theta * cir_U - self.z0 * cir_V)
        return value * (-kap * self.theta * dU - self.z0 * dV)

    def atom_mass(self, t) -> float:
        return 0.0

    def mean(self, t) -> float:
        """E[T_t] from the CIR mean ODE."""
        kap = self.kappa
        return self.theta * t + (self.z0 - self.theta) * (1.0 - math.exp(-kap * t)) / kap


LevyClock = Union[LevyExpCP, GenericLevy]


@dataclass(frozen=True)
class CompositeClock:
    """Subordinator run on the integrated-CIR clock: T3_t = T1 evaluated at T2_t."""

    outer: LevyClock
    inner: CIRClock

    def lower_bound(self) -> float:
        # Re(phi(lam)) >= phi(Re lam) for subordinators, so a real root is a safe bound.
        target = self.inner.lower_bound()
        lo = self.outer.lower_bound()
        width = max(1.0, abs(lo)) if math.isfinite(lo) else 1.0
        a = lo + 1e-12 * width if math.isfinite(lo) else -width
        while not math.isfinite(lo) and float(np.real(self.outer.exponent(a))) > target:
            a *= 2.0
        phi = lambda s: float(np.real(self.outer.exponent(s))) - target
        if phi(a) > 0:
            return lo
        return brentq(phi, a, 0.0, xtol=1e-14, rtol=1e-14)

    def _inner_arg(self, lam):
        phi = self.outer.exponent(lam)
        _check_half_plane(phi, self.inner.lower_bound(), "composite clock (phi(lambda))")
        return phi

    def laplace(self, t, lam):
        return self.inner.laplace(t, self._inner_arg(lam))

    def dlaplace(self, t, lam):
        phi = self._inner_arg(lam)
        return self.inner.dlaplace(t, phi) * self.outer.exponent_derivative(lam)

    def atom_mass(self, t) -> float:
        intensity = None
        if isinstance(self.outer, LevyExpCP) and self.outer.drift == 0:
            intensity = self.outer.intensity
        elif isinstance(self.outer, GenericLevy) and self.outer.drift == 0:
            intensity = self.outer.jump_intensity
        if intensity is None:
            return 0.0
        return float(np.real(self.inner.laplace(t, intensity)))


Clock = Union[IdentityClock, LevyExpCP, GenericLevy, CIRClock, CompositeClock]


def levy_exponent(params: LevyClock, lam):
    return params.exponent(lam)


def levy_exponent_derivative(params: LevyClock, lam):
    return params.exponent_derivative(lam)


def cir_laplace(clock: CIRClock, t, lam):
    return clock.laplace(t, lam)


def laplace(clock: Clock, t, lam):
    """E[exp(-lam T_t)] for any clock."""
    return clock.laplace(t, lam)


def weighted_laplace(clock: Clock, t, lam0, lam1_scaled):
    """E[(-lam1_scaled T_t) exp(-lam0 T_t)] = lam1_scaled * d/dlam E[exp(-lam T_t)] at lam0."""
    return np.asarray(lam1_scaled) * clock.dlaplace(t, lam0)


def admissible_real_lower_bound(clock: Clock) -> float:
    return clock.lower_bound()


def atom_mass(clock: Clock, t) -> float:
    """P(T_t = 0)."""
    return clock.atom_mass(t)
