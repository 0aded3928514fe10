"""Independent Monte-Carlo and quadrature oracles.

Random streams are counter based: paths are grouped into fixed blocks of
``BLOCK`` and block ``b`` draws from ``SeedSequence(seed, spawn_key=(b,))``,
so results depend only on (seed, n_paths) and not on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import ndtr, roots_hermitenorm, roots_legendre

from .errors import QuadratureFailure, StepTooCoarse
from .pricing import PricingRequest
from .spectral import GroupParams
from .timechange import (CIRClock, Clock, CompositeClock, IdentityClock,
                         LevyExpCP)

BLOCK = 8192
CIR_STEPS = 2000
MAX_DT_FACTOR = 1.0 / 50.0


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int):
    for b, start in enumerate(range(0, n_paths, BLOCK)):
        yield b, min(BLOCK, n_paths - start)


def _mean_stderr(samples: np.ndarray):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    var = np.sum(np.abs(samples - mean) ** 2, axis=0) / max(n - 1, 1)
    return mean, float(np.sqrt(var / n))


# ---------------------------------------------------------------- clocks

def _sample_cir(clock: CIRClock, t: float, rng, size: int, steps: int = CIR_STEPS):
    """Trapezoid integral of a full-truncation Euler CIR path."""
    dt = t / steps
    sq = math.sqrt(dt)
    sig = math.sqrt(clock.vol2)
    z = np.full(size, clock.z0)
    zp = z.copy()
    total = 0.5 * z.copy()
    for i in range(steps):
        zp = np.maximum(z, 0.0)
        z = z + clock.kappa * (clock.theta - zp) * dt + sig * np.sqrt(zp) * sq * rng.standard_normal(size)
        total += np.maximum(z, 0.0) if i < steps - 1 else 0.5 * np.maximum(z, 0.0)
    return total * dt


def _sample_levy(clock: LevyExpCP, horizon, rng, size: int):
    horizon = np.broadcast_to(np.asarray(horizon, dtype=float), (size,))
    n_jumps = rng.poisson(clock.intensity * horizon)
    jumps = np.zeros(size)
    hit = n_jumps > 0
    jumps[hit] = rng.gamma(n_jumps[hit], 1.0 / clock.jump_rate)
    return clock.drift * horizon + jumps


def sample_clock(clock: Clock, t: float, rng: np.random.Generator, size: Optional[int] = None):
    """Draw T_t; a scalar when ``size`` is None."""
    n = 1 if size is None else size
    if isinstance(clock, IdentityClock):
        out = np.full(n, float(t))
    elif isinstance(clock, LevyExpCP):
        out = _sample_levy(clock, t, rng, n)
    elif isinstance(clock, CIRClock):
        out = _sample_cir(clock, t, rng, n)
    elif isinstance(clock, CompositeClock):
        if not isinstance(clock.outer, LevyExpCP):
            raise NotImplementedError("sampling needs a compound-Poisson outer clock")
        out = _sample_levy(clock.outer, _sample_cir(clock.inner, t, rng, n), rng, n)
    else:
        raise NotImplementedError(f"no sampler for {type(clock).__name__}")
    return float(out[0]) if size is None else out


def clock_samples(clock: Clock, t: float, n_paths: int, seed: int) -> np.ndarray:
    """n_paths draws of T_t under the block-stream contract."""
    return np.concatenate([sample_clock(clock, t, block_rng(seed, b), size)
                           for b, size in _blocks(n_paths)])


# ---------------------------------------------------------------- order-zero oracle

def conditional_bs_value(T, x, t, k, r, sigma, put: bool = False):
    """E[h(e^{rt+X_T})] for X_T ~ N(x - sigma^2 T/2, sigma^2 T), undiscounted."""
    T = np.asarray(T, dtype=float)
    fwd = math.exp(r * t + x)
    strike = math.exp(k)
    sd = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (r * t + x - k + 0.5 * sd * sd) / sd
        if put:
            val = strike * ndtr(-(d1 - sd)) - fwd * ndtr(-d1)
        else:
            val = fwd * ndtr(d1) - strike * ndtr(d1 - sd)
    intrinsic = max(strike - fwd, 0.0) if put else max(fwd - strike, 0.0)
    return np.where(sd > 0, val, intrinsic)


def _composite_normal_rule(half_width: float = 12.0, panels: int = 120, order: int = 10):
    """Nodes and weights integrating against the standard normal density on [-w, w]."""
    nodes, weights = roots_legendre(order)
    edges = np.linspace(-half_width, half_width, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    z = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half * nodes
    w = half * weights * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z.ravel(), w.ravel()


# Gauss-Hermite misses steep payoffs at large variance; panels resolve them.
_NORMAL_Z, _NORMAL_W = _composite_normal_rule()


def conditional_payoff_value(T, x, t, r, sigma, payoff: Callable, chunk: int = 2048):
    """Same conditional expectation for an arbitrary smooth payoff."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    out = np.empty(T.shape)
    flat, res = T.ravel(), out.reshape(-1)
    for lo in range(0, flat.size, chunk):
        Tc = flat[lo:lo + chunk, None]
        logs = r * t + x - 0.5 * sigma ** 2 * Tc + sigma * np.sqrt(Tc) * _NORMAL_Z
        res[lo:lo + chunk] = np.asarray(payoff(np.exp(logs))) @ _NORMAL_W
    return out


def _order0_payoff_values(req: PricingRequest, T):
    if req.payoff_kind == "custom":
        return conditional_payoff_value(T, req.x, req.t, req.r, req.params.sigma, req.payoff.func)
    return conditional_bs_value(T, req.x, req.t, req.k, req.r, req.params.sigma,
                                put=req.payoff_kind == "put")


def mc_price_order0(req: PricingRequest, n_paths: int, seed: int):
    """(mean, stderr) of exp(-rt) E[u0(T_t)] over sampled clocks."""
    (mean, se), = mc_price_order0_strikes(req, [req.k], n_paths, seed)
    return mean, se


def mc_price_order0_strikes(req: PricingRequest, ks, n_paths: int, seed: int):
    """Like mc_price_order0 for several log-strikes sharing one set of clock draws."""
    if n_paths < 1000:
        raise ValueError("n_paths must be >= 1000")
    T = clock_samples(req.clock, req.t, n_paths, seed)
    disc = math.exp(-req.r * req.t)
    out = []
    for k in ks:
        vals = disc * _order0_payoff_values(replace(req, k=float(k)), T)
        mean, se = _mean_stderr(vals)
        out.append((float(mean), se))
    return out


def mc_weighted_laplace(clock: Clock, t: float, lam0, lam1_scaled, n_paths: int, seed: int):
    """(mean, stderr) of (-lam1_scaled T) exp(-lam0 T)."""
    T = clock_samples(clock, t, n_paths, seed)
    vals = -lam1_scaled * T * np.exp(-lam0 * T)
    mean, se = _mean_stderr(vals)
    return complex(mean), se


# ---------------------------------------------------------------- group parameters

_F_KINDS = ("exp", "constant")
_GAMMA_KINDS = ("constant", "tanh")


@dataclass(frozen=True)
class FullModelSpec:
    """Primitives of the fast-factor model, used only by the oracles.

    Volatility f is ``f_scale * exp(y)`` ("exp") or ``f_scale`` ("constant");
    the market price of volatility risk is ``gamma_level`` ("constant") or
    ``gamma_level * tanh(y)`` ("tanh"), both bounded by ``gamma_cap``.
    """

    f_kind: str = "exp"
    f_scale: float = 1.0
    gamma_kind: str = "constant"
    gamma_level: float = 0.2
    gamma_cap: float = 1.0
    m: float = 0.0
    nu: float = 0.5
    rho: float = -0.3
    epsilon: float = 0.01
    y0: float = 0.0

    def __post_init__(self):
        if self.f_kind not in _F_KINDS:
            raise ValueError(f"f_kind must be one of {_F_KINDS}")
        if self.gamma_kind not in _GAMMA_KINDS:
            raise ValueError(f"gamma_kind must be one of {_GAMMA_KINDS}")
        if not self.f_scale > 0:
            raise ValueError("f must be positive")
        if abs(self.gamma_level) > self.gamma_cap:
            raise ValueError("|Gamma| exceeds gamma_cap")
        if not self.nu > 0:
            raise ValueError("nu must be > 0")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    def f(self, y):
        y = np.asarray(y, dtype=float)
        return self.f_scale * (np.exp(y) if self.f_kind == "exp" else np.ones_like(y))

    def gamma(self, y):
        y = np.asarray(y, dtype=float)
        if self.gamma_kind == "constant":
            return np.full_like(y, self.gamma_level)
        return self.gamma_level * np.tanh(y)

    def density(self, y):
        z = (np.asarray(y) - self.m) / self.nu
        return np.exp(-0.5 * z * z) / (self.nu * math.sqrt(2.0 * math.pi))


@dataclass
class PoissonSolution:
    """Derivative of the Poisson-equation solution, tabulated with a cubic spline."""

    grid: np.ndarray
    values: np.ndarray
    sigma2: float
    centering_residual: float
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._spline = CubicSpline(self.grid, self.values)

    def phi_prime(self, y):
        return self._spline(y)


def invariant_average(spec: FullModelSpec, fn: Callable, n: int = 120) -> float:
    """Gauss-Hermite average of fn(Y) for Y ~ N(m, nu^2)."""
    nodes, weights = roots_hermitenorm(n)
    return float(np.sum(weights * fn(spec.m + spec.nu * nodes)) / math.sqrt(2.0 * math.pi))


_GL_NODES, _GL_WEIGHTS = roots_legendre(12)


def _cell_integrals(fn, edges):
    """Integral of fn over each cell [edges[i], edges[i+1]] by 12-point Gauss-Legendre."""
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * _GL_NODES
    return (half[:, 0]) * (fn(x) @ _GL_WEIGHTS)


def solve_poisson(spec: FullModelSpec, half_width: float = 10.0, n_cells: int = 4000) -> PoissonSolution:
    """Integrating-factor solution of (m - y)phi' + nu^2 phi'' = f^2 - <f^2>.

    phi'(y) = (1 / (nu^2 rho(y))) * int_{-inf}^{y} (f^2 - sigma2) rho du. The
    upper-tail form -int_y^inf is used right of the mean to avoid cancellation.
    """
    sigma2 = invariant_average(spec, lambda y: spec.f(y) ** 2)
    g_rho = lambda y: (spec.f(y) ** 2 - sigma2) * spec.density(y)
    # Cells stretch past the tabulated window so the tails are negligible.
    tail = spec.m + np.array([-1.0, 1.0]) * (half_width + 30.0) * spec.nu
    grid = np.linspace(spec.m - half_width * spec.nu, spec.m + half_width * spec.nu, n_cells + 1)
    edges = np.concatenate([[tail[0]], grid, [tail[1]]])
    cells = _cell_integrals(g_rho, np.linspace(tail[0], grid[0], 401))
    left_tail = cells.sum()
    right_tail = _cell_integrals(g_rho, np.linspace(grid[-1], tail[1], 401)).sum()
    inner = _cell_integrals(g_rho, grid)
    lower = left_tail + np.concatenate([[0.0], np.cumsum(inner)])
    upper = right_tail + np.concatenate([np.cumsum(inner[::-1])[::-1], [0.0]])
    residual = float(lower[-1] + right_tail)
    if abs(residual) > 1e-8:
        raise QuadratureFailure(f"centering residual {residual:.3e} exceeds 1e-8")
    cumulative = np.where(grid <= spec.m, lower, -upper)
    values = cumulative / (spec.nu ** 2 * spec.density(grid))
    return PoissonSolution(grid=grid, values=values, sigma2=sigma2, centering_residual=residual)


def shooting_phi_prime(spec: FullModelSpec, y_eval, reach: float = 10.0):
    """Second route to phi': integrate the first-order ODE in its stable directions.

    p' = ((y - m) p + g(y)) / nu^2 is integrated forward from m - reach*nu and
    backward from m + reach*nu, each started on the asymptote p = -g / (y - m);
    start-up errors decay like exp(-(reach^2 - z^2)/2).
    """
    sigma2 = invariant_average(spec, lambda y: spec.f(y) ** 2)
    g = lambda y: spec.f(y) ** 2 - sigma2
    rhs = lambda y, p: ((y - spec.m) * p + g(y)) / spec.nu ** 2
    y_eval = np.asarray(y_eval, dtype=float)
    out = np.empty_like(y_eval)
    for sign in (-1.0, 1.0):
        start = spec.m + sign * reach * spec.nu
        mask = (y_eval <= spec.m) if sign < 0 else (y_eval > spec.m)
        if not mask.any():
            continue
        pts = y_eval[mask]
        order = np.argsort(pts) if sign < 0 else np.argsort(-pts)
        p0 = -g(start) / (start - spec.m)
        sol = solve_ivp(rhs, (start, spec.m), [float(p0)], method="DOP853",
                        t_eval=pts[order], rtol=1e-12, atol=1e-14)
        vals = np.empty(pts.size)
        vals[order] = sol.y[0]
        out[mask] = vals
    return out


def group_params_from_model(spec: FullModelSpec):
    """(GroupParams, PoissonSolution) from the model primitives."""
    sol = solve_poisson(spec)
    avg = lambda fn: invariant_average(spec, fn)
    gamma_phi = avg(lambda y: spec.gamma(y) * sol.phi_prime(y))
    f_phi = avg(lambda y: spec.f(y) * sol.phi_prime(y))
    root_eps = math.sqrt(spec.epsilon)
    scale = spec.nu / math.sqrt(2.0)
    params = GroupParams(sigma=math.sqrt(sol.sigma2),
                         v2_eps=root_eps * scale * gamma_phi,
                         v3_eps=-root_eps * spec.rho * scale * f_phi)
    return params, sol


# ---------------------------------------------------------------- full model

def simulate_full_model(spec: FullModelSpec, clock: Clock, req: PricingRequest,
                        n_paths: int, dt_factor: float = MAX_DT_FACTOR, seed: int = 0,
                        scheme: str = "euler", antithetic: bool = True):
    """(mean, stderr) of exp(-rt) h(e^{rt + X_T}) under the two-factor dynamics.

    ``scheme="euler"`` is plain Euler-Maruyama for (X, Y). ``scheme="exact-ou"``
    draws Y from its exact Gaussian transition jointly with the Brownian
    increment of X (needs constant Gamma); X keeps left-point coefficients.
    """
    if dt_factor > MAX_DT_FACTOR:
        raise StepTooCoarse(f"dt_factor {dt_factor:g} exceeds {MAX_DT_FACTOR:g}")
    if scheme not in ("euler", "exact-ou"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "exact-ou" and spec.gamma_kind != "constant":
        raise ValueError("exact-ou scheme needs a constant Gamma")
    if req.payoff_kind == "custom":
        payoff = req.payoff.func
    else:
        strike = math.exp(req.k)
        payoff = ((lambda s: np.maximum(s - strike, 0.0)) if req.payoff_kind == "call"
                  else (lambda s: np.maximum(strike - s, 0.0)))
    eps = spec.epsilon
    dt_max = dt_factor * eps
    rho, rho_c = spec.rho, math.sqrt(1.0 - spec.rho ** 2)
    vol_y = spec.nu * math.sqrt(2.0 / eps)
    growth = math.exp(req.r * req.t)
    samples = []
    for b, size in _blocks(n_paths):
        rng = block_rng(seed, b)
        half = (size + 1) // 2 if antithetic else size
        T = sample_clock(clock, req.t, rng, half)
        n_steps = np.maximum(np.ceil(T / dt_max - 1e-12).astype(int), 1)
        h = T / n_steps
        sqh = np.sqrt(h)
        if scheme == "exact-ou":
            a = h / eps
            decay = np.exp(-a)
            sd_y = spec.nu * np.sqrt(-np.expm1(-2.0 * a))
            corr = rho * np.sqrt(2.0 / a) * (-np.expm1(-a)) / np.sqrt(-np.expm1(-2.0 * a))
            corr_c = np.sqrt(np.maximum(1.0 - corr ** 2, 0.0))
            m_rn = spec.m - spec.nu * math.sqrt(2.0 * eps) * spec.gamma_level
        signs = np.array([1.0, -1.0] if antithetic else [1.0])[:, None]
        x = np.full((signs.shape[0], half), req.x)
        y = np.full((signs.shape[0], half), spec.y0)
        uniform = bool(np.all(n_steps == n_steps[0]))
        for step in range(int(n_steps.max())):
            zb = signs * rng.standard_normal(half)
            zw = signs * rng.standard_normal(half)
            fy = spec.f(y)
            if scheme == "euler":
                dw = sqh * (rho * zb + rho_c * zw)
                y_new = (y + ((spec.m - y) / eps - spec.nu * math.sqrt(2.0 / eps) * spec.gamma(y)) * h
                         + vol_y * sqh * zb)
            else:
                dw = sqh * (corr * zb + corr_c * zw)
                y_new = m_rn + (y - m_rn) * decay + sd_y * zb
            x_new = x - 0.5 * fy * fy * h + fy * dw
            if uniform:
                x, y = x_new, y_new
            else:
                active = step < n_steps
                x = np.where(active, x_new, x)
                y = np.where(active, y_new, y)
        vals = math.exp(-req.r * req.t) * payoff(growth * np.exp(x))
        # an antithetic pair counts as one independent sample
        samples.append(vals.mean(axis=0))
    samples = np.concatenate(samples)
    mean, se = _mean_stderr(samples)
    return float(mean), se
