import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from tcfmrsv.errors import QuadratureFailure, StepTooCoarse
from tcfmrsv.impliedvol import bs_price
from tcfmrsv.mc_oracle import (BLOCK, FullModelSpec, block_rng, clock_samples,
                               conditional_bs_value, conditional_payoff_value,
                               group_params_from_model, invariant_average, mc_price_order0,
                               mc_price_order0_strikes, mc_weighted_laplace, sample_clock,
                               shooting_phi_prime, simulate_full_model, solve_poisson)
from tcfmrsv.presets import PRESETS
from tcfmrsv.pricing import Payoff, PricingRequest, price
from tcfmrsv.spectral import GroupParams
from tcfmrsv.timechange import CIRClock, IdentityClock, LevyExpCP, weighted_laplace

LEVY = PRESETS["fig2"].clock
CIR = PRESETS["fig3"].clock
COMPOSITE = PRESETS["fig4"].clock


def smooth_step(s):
    return 0.5 * np.tanh(5 * (s - 1)) + 0.5


SMOOTH = Payoff(smooth_step, strip=(-0.5, 0.5), offset=float(smooth_step(0.0)))


def within(value, mean, se, n_se=3.0):
    return abs(value - mean) <= n_se * se


# ---------------------------------------------------------------- clock samplers

def test_levy_sampler_mean():
    draws = clock_samples(LEVY, 1.0, 100_000, seed=1)
    assert LEVY.drift + LEVY.intensity / LEVY.jump_rate == pytest.approx(7.75)
    assert within(7.75, draws.mean(), draws.std(ddof=1) / math.sqrt(draws.size))


def test_cir_sampler_mean():
    draws = clock_samples(CIR, 1.0, 100_000, seed=2)
    expected = 1 + (1 - math.exp(-1.0))
    assert expected == pytest.approx(1.632121, abs=1e-6)
    assert within(expected, draws.mean(), draws.std(ddof=1) / math.sqrt(draws.size))


def test_levy_without_jumps_is_pure_drift():
    clock = LevyExpCP(0.4, 1e-300, 2.0)
    draws = sample_clock(clock, 1.5, block_rng(0, 0), size=500)
    assert np.all(draws == 0.4 * 1.5)


def test_identity_sampler_and_scalar_draw():
    assert sample_clock(IdentityClock(), 0.7, block_rng(0, 0)) == 0.7
    assert isinstance(sample_clock(LEVY, 0.7, block_rng(0, 0)), float)


def test_cir_paths_stay_nonnegative():
    draws = sample_clock(CIRClock(3.0, 0.2, 1.0, 0.001), 1.0, block_rng(9, 0), size=2000)
    assert np.all(draws >= 0)


def test_clock_samples_reproducible_and_block_stable():
    a = clock_samples(LEVY, 0.5, 10_000, seed=11)
    b = clock_samples(LEVY, 0.5, 10_000, seed=11)
    assert np.array_equal(a, b)
    # the first block does not depend on how many paths follow it
    assert np.array_equal(a[:BLOCK], clock_samples(LEVY, 0.5, BLOCK, seed=11))
    assert not np.array_equal(a, clock_samples(LEVY, 0.5, 10_000, seed=12))


# ---------------------------------------------------------------- conditional values

def test_conditional_value_at_zero_time_is_intrinsic():
    assert conditional_bs_value(0.0, 0.1, 1.0, 0.0, 0.05, 0.3) == pytest.approx(
        math.exp(0.15) - 1.0, abs=1e-15)
    assert conditional_bs_value(0.0, -0.1, 1.0, 0.0, 0.0, 0.3) == 0.0
    assert conditional_bs_value(0.0, -0.1, 1.0, 0.0, 0.0, 0.3, put=True) == pytest.approx(
        1 - math.exp(-0.1), abs=1e-15)


def test_conditional_value_atm():
    v = conditional_bs_value(1.0, 0.0, 1.0, 0.0, 0.0, 0.34)
    assert v == pytest.approx(2 * norm.cdf(0.17) - 1, abs=1e-14)
    assert v == pytest.approx(0.134990, abs=1e-6)


@given(x=st.floats(-0.5, 0.5), k=st.floats(-0.5, 0.5), r=st.floats(0, 0.1),
       t=st.floats(0.1, 2.0), sigma=st.floats(0.05, 1.0))
def test_conditional_value_monotone_in_business_time(x, k, r, t, sigma):
    T = np.linspace(0.0, 5.0, 101)
    v = conditional_bs_value(T, x, t, k, r, sigma)
    assert np.all(np.diff(v) >= -1e-14)


@given(x=st.floats(-0.5, 0.5), k=st.floats(-0.5, 0.5), T=st.floats(0.0, 3.0))
def test_conditional_put_call_parity(x, k, T):
    c = conditional_bs_value(T, x, 1.0, k, 0.03, 0.3)
    p = conditional_bs_value(T, x, 1.0, k, 0.03, 0.3, put=True)
    assert c - p == pytest.approx(math.exp(0.03 + x) - math.exp(k), abs=1e-13)


def test_quadrature_payoff_value_against_adaptive_quadrature():
    T = np.array([0.01, 0.3, 1.0, 4.0])
    got = conditional_payoff_value(T, 0.05, 1.0, 0.02, 1.28, smooth_step)
    for Ti, g in zip(T, got):
        sd = 1.28 * math.sqrt(Ti)
        f = lambda z: smooth_step(math.exp(0.07 - 0.5 * sd * sd + sd * z)) * norm.pdf(z)
        want = quad(f, -12, 12, points=[(0.5 * sd * sd - 0.07) / sd], limit=400,
                    epsabs=1e-13)[0]
        assert g == pytest.approx(want, abs=1e-10)


# ---------------------------------------------------------------- order-zero prices

def test_identity_clock_has_zero_variance():
    req = PricingRequest(x=0.0, k=0.1, r=0.02, t=0.8, params=GroupParams(0.3), clock=IdentityClock())
    mean, se = mc_price_order0(req, 2000, seed=0)
    assert se == 0.0
    assert mean == pytest.approx(bs_price(1.0, math.exp(0.1), 0.02, 0.8, 0.3), abs=1e-14)


def test_order0_needs_enough_paths():
    req = PricingRequest(x=0.0, k=0.0, r=0.0, t=1.0, params=GroupParams(0.3), clock=LEVY)
    with pytest.raises(ValueError):
        mc_price_order0(req, 999, seed=0)


def test_strike_batch_matches_single_strikes():
    req = PricingRequest(x=0.0, k=0.0, r=0.01, t=0.5, params=GroupParams(0.34), clock=LEVY)
    batch = mc_price_order0_strikes(req, [-0.2, 0.3], 5000, seed=8)
    for k, got in zip([-0.2, 0.3], batch):
        assert got == mc_price_order0(replace(req, k=k), 5000, seed=8)


# ---------------------------------------------------------------- weighted Laplace

def test_weighted_laplace_zero_weight():
    mean, se = mc_weighted_laplace(LEVY, 1.0, 0.3, 0.0, 5000, seed=0)
    assert mean == 0 and se == 0


def test_weighted_laplace_identity_exact():
    mean, se = mc_weighted_laplace(IdentityClock(), 0.7, 0.3 + 0.2j, 0.5 - 0.1j, 5000, seed=0)
    assert se < 1e-15
    assert mean == pytest.approx(-(0.5 - 0.1j) * 0.7 * np.exp(-(0.3 + 0.2j) * 0.7), abs=1e-14)


@pytest.mark.parametrize("clock", [LEVY, CIR, COMPOSITE], ids=["levy", "cir", "composite"])
def test_weighted_laplace_brackets_analytic(clock):
    mean, se = mc_weighted_laplace(clock, 1.0, 0.3, 0.2, 100_000, seed=5)
    assert within(complex(weighted_laplace(clock, 1.0, 0.3, 0.2)).real, mean.real, se)


# ---------------------------------------------------------------- group parameters

def test_lognormal_second_moment():
    params, sol = group_params_from_model(FullModelSpec())
    assert sol.sigma2 == pytest.approx(math.exp(0.5), rel=1e-12)
    assert params.sigma ** 2 == pytest.approx(1.648721, abs=1e-6)
    assert invariant_average(FullModelSpec(nu=0.3, m=0.2), lambda y: y) == pytest.approx(0.2)


def test_zero_risk_premium_kills_v2():
    params, _ = group_params_from_model(FullModelSpec(gamma_level=0.0))
    assert params.v2_eps == 0.0
    assert params.v3_eps != 0.0


def test_zero_correlation_kills_v3():
    params, _ = group_params_from_model(FullModelSpec(rho=0.0))
    assert params.v3_eps == 0.0
    assert params.v2_eps != 0.0


def test_group_parameters_scale_with_root_epsilon():
    a, _ = group_params_from_model(FullModelSpec(epsilon=0.01))
    b, _ = group_params_from_model(FullModelSpec(epsilon=0.04))
    assert b.v2_eps == pytest.approx(2 * a.v2_eps, rel=1e-12)
    assert b.v3_eps == pytest.approx(2 * a.v3_eps, rel=1e-12)
    assert a.sigma == b.sigma


@pytest.mark.parametrize("spec", [FullModelSpec(), FullModelSpec(nu=1.0, m=0.3),
                                  FullModelSpec(gamma_kind="tanh", gamma_level=0.5)])
def test_centering_and_shooting_agree(spec):
    sol = solve_poisson(spec)
    assert abs(sol.centering_residual) < 1e-8
    y = np.linspace(spec.m - 4 * spec.nu, spec.m + 4 * spec.nu, 161)
    assert np.max(np.abs(sol.phi_prime(y) - shooting_phi_prime(spec, y))) < 1e-6


def test_poisson_solution_solves_the_ode():
    spec = FullModelSpec()
    sol = solve_poisson(spec)
    y = np.linspace(-2.0, 2.0, 81)
    p = sol.phi_prime(y)
    dp = sol._spline(y, 1)
    lhs = (spec.m - y) * p + spec.nu ** 2 * dp
    assert np.max(np.abs(lhs - (spec.f(y) ** 2 - sol.sigma2))) < 1e-6


def test_heavy_tail_fails_centering():
    with pytest.raises(QuadratureFailure):
        group_params_from_model(FullModelSpec(nu=3.0))


@pytest.mark.parametrize("kw", [dict(nu=0.0), dict(rho=1.5), dict(epsilon=0.0),
                                dict(gamma_level=2.0), dict(f_kind="cubic")])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        FullModelSpec(**kw)


# ---------------------------------------------------------------- full model

def test_step_too_coarse():
    req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.1, params=GroupParams(1.0), clock=IdentityClock())
    with pytest.raises(StepTooCoarse):
        simulate_full_model(FullModelSpec(), IdentityClock(), req, 1000, dt_factor=1 / 40)


def test_constant_volatility_reduces_to_time_changed_black_scholes():
    spec = FullModelSpec(f_kind="constant", f_scale=0.34, gamma_level=0.0, epsilon=1.0)
    req = PricingRequest(x=0.0, k=0.0, r=0.02, t=0.25, params=GroupParams(0.34), clock=LEVY)
    a, se_a = simulate_full_model(spec, LEVY, req, 20_000, seed=3)
    b, se_b = mc_price_order0(req, 100_000, seed=4)
    assert abs(a - b) <= 3 * math.hypot(se_a, se_b)


def test_uncorrelated_riskless_volatility_has_no_correction():
    spec = FullModelSpec(rho=0.0, gamma_level=0.0, epsilon=0.01)
    params, _ = group_params_from_model(spec)
    req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.25, params=params, clock=IdentityClock(),
                         payoff_kind="custom", payoff=SMOOTH)
    res = price(req)
    assert res.correction == 0.0
    mean, se = simulate_full_model(spec, IdentityClock(), req, 100_000, seed=5)
    assert abs(mean - res.p0) <= 3 * se + spec.epsilon


def test_full_model_reproducible():
    spec = FullModelSpec(epsilon=0.04)
    req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.05, params=GroupParams(1.0), clock=IdentityClock(),
                         payoff_kind="custom", payoff=SMOOTH)
    a = simulate_full_model(spec, IdentityClock(), req, 3000, seed=7)
    assert a == simulate_full_model(spec, IdentityClock(), req, 3000, seed=7)
    assert a != simulate_full_model(spec, IdentityClock(), req, 3000, seed=8)


def test_exact_ou_scheme_agrees_with_euler():
    spec = FullModelSpec(epsilon=0.04)
    req = PricingRequest(x=0.0, k=0.0, r=0.0, t=0.1, params=GroupParams(1.0), clock=IdentityClock(),
                         payoff_kind="custom", payoff=SMOOTH)
    a, se_a = simulate_full_model(spec, IdentityClock(), req, 40_000, seed=1)
    b, se_b = simulate_full_model(spec, IdentityClock(), req, 40_000, seed=2, scheme="exact-ou")
    assert abs(a - b) <= 3 * math.hypot(se_a, se_b)
