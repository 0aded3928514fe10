import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tcfmrsv.errors import DomainViolation
from tcfmrsv.mc_oracle import clock_samples
from tcfmrsv.spectral import GroupParams, eigenvalue0, eigenvalue1_scaled
from tcfmrsv.timechange import (CIRClock, CompositeClock, GenericLevy, IdentityClock, LevyExpCP,
                                admissible_real_lower_bound, atom_mass, cir_laplace, laplace,
                                levy_exponent, levy_exponent_derivative, weighted_laplace)

FIG2 = LevyExpCP(drift=0.25, intensity=0.75, jump_rate=0.10)
FIG3 = CIRClock(kappa=1.0, theta=1.0, vol2=2.0, z0=2.0)
FIG4 = CompositeClock(outer=LevyExpCP(0.05, 0.5, 0.5), inner=CIRClock(2.0, 1.0, 4.0, 4.0))
CLOCKS = [IdentityClock(), FIG2, FIG3, FIG4]


def in_domain(clock, re, im):
    b = admissible_real_lower_bound(clock)
    # Half-way to zero keeps a 1e-5 difference step far from the edge singularity.
    base = 0.5 * b if math.isfinite(b) else -1.0
    return complex(base + re, im)


def test_levy_exponent_examples():
    assert levy_exponent(FIG2, 0.0) == 0
    assert levy_exponent(FIG2, 1.0) == pytest.approx(0.25 + 0.75 / 1.1)
    assert levy_exponent(FIG2, 1.0) == pytest.approx(0.931818, abs=1e-6)
    assert levy_exponent(LevyExpCP(1.0, 1e-12, 1.0), 0.7) == pytest.approx(0.7)
    assert levy_exponent_derivative(FIG2, 0.0) == pytest.approx(0.25 + 7.5)
    assert levy_exponent_derivative(FIG2, 1.0) == pytest.approx(0.311983, abs=1e-6)
    h = 1e-6
    fd = (levy_exponent(FIG2, 1 + h) - levy_exponent(FIG2, 1 - h)) / (2 * h)
    assert levy_exponent_derivative(FIG2, 1.0) == pytest.approx(fd, rel=1e-8)


def test_levy_domain():
    with pytest.raises(DomainViolation):
        levy_exponent(FIG2, -0.1 + 0.3j)
    with pytest.raises(ValueError):
        LevyExpCP(drift=-0.1, intensity=1.0, jump_rate=1.0)


@given(st.floats(-0.09, 5), st.floats(-5, 5), st.floats(-0.09, 5), st.floats(-5, 5))
def test_explicit_exponent_correction_is_chain_rule(a, b, c, d):
    lam0, lam1 = complex(a, b), complex(c, d)
    g, al, eta = FIG2.drift, FIG2.intensity, FIG2.jump_rate
    explicit = g * lam1 - al * lam0 * lam1 / (eta + lam0) ** 2 + al * lam1 / (eta + lam0)
    assert explicit == pytest.approx(lam1 * levy_exponent_derivative(FIG2, lam0), rel=1e-10, abs=1e-12)


def test_cir_examples():
    assert cir_laplace(FIG3, 3.0, 0.0) == 1.0
    small = CIRClock(kappa=1.0, theta=1.0, vol2=1e-10, z0=2.0)
    assert cir_laplace(small, 1.0, 1.0).real == pytest.approx(math.exp(-1.632121), rel=1e-6)
    assert cir_laplace(small, 1.0, 1.0).real == pytest.approx(0.195515, abs=1e-6)
    with pytest.raises(DomainViolation):
        cir_laplace(FIG3, 1.0, -0.25)
    with pytest.raises(ValueError):
        CIRClock(kappa=1.0, theta=1.0, vol2=3.0, z0=1.0)


def test_cir_laplace_against_monte_carlo():
    T = clock_samples(FIG3, 1.0, 100_000, seed=3)
    vals = np.exp(-0.5 * T)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(cir_laplace(FIG3, 1.0, 0.5).real - vals.mean()) < 3 * se


def test_composite_laplace_against_monte_carlo():
    T = clock_samples(FIG4, 1.0, 100_000, seed=4)
    vals = np.exp(-T)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(laplace(FIG4, 1.0, 1.0).real - vals.mean()) < 3 * se


def test_cir_stable_form_large_arguments():
    for t in (1.0, 10.0, 50.0):
        for lam in (1e4 + 3j, 5e3 - 4e3j, -0.2 + 1e4j):
            val = cir_laplace(FIG3, t, lam)
            assert np.isfinite(val)
            assert np.isfinite(FIG3.dlaplace(t, lam))


def test_laplace_examples():
    assert laplace(IdentityClock(), 2.0, 0.3) == pytest.approx(math.exp(-0.6))
    assert laplace(FIG2, 1.0, 1.0).real == pytest.approx(math.exp(-0.931818), rel=1e-6)
    assert laplace(FIG2, 1.0, 1.0).real == pytest.approx(0.393837, abs=1e-6)


def test_weighted_laplace_examples():
    for clock in CLOCKS:
        assert weighted_laplace(clock, 1.0, 0.4 + 0.2j, 0.0) == 0
    assert weighted_laplace(IdentityClock(), 1.0, 0.5, 0.2) == pytest.approx(-0.2 * math.exp(-0.5))
    assert weighted_laplace(IdentityClock(), 1.0, 0.5, 0.2) == pytest.approx(-0.121306, abs=1e-6)


@pytest.mark.parametrize("clock", CLOCKS, ids=["identity", "levy", "cir", "composite"])
def test_weighted_laplace_matches_expectation_by_monte_carlo(clock):
    lam1 = complex(eigenvalue1_scaled(0.4 - 1j, GroupParams(0.34, 0.03, -0.03)))
    T = clock_samples(clock, 1.0, 100_000, seed=8)
    vals = -lam1 * T * np.exp(-0.3 * T)
    se = max(np.std(vals) / math.sqrt(T.size), 1e-15)
    assert abs(weighted_laplace(clock, 1.0, 0.3, lam1) - vals.mean()) < 3 * se + 1e-14


def test_admissible_bounds():
    assert admissible_real_lower_bound(FIG2) == -0.10
    assert admissible_real_lower_bound(FIG3) == -0.25
    assert admissible_real_lower_bound(IdentityClock()) == -math.inf
    b = admissible_real_lower_bound(FIG4)
    assert levy_exponent(FIG4.outer, b) == pytest.approx(FIG4.inner.lower_bound(), abs=1e-12)
    assert -0.5 < b < 0


def test_composite_checks_pointwise_domain():
    with pytest.raises(DomainViolation):
        laplace(FIG4, 1.0, admissible_real_lower_bound(FIG4) - 1e-3)


def test_atoms():
    driftless = LevyExpCP(drift=0.0, intensity=0.8, jump_rate=2.0)
    assert atom_mass(driftless, 1.5) == pytest.approx(math.exp(-1.2))
    assert atom_mass(FIG2, 1.0) == 0.0
    comp = CompositeClock(outer=driftless, inner=FIG3)
    assert atom_mass(comp, 1.0) == pytest.approx(cir_laplace(FIG3, 1.0, 0.8).real)
    # The transform at infinity tends to the atom.
    assert laplace(driftless, 1.5, 1e9).real == pytest.approx(math.exp(-1.2), rel=1e-6)


def test_generic_levy_reproduces_exponential_case():
    gen = GenericLevy(FIG2.exponent, FIG2.exponent_derivative, bound=-0.1, drift=0.25,
                      jump_intensity=0.75)
    for lam in (0.3, 1 + 2j, -0.05 - 1j):
        assert laplace(gen, 1.0, lam) == pytest.approx(laplace(FIG2, 1.0, lam))
        assert gen.dlaplace(1.0, lam) == pytest.approx(FIG2.dlaplace(1.0, lam))


@pytest.mark.parametrize("clock", CLOCKS, ids=["identity", "levy", "cir", "composite"])
@given(re=st.floats(0.0, 4.0), im=st.floats(-6.0, 6.0), t=st.floats(0.05, 3.0))
def test_derivative_against_central_difference(clock, re, im, t):
    lam = in_domain(clock, re, im)
    h = 1e-5 * max(1.0, abs(lam))
    fd = (laplace(clock, t, lam + h) - laplace(clock, t, lam - h)) / (2 * h)
    exact = clock.dlaplace(t, lam)
    assert abs(exact - fd) <= 1e-6 * abs(exact) + 1e-13
    lam1 = 0.3 - 0.1j
    assert weighted_laplace(clock, t, lam, lam1) == pytest.approx(lam1 * exact)


@pytest.mark.parametrize("clock", CLOCKS, ids=["identity", "levy", "cir", "composite"])
@given(re=st.floats(0.0, 4.0), im=st.floats(-6.0, 6.0), t=st.floats(0.0, 3.0))
def test_hermitian_and_normalised(clock, re, im, t):
    lam = in_domain(clock, re, im)
    assert laplace(clock, t, lam.conjugate()) == pytest.approx(np.conj(laplace(clock, t, lam)))
    assert laplace(clock, t, 0.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("clock", CLOCKS, ids=["identity", "levy", "cir", "composite"])
def test_complete_monotonicity_spot_checks(clock):
    lams = np.linspace(0.01, 5.0, 30)
    for t in (0.25, 1.0, 2.0):
        vals = np.real(laplace(clock, t, lams))
        assert np.all((vals > 0) & (vals <= 1.0))
        assert np.all(np.diff(vals) < 0)
    ts = np.linspace(0.1, 3.0, 15)
    vals = np.array([np.real(laplace(clock, t, 0.7)) for t in ts])
    assert np.all(np.diff(vals) < 0)
