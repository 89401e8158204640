import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subgauss.convolution import convolution_max_bound
from subgauss.distributions import get_builtin
from subgauss.distributions.distributions import GridDensity, GridParams
from subgauss.divergence import tail_constant
from subgauss.errors import OutOfRange, OverflowAtTilt, ZoneViolation
from subgauss.tilt import (
    PROFILE_HEADER,
    esscher,
    max_variance_product,
    shifted_moments,
    sigma_lower_bound_check,
    tilted_mgf_check,
    tilted_third_moment_check,
)

UNIFORM_T_INF = 1 / (2 * math.sqrt(3)) * math.sqrt(2 * math.pi) * math.exp(1.5) - 1


@pytest.mark.parametrize("name", ["uniform_profile", "sin4_profile"])
def test_profile_invariants(name, request):
    slacks = request.getfixturevalue(name).invariant_slacks()
    assert slacks["min_K2"] > 0
    assert slacks["max_A2"] <= 1 + 1e-9
    assert slacks["max_A1sq_minus_2A"] <= 1e-9


def test_profile_ranges(uniform_profile, sin4_profile):
    assert uniform_profile.t[0] == -20.0 and uniform_profile.t[-1] == 20.0
    assert sin4_profile.period == pytest.approx(math.pi)
    assert sin4_profile.t[-1] == pytest.approx(math.pi)


def test_profile_csv(tmp_path, uniform_profile):
    uniform_profile.to_csv(tmp_path / "profile.csv")
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[0] == ",".join(PROFILE_HEADER)
    assert len(lines) == uniform_profile.t.size + 1


def test_shifted_moments_at_zero(uniform_profile):
    sm = shifted_moments(uniform_profile, 0.0)
    assert sm.m_h == pytest.approx(0.0, abs=1e-12)
    assert sm.sigma_h == pytest.approx(1.0, abs=1e-10)
    assert sm.v_h == pytest.approx(0.0, abs=1e-12)
    assert sm.A_h == pytest.approx(0.0, abs=1e-12)


def test_shifted_moments_out_of_range(uniform_profile):
    with pytest.raises(OutOfRange):
        shifted_moments(uniform_profile, 100.0)


def test_profile_matches_tilted_grid_moments(uniform, uniform_profile):
    p = uniform.density(GridParams())
    for h in (-1.5, 0.3, 2.0):
        q = esscher(p, h)
        sm = shifted_moments(uniform_profile, h)
        assert q.mean == pytest.approx(sm.m_h, abs=1e-5)
        assert math.sqrt(q.variance) == pytest.approx(sm.sigma_h, abs=1e-5)


@settings(deadline=None, max_examples=30)
@given(h1=st.floats(-2.0, 2.0), h2=st.floats(-2.0, 2.0))
def test_esscher_semigroup(uniform, h1, h2):
    p = uniform.density(GridParams())
    twice = esscher(esscher(p, h1), h2)
    once = esscher(p, h1 + h2)
    scale = float(np.max(once.values))
    assert np.max(np.abs(twice.values - once.values)) <= 1e-10 * scale


@settings(deadline=None, max_examples=20)
@given(h=st.floats(-1.5, 1.5))
def test_esscher_commutes_with_convolution(sin4, h):
    # direct sums keep the far tails exact; tilting would amplify FFT round-off there
    p = sin4.density(GridParams(L=10.0, points=2001))
    pp = GridDensity(2 * p.x0, p.dx, np.convolve(p.values, p.values) * p.dx)
    q = esscher(p, h)
    lhs = esscher(pp, h).values
    rhs = np.convolve(q.values, q.values) * p.dx
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * float(np.max(lhs))


@settings(deadline=None, max_examples=20)
@given(h=st.floats(-1.0, 1.0), lam=st.floats(0.5, 2.0))
def test_esscher_rescaling(uniform, h, lam):
    p = uniform.density(GridParams())
    lhs = esscher(p.rescale(lam), h)
    rhs = esscher(p, lam * h).rescale(lam)
    assert np.allclose(lhs.values, rhs.values, rtol=1e-8, atol=1e-14)


def test_esscher_overflow(uniform):
    with pytest.raises(OverflowAtTilt):
        esscher(uniform.density(GridParams()), 100.0)


def test_sigma_lower_bound(uniform_profile, sin4_profile):
    h = np.linspace(-5, 5, 41)
    assert sigma_lower_bound_check(uniform_profile, 1 + UNIFORM_T_INF, h) >= 0
    assert sigma_lower_bound_check(sin4_profile, 2.0, np.linspace(-3, 3, 41)) >= 0


def test_tilted_mgf(uniform):
    # E exp(|X|/2) for X uniform on [-sqrt3, sqrt3]
    expected = 2 / math.sqrt(3) * (math.exp(math.sqrt(3) / 2) - 1)
    assert tilted_mgf_check(uniform, 0.0, 64, 1.0) == pytest.approx(expected, rel=1e-5)
    assert tilted_mgf_check(uniform, 0.1, 64, 1.0) <= 2.0


def test_tilted_third_moment(uniform):
    beta, bound = tilted_third_moment_check(uniform, 0.1, 64, 1.0)
    assert beta <= bound
    assert beta == pytest.approx(1.3, abs=0.05)


def test_zone_guards(uniform):
    with pytest.raises(ZoneViolation):
        tilted_mgf_check(uniform, 3.0, 64, 1.0)
    with pytest.raises(ZoneViolation):
        tilted_mgf_check(uniform, 0.0, 3, 1.0)


def test_max_variance_product(uniform, sin4):
    assert max_variance_product(uniform.density(GridParams())) >= 1 / 12 - 1e-9
    assert max_variance_product(sin4.density(GridParams())) >= 1 / 12


@pytest.mark.parametrize("n", [4, 8])
def test_convolution_max_bound(uniform, n):
    M_n, bound = convolution_max_bound(uniform.density(GridParams()), n)
    assert M_n <= bound


@settings(deadline=None, max_examples=30)
@given(h=st.floats(-1.0, 1.0), name=st.sampled_from(["uniform", "sin4"]))
def test_tilted_maximum_bound(h, name):
    # p <= c phi gives M(Q_h p) <= c e^{A(h)} / sqrt(2 pi)
    spec = get_builtin(name)
    c = tail_constant(spec)
    q = esscher(spec.density(GridParams()), h)
    A = float(spec.slack_derivs(np.array([h]))[0][0])
    assert q.max <= c * math.exp(A) / math.sqrt(2 * math.pi) + 1e-9
