import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subgauss.convolution import (
    _saddle,
    cf,
    density_zn,
    density_zn_spectral,
    evaluate_cf_density,
    ratio_at,
    self_convolve,
    tilted_ratio,
    truncation,
)
from subgauss.distributions import get_builtin
from subgauss.distributions.distributions import SQRT3, GridDensity, GridParams, phi
from subgauss.errors import GridTooCoarse, MethodUnavailable

UNIFORM_C = 1 / (2 * math.sqrt(3)) * math.sqrt(2 * math.pi) * math.exp(1.5)


def _sup_diff(a, b, grid, window=6.0):
    x = grid.x
    x = x[np.abs(x) <= window]
    return float(np.max(np.abs(a(x) - b(x))))


@pytest.mark.parametrize("n", [4, 8, 16])
def test_uniform_cf_matches_gridconv(uniform, grid, n):
    cf = density_zn(uniform, n, "cf", grid)
    gc = density_zn(uniform, n, "gridconv", grid)
    assert cf.accuracy <= 1e-12
    assert _sup_diff(cf, gc, grid) <= 1e-6


def test_uniform_cf_n2_power_law_tail(uniform, grid):
    # |f|^2 decays like t^-2: the inversion is capped and declares its accuracy
    T, accuracy = truncation(uniform, 2)
    assert T == pytest.approx(2e5)
    assert 5e-7 < accuracy < 5e-6
    cf = density_zn(uniform, 2, "cf", grid)
    gc = density_zn(uniform, 2, "gridconv", grid)
    # grid convolution rounds the triangle's kinks over a couple of cells
    x = grid.x
    kink = np.minimum(np.abs(x), np.abs(np.abs(x) - math.sqrt(6)))
    x = x[(np.abs(x) <= 6.0) & (kink > 0.01)]
    assert np.max(np.abs(cf(x) - gc(x))) <= 5 * accuracy
    peak = math.sqrt(2) / (2 * math.sqrt(3))
    assert float(cf(np.array([0.0]))[0]) == pytest.approx(peak, abs=5 * accuracy)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_sin4_routes_agree(sin4, grid, n):
    sp = density_zn(sin4, n, "spectral")
    cf = density_zn(sin4, n, "cf", grid)
    gc = density_zn(sin4, n, "gridconv", grid)
    assert _sup_diff(sp, cf, grid) <= 1e-10
    # grid convolution is exact at its own nodes; between them it interpolates
    nodes = gc.payload.x
    nodes = nodes[np.abs(nodes) <= 6.0]
    assert np.max(np.abs(sp(nodes) - gc(nodes))) <= 1e-8


def test_spectral_n1_is_the_base_deviation(sin4):
    p = density_zn_spectral(sin4, 1)
    base = sin4.gauss_deviation()
    assert np.array_equal(p.payload.coeffs, base.coeffs)
    assert p.payload.base_freq == base.base_freq


def test_spectral_matches_direct_inversion(sin4):
    x = np.array([0.0, 0.7, 1.9, 3.3])
    p = density_zn_spectral(sin4, 3)
    assert np.allclose(p(x), evaluate_cf_density(sin4, 3, x), rtol=0, atol=1e-10)


def test_spectral_normal_is_exact(normal):
    p = density_zn_spectral(normal, 256)
    x = np.linspace(-5, 5, 11)
    assert np.array_equal(p(x), phi(x))


def test_spectral_base_frequency(sin4):
    assert density_zn_spectral(sin4, 64).payload.base_freq == pytest.approx(2 / 8)


def test_auto_routes(sin4, uniform, grid):
    assert density_zn(sin4, 4).method == "spectral"
    assert density_zn(uniform, 4, grid=grid).method == "cf"
    # jump densities are their own grid at n = 1
    assert density_zn(uniform, 1, grid=grid).method == "gridconv"


def test_unavailable_routes(uniform, grid):
    with pytest.raises(MethodUnavailable):
        density_zn(uniform, 2, "spectral")
    with pytest.raises(MethodUnavailable):
        density_zn(uniform, 3, "gridconv", grid)
    with pytest.raises(MethodUnavailable):
        density_zn(uniform, 2, "fourier", grid)


def test_self_convolve_needs_vanishing_edges():
    p = GridDensity(-1.0, 0.01, np.full(201, 0.5))
    with pytest.raises(GridTooCoarse):
        self_convolve(p, 2)


def test_sum_density_rows(sin4, grid):
    rows = density_zn(sin4, 4).rows(grid)
    assert len(rows) == grid.points
    x, p, ph, r = rows[grid.points // 2]
    assert x == pytest.approx(0.0, abs=1e-12)
    assert p == pytest.approx((1 + r) * ph)


def test_sum_density_is_standardized(uniform, grid):
    mean, var = density_zn(uniform, 8, "cf", grid).mean_variance()
    assert mean == pytest.approx(0.0, abs=1e-10)
    assert var == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("x", [0.0, 1.0, 3.0])
def test_tilted_ratio_matches_inversion(uniform, x):
    direct = evaluate_cf_density(uniform, 16, [x])[0] / phi(x)
    assert tilted_ratio(uniform, 16, [x])[0] == pytest.approx(direct, rel=1e-8)


def test_ratio_beyond_support(uniform):
    # Z_16 lives on [-4 sqrt3, 4 sqrt3]
    assert ratio_at(uniform, 16, [7.0])[0] == 0.0
    assert ratio_at(uniform, 16, [6.5])[0] > 0.0


def test_tail_bound_holds(uniform, uniform_profile, grid):
    n = 16
    p = density_zn(uniform, n, "cf", grid)
    x = grid.x
    x = x[np.abs(x) <= 6.0]
    ratio = p(x) / phi(x)
    bound = UNIFORM_C * math.sqrt(2) * np.exp(-(n - 1) * uniform_profile.A_at(x / math.sqrt(n)))
    assert np.all(ratio <= bound + 1e-9)


@pytest.mark.parametrize("tau", [-1.2, 0.3, 1.5])
def test_saddle_point_solves_the_mean_equation(uniform, tau):
    s = _saddle(uniform, tau, uniform.support_radius)
    K1 = float(uniform.cumulant_derivs(np.array([s]))[1][0])
    assert K1 == pytest.approx(tau, abs=1e-12)
    assert np.sign(s) == np.sign(tau)


@pytest.mark.parametrize("name", ["normal", "uniform", "sin4", "wsum_half"])
def test_cf_at_zero(name):
    assert cf(get_builtin(name), np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-15)


@settings(deadline=None, max_examples=50)
@given(t=st.floats(-30.0, 30.0), name=st.sampled_from(["uniform", "sin4", "wsum_half", "sin4_root_pi6"]))
def test_cf_is_bounded(t, name):
    assert abs(cf(get_builtin(name), np.array([t]))[0]) <= 1.0 + 1e-12


@settings(deadline=None)
@given(t=st.floats(0.01, 40.0))
def test_uniform_cf_is_sinc(uniform, t):
    u = SQRT3 * t
    assert cf(uniform, np.array([t]))[0] == pytest.approx(math.sin(u) / u, abs=1e-14)


def test_sin4_cf_at_one(sin4):
    expected = (1 - sin4.c * (3 - 4 * math.cosh(2) + math.cosh(4)) / 8) * math.exp(-0.5)
    assert cf(sin4, np.array([1.0]))[0] == pytest.approx(expected, rel=1e-13)


@settings(deadline=None, max_examples=40)
@given(x=st.floats(-10.0, 10.0), n=st.sampled_from([2, 3, 8, 64]))
def test_spectral_density_is_periodic(sin4, x, n):
    # sin^4 has period pi, so q_n repeats every pi sqrt(n)
    dev = density_zn_spectral(sin4, n).payload
    h = math.pi * math.sqrt(n)
    assert float(dev(np.array([x + h]))[0]) == pytest.approx(float(dev(np.array([x]))[0]), abs=1e-10)


@settings(deadline=None, max_examples=30)
@given(x=st.floats(0.0, 6.0), name=st.sampled_from(["uniform", "sin4", "wsum_half"]), n=st.sampled_from([1, 2, 4]))
def test_symmetric_laws_have_even_densities(grid, x, name, n):
    p = density_zn(get_builtin(name), n, grid=grid)
    assert float(p(np.array([-x]))[0]) == pytest.approx(float(p(np.array([x]))[0]), abs=1e-10)
