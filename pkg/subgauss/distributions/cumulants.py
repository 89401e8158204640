"""Cumulants, third absolute moment and density maximum of a spec."""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import bernoulli

from subgauss.distributions.distributions import (
    SQRT3,
    GridParams,
    TrigGaussian,
    Uniform,
    WeightedUniformSum,
)
from subgauss.errors import SeriesDivergence

MAX_ORDER = 12


@dataclass(frozen=True)
class CumulantReport:
    kappa: Tuple[float, ...]  # kappa[j] = gamma_j for j = 0..J
    beta3: float
    M: float
    first_nonzero: Optional[Tuple[int, float]]
    threshold: float
    method: str

    @property
    def J(self):
        return len(self.kappa) - 1

    def gamma(self, j):
        return self.kappa[j] if j <= self.J else 0.0

    def to_dict(self):
        return {
            "cumulants": {str(j): self.kappa[j] for j in range(3, self.J + 1)},
            "beta3": self.beta3,
            "M": self.M,
            "first_nonzero": list(self.first_nonzero) if self.first_nonzero else "none up to J",
            "method": self.method,
        }


def series_mul(a, b, J):
    return np.convolve(a, b)[: J + 1]


def series_log1p(u, J):
    """Truncated log(1 + u) for a series with u[0] = 0."""
    assert u[0] == 0, "log1p composition needs a series without constant term"
    out = np.zeros(J + 1)
    power = np.zeros(J + 1)
    power[0] = 1.0
    for m in range(1, J + 1):
        power = series_mul(power, u, J)
        if not np.any(power):
            break
        out += (-1) ** (m + 1) * power / m
    return out


def trig_log_laplace_series(spec, J):
    """Taylor coefficients of log L(t) = t^2/2 + log(1 - cP(t)) at 0."""
    t = np.linspace(0, spec.P.period, 4096, endpoint=False)
    if abs(spec.c) * float(np.max(np.abs(spec.P(t)))) >= 1:
        raise SeriesDivergence("|c P| reaches 1: log(1 - cP) has no convergent expansion")
    u = -spec.c * spec.P.taylor(J)
    u[0] = 0.0  # P(0) = 0 to 1e-12 by construction
    coef = series_log1p(u, J)
    if J >= 2:
        coef[2] += 0.5
    return coef


def moments_to_cumulants(m):
    """kappa_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) kappa_k m_{n-k}, with m_0 = 1."""
    J = len(m) - 1
    kappa = np.zeros(J + 1)
    for n in range(1, J + 1):
        kappa[n] = m[n] - sum(math.comb(n - 1, k - 1) * kappa[k] * m[n - k] for k in range(1, n))
    return kappa


def uniform_cumulants(a, J):
    """Cumulants of uniform(-a, a): B_n (2a)^n / n for n >= 2."""
    B = bernoulli(J)
    kappa = np.zeros(J + 1)
    for n in range(2, J + 1):
        kappa[n] = B[n] * (2 * a) ** n / n if n % 2 == 0 else 0.0
    return kappa


def quadrature_cumulants(density, J):
    m = [density.moment(k) for k in range(J + 1)]
    m = np.asarray(m) / m[0]
    return moments_to_cumulants(m)


def _first_nonzero(kappa, threshold):
    for j in range(3, len(kappa)):
        if abs(kappa[j]) > threshold:
            return (j, float(kappa[j]))
    return None


def moments_and_cumulants(spec, J=8, method="auto", grid=GridParams()):
    """Cumulants gamma_0..gamma_J plus beta3 = E|X|^3 and M = max p.

    method: "series" (trig specs), "exact" (uniform families), "quadrature"
    (any spec, moments of its grid density) or "auto".
    """
    assert 3 <= J <= MAX_ORDER, f"cumulant order J must lie in [3, {MAX_ORDER}], got {J}"
    if method == "auto":
        if isinstance(spec, TrigGaussian):
            method = "series"
        elif isinstance(spec, (Uniform, WeightedUniformSum)):
            method = "exact"
        else:
            method = "quadrature"

    density = spec.density(grid)
    threshold = 1e-12
    if method == "series":
        assert isinstance(spec, TrigGaussian), "series cumulants need a trig spec"
        coef = trig_log_laplace_series(spec, J)
        kappa = np.array([math.factorial(j) * coef[j] for j in range(J + 1)])
        threshold = 1e-12 * max(abs(spec.c) * spec.P.abs_coeff_sum(), 1e-300)
    elif method == "exact":
        if isinstance(spec, Uniform):
            kappa = uniform_cumulants(spec.halfwidth, J)
        else:
            assert isinstance(spec, WeightedUniformSum), "exact cumulants need a uniform family"
            kappa = sum(uniform_cumulants(SQRT3 * abs(w), J) for w in spec.weights)
    elif method == "quadrature":
        kappa = quadrature_cumulants(density, J)
    else:
        raise ValueError(f"unknown cumulant method {method!r}")

    beta3 = density.integrate(np.abs(density.x) ** 3 * density.values)
    return CumulantReport(
        kappa=tuple(float(k) for k in kappa),
        beta3=float(beta3),
        M=density.max,
        first_nonzero=_first_nonzero(kappa, threshold),
        threshold=threshold,
        method=method,
    )
