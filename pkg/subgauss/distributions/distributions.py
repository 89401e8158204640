import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Optional, Tuple

import numpy as np

from subgauss.errors import (
    GridDensityError,
    NonfiniteLaplace,
    QuadratureOverflow,
    RejectsInadmissibleC,
    RejectsNonStandardized,
)
from subgauss.lib import misc

SQRT3 = math.sqrt(3.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
EXP_BUDGET = 700.0  # largest exponent we let np.exp see
NEG_TOL = 1e-12


def phi(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def log_phi(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - math.log(SQRT_2PI)


def trapezoid_weights(n_points, dx):
    w = np.full(n_points, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


###########################################################################
# log(sinh u / u) and its derivatives: the uniform law's log-Laplace kernel
###########################################################################


def _kappa(u):
    u = np.abs(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    small = u < 0.1
    u2 = u[small] ** 2
    out[small] = u2 * (1 / 6 + u2 * (-1 / 180 + u2 * (1 / 2835 + u2 * (-1 / 37800 + u2 / 467775))))
    ul = u[~small]
    out[~small] = ul + np.log1p(-np.exp(-2 * ul)) - np.log(2 * ul)
    return out


def _kappa1(u):
    u = np.asarray(u, dtype=float)
    sign = np.sign(u)
    u = np.abs(u)
    out = np.empty_like(u)
    small = u < 0.1
    us = u[small]
    u2 = us * us
    out[small] = us * (1 / 3 + u2 * (-1 / 45 + u2 * (2 / 945 + u2 * (-1 / 4725 + u2 * 2 / 93555))))
    ul = u[~small]
    out[~small] = 1.0 + 2.0 / np.expm1(2 * ul) - 1.0 / ul
    return sign * out


def _kappa2(u):
    u = np.abs(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    small = u < 0.1
    u2 = u[small] ** 2
    out[small] = 1 / 3 + u2 * (-1 / 15 + u2 * (2 / 189 + u2 * (-1 / 675 + u2 * 2 / 10395)))
    ul = u[~small]
    e = np.exp(-2 * ul)
    out[~small] = 1.0 / (ul * ul) - 4.0 * e / np.expm1(-2 * ul) ** 2
    return out


def _log_sinhc_complex(z):
    """Complex log(sinh z / z), any branch (callers only exponentiate integer multiples)."""
    z = np.asarray(z, dtype=complex)
    z = np.where(z.real < 0, -z, z)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    z2 = z[small] ** 2
    out[small] = z2 * (1 / 6 + z2 * (-1 / 180 + z2 * (1 / 2835 + z2 * (-1 / 37800 + z2 / 467775))))
    zl = z[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = zl + np.log1p(-np.exp(-2 * zl)) - np.log(2 * zl)
    return out


###########################################################################
# Trigonometric polynomials
###########################################################################


def _terms(terms):
    terms = tuple(sorted((int(k), float(a)) for k, a in terms))
    ks = [k for k, _ in terms]
    assert all(k > 0 for k in ks), f"frequencies must be positive integers: {ks}"
    assert len(set(ks)) == len(ks), f"duplicate frequencies: {ks}"
    return terms


@dataclass(frozen=True)
class TrigPoly:
    """P(t) = a0 + sum_k a_k cos(kt) + sum_k b_k sin(kt) with integer frequencies."""

    a0: float = 0.0
    cos_terms: Tuple[Tuple[int, float], ...] = ()
    sin_terms: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "cos_terms", _terms(self.cos_terms))
        object.__setattr__(self, "sin_terms", _terms(self.sin_terms))

    @property
    def frequencies(self):
        return sorted({k for k, a in self.cos_terms if a != 0} | {k for k, b in self.sin_terms if b != 0})

    @property
    def degree(self):
        return max(self.frequencies, default=0)

    @property
    def gcd(self):
        g = 0
        for k in self.frequencies:
            g = math.gcd(g, k)
        return g or 1

    @property
    def period(self):
        return 2 * math.pi / self.gcd

    def _eval(self, t, deriv, weight):
        t = np.asarray(t)
        shift = deriv * math.pi / 2
        out = np.zeros(t.shape, dtype=np.result_type(t, float))
        if deriv == 0:
            out = out + self.a0
        for k, a in self.cos_terms:
            out = out + a * weight(k) * k**deriv * np.cos(k * t + shift)
        for k, b in self.sin_terms:
            out = out + b * weight(k) * k**deriv * np.sin(k * t + shift)
        return out

    def __call__(self, t, deriv=0):
        """P^(deriv)(t); t may be complex."""
        return self._eval(t, deriv, lambda k: 1.0)

    def lifted(self, x, deriv=0):
        """a0 + sum e^{k^2/2}(a_k cos kx + b_k sin kx), the Gaussian-relative image of P."""
        return self._eval(x, deriv, lambda k: math.exp(0.5 * k * k))

    def lift_norm(self):
        """|a0| + sum e^{k^2/2}(|a_k| + |b_k|); finite sums always qualify, 1/lift_norm bounds c_max below."""
        total = abs(self.a0)
        for k, a in self.cos_terms + self.sin_terms:
            total += math.exp(0.5 * k * k) * abs(a)
        return total

    def abs_coeff_sum(self):
        return abs(self.a0) + sum(abs(a) for _, a in self.cos_terms + self.sin_terms)

    def exponential_coeffs(self, lifted=False):
        """Coefficients of e^{i j g t}, j in [-K, K], as a complex array centered at K."""
        g = self.gcd
        K = self.degree // g
        out = np.zeros(2 * K + 1, dtype=complex)
        out[K] += self.a0
        for k, a in self.cos_terms:
            w = math.exp(0.5 * k * k) if lifted else 1.0
            out[K + k // g] += 0.5 * a * w
            out[K - k // g] += 0.5 * a * w
        for k, b in self.sin_terms:
            w = math.exp(0.5 * k * k) if lifted else 1.0
            out[K + k // g] += -0.5j * b * w
            out[K - k // g] += 0.5j * b * w
        return out

    def taylor(self, J):
        """Power-series coefficients of P at 0 up to order J."""
        coef = np.zeros(J + 1)
        coef[0] = self.a0
        for j in range(J + 1):
            sign = (-1) ** (j // 2)
            terms = self.cos_terms if j % 2 == 0 else self.sin_terms
            coef[j] += sign * sum(a * float(k) ** j for k, a in terms) / math.factorial(j)
        return coef

    def to_dict(self):
        return {
            "a0": self.a0,
            "cos": [[k, a] for k, a in self.cos_terms],
            "sin": [[k, b] for k, b in self.sin_terms],
        }

    @classmethod
    def from_function(cls, fn, max_freq, tol=1e-13):
        """Expand a 2pi-periodic function into cos/sin terms by DFT over one period."""
        M = 8 * (max_freq + 1)
        t = 2 * np.pi * np.arange(M) / M
        c = np.fft.rfft(fn(t)) / M
        scale = max(1.0, float(np.max(np.abs(c))))

        def snap(v):
            return 0.0 if abs(v) < tol * scale else float(v)

        cos_terms = [(k, snap(2 * c[k].real)) for k in range(1, max_freq + 1)]
        sin_terms = [(k, snap(-2 * c[k].imag)) for k in range(1, max_freq + 1)]
        return cls(
            a0=snap(c[0].real),
            cos_terms=[(k, a) for k, a in cos_terms if a != 0.0],
            sin_terms=[(k, b) for k, b in sin_terms if b != 0.0],
        )


def sin_power_poly(m):
    """sin^m(t) as a trigonometric polynomial (binomial expansion, exact)."""
    assert m >= 1, "power must be positive"
    pref = (2j) ** (-m)
    coeff = {}
    for j in range(m + 1):
        k = 2 * j - m
        coeff[k] = coeff.get(k, 0) + pref * math.comb(m, j) * (-1) ** (m - j)
    a0 = coeff.get(0, 0).real
    cos_terms = [(k, 2 * coeff[k].real) for k in range(1, m + 1) if k in coeff and abs(coeff[k].real) > 0]
    sin_terms = [(k, -2 * coeff[k].imag) for k in range(1, m + 1) if k in coeff and abs(coeff[k].imag) > 0]
    return TrigPoly(a0=a0, cos_terms=cos_terms, sin_terms=sin_terms)


###########################################################################
# Grid densities and Gaussian-relative deviations
###########################################################################


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridParams:
    L: float = 12.0
    points: int = 2**14 + 1

    def __post_init__(self):
        assert self.L > 0, "grid half-width L must be positive"
        assert self.points >= 3 and self.points % 2 == 1, "grid points must be odd and >= 3"

    @property
    def dx(self):
        return 2 * self.L / (self.points - 1)

    @property
    def x(self):
        return -self.L + self.dx * np.arange(self.points)

    def refined(self):
        return GridParams(self.L, 2 * self.points - 1)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density heights on x = x0 + dx * i.

    ``support`` marks a compact support whose endpoints are jumps; the
    endpoint heights then carry half the one-sided limit (trapezoid-exact).
    """

    x0: float
    dx: float
    values: np.ndarray
    support: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        assert self.dx > 0, "dx must be positive"
        object.__setattr__(self, "values", _frozen_array(self.values))
        assert self.values.ndim == 1 and self.values.size >= 3, "need at least 3 grid values"

    @classmethod
    def from_values(cls, x0, dx, values, support=None):
        """Clip quadrature negatives above -1e-12 (relative to the peak) to 0; refuse larger ones."""
        values = np.asarray(values, dtype=float)
        peak = max(1.0, float(np.max(np.abs(values))))
        worst = float(np.min(values))
        if worst < -NEG_TOL * peak:
            raise GridDensityError(f"density value {worst:.3e} below -1e-12 tolerance")
        return cls(x0, dx, np.maximum(values, 0.0), support)

    @property
    def n_points(self):
        return self.values.size

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.n_points)

    @property
    def weights(self):
        return trapezoid_weights(self.n_points, self.dx)

    def integrate(self, f_values):
        return float(np.sum(self.weights * f_values))

    @property
    def integral(self):
        return self.integrate(self.values)

    def moment(self, k):
        return self.integrate(self.x**k * self.values)

    @property
    def mean(self):
        return self.moment(1) / self.integral

    @property
    def variance(self):
        m = self.mean
        return self.integrate((self.x - m) ** 2 * self.values) / self.integral

    @property
    def max(self):
        return float(np.max(self.values))

    def __call__(self, x):
        """Linear between nodes: off-node values carry an O(dx^2 p'') interpolation error."""
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def check(self, standardized=False):
        """Raise GridDensityError on the first violated grid invariant."""
        worst = float(np.min(self.values))
        if worst < -NEG_TOL:
            raise GridDensityError(f"negative density value {worst:.3e}")
        if abs(self.integral - 1) > 1e-8:
            raise GridDensityError(f"integral {self.integral!r} not within 1e-8 of 1")
        if standardized:
            if abs(self.mean) > 1e-6 or abs(self.variance - 1) > 1e-6:
                raise GridDensityError(
                    f"not standardized: mean={self.mean:.3e}, variance={self.variance:.9f}"
                )
        return self

    def rescale(self, lam):
        """Density of lam * X: p(x / lam) / lam."""
        support = None if self.support is None else (lam * self.support[0], lam * self.support[1])
        return GridDensity(self.x0 * lam, self.dx * lam, np.asarray(self.values) / lam, support)

    def log_laplace(self, h):
        """log of the trapezoid Laplace transform at real h (max-shifted, no overflow)."""
        hx = h * self.x
        shift = float(np.max(hx[self.values > 0])) if np.any(self.values > 0) else 0.0
        return shift + math.log(self.integrate(np.exp(hx - shift) * self.values))

    def deviation(self):
        return GridDeviation(self.x0, self.dx, self.values / phi(self.x) - 1.0, self.support)

    def to_dict(self):
        return {"x0": self.x0, "dx": self.dx, "values": np.asarray(self.values).tolist()}


@dataclass(frozen=True, eq=False)
class SpectralDeviation:
    """r(x) = sum_j r_j e^{i j w x}, j in [-K, K], Hermitian so r is real."""

    base_freq: float
    coeffs: np.ndarray
    form: ClassVar[str] = "spectral"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs, complex))
        assert self.coeffs.size % 2 == 1, "coefficient array must be centered (odd length)"

    @property
    def K(self):
        return self.coeffs.size // 2

    @property
    def r0(self):
        return float(self.coeffs[self.K].real)

    @property
    def period(self):
        return 2 * math.pi / self.base_freq if self.base_freq > 0 else math.inf

    @property
    def l1(self):
        return float(np.sum(np.abs(self.coeffs)))

    def __call__(self, x, deriv=0, chunk=4096):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        K = self.K
        out = np.full(flat.shape, self.r0 if deriv == 0 else 0.0)
        if K == 0:
            return out.reshape(x.shape)
        j = np.arange(1, K + 1)
        c = self.coeffs[K + 1 :] * (1j * j * self.base_freq) ** deriv
        for i in range(0, flat.size, chunk):
            xs = flat[i : i + chunk]
            e = np.exp(1j * self.base_freq * xs[:, None] * j[None, :])
            out[i : i + chunk] += 2.0 * np.sum((e * c[None, :]).real, axis=1)
        return out.reshape(x.shape)

    def table(self):
        K = self.K
        return [
            (k, k * self.base_freq, float(self.coeffs[K + k].real), float(self.coeffs[K + k].imag))
            for k in range(-K, K + 1)
        ]


@dataclass(frozen=True, eq=False)
class GridDeviation:
    x0: float
    dx: float
    values: np.ndarray
    support: Optional[Tuple[float, float]] = None
    form: ClassVar[str] = "grid"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.values.size)

    def __call__(self, x):
        return np.interp(x, self.x, self.values)


###########################################################################
# Distribution specs
###########################################################################


def _box(a, x, dx):
    """Cell-averaged density of uniform(-a, a): mass-exact on the grid."""
    lo = np.maximum(x - 0.5 * dx, -a)
    hi = np.minimum(x + 0.5 * dx, a)
    return np.clip(hi - lo, 0.0, dx) / dx / (2 * a)


def uniform_density(a=SQRT3, grid=GridParams()):
    """Uniform(-a, a) on a grid aligned so that -a and a are grid points."""
    assert a > 0, "halfwidth must be positive"
    q = 2 ** math.ceil(math.log2(a / grid.dx))
    dx = a / q
    m = math.ceil(grid.L / a)
    n_points = 2 * m * q + 1
    x = -m * a + dx * np.arange(n_points)
    return GridDensity(-m * a, dx, _box(a, x, dx), support=(-a, a))


def weighted_uniform_sum(weights, grid=GridParams()):
    """Density of sum w_k xi_k, xi_k uniform(-sqrt3, sqrt3), by iterated grid convolution."""
    from scipy.signal import fftconvolve

    weights = sorted((float(w) for w in weights), key=abs, reverse=True)
    assert len(weights) >= 1, "need at least one weight"
    radius = SQRT3 * sum(abs(w) for w in weights)
    if len(weights) == 1:
        return uniform_density(SQRT3 * abs(weights[0]), grid)
    if radius >= grid.L:
        raise GridDensityError(f"support radius {radius:.3f} does not fit in grid L = {grid.L}")
    x, dx = grid.x, grid.dx
    values = _box(SQRT3 * abs(weights[0]), x, dx)
    for w in weights[1:]:
        values = fftconvolve(values, _box(SQRT3 * abs(w), x, dx), mode="same") * dx
    values[np.abs(x) > radius + dx] = 0.0
    return GridDensity.from_values(-grid.L, dx, values, support=(-radius, radius))


class DistributionSpec:
    """A mean-0, variance-1 law with a known Laplace transform route."""

    kind: ClassVar[str] = ""
    symmetric: ClassVar[bool] = True

    def to_dict(self):
        raise NotImplementedError()

    @property
    def spec_id(self):
        return misc.spec_hash(self.to_dict())

    @property
    def support_radius(self):
        """Radius of a compact support, None if the support is unbounded."""
        return None

    @property
    def t_period(self):
        """Period of Psi(t) = L(t) e^{-t^2/2} when the law is periodic w.r.t. the normal."""
        return None

    @property
    def is_normal(self):
        return False

    def density(self, grid=GridParams()):
        raise NotImplementedError()

    def log_laplace(self, s):
        """log L(s) for real or complex s (imaginary part up to 2 pi i)."""
        raise NotImplementedError()

    def log_cf(self, t):
        return self.log_laplace(1j * np.asarray(t, dtype=float))

    def cumulant_derivs(self, t):
        """(K, K', K'') at real t, exact or by quadrature of moment integrands."""
        raise NotImplementedError()

    def slack_derivs(self, t):
        """(A, A', A'') with A = t^2/2 - K."""
        t = np.asarray(t, dtype=float)
        K, K1, K2 = self.cumulant_derivs(t)
        return 0.5 * t * t - K, t - K1, 1.0 - K2


def admissible_range(P, n_grid=100_000):
    """(c_min, c_max) keeping 1 - c * lifted(P) >= 0: grid scan over one period plus a Newton polish."""
    h = P.period
    x = h * np.arange(n_grid) / n_grid
    vals = P.lifted(x)

    def polish(i, sign):
        xi = x[i]
        for _ in range(3):
            d1, d2 = P.lifted(xi, 1), P.lifted(xi, 2)
            if d2 * sign >= 0:
                break
            step = d1 / d2
            if abs(step) > h / n_grid:
                break
            xi -= step
        return max(sign * float(P.lifted(xi)), sign * float(vals[i])) * sign

    vmax = polish(int(np.argmax(vals)), 1)
    vmin = polish(int(np.argmin(vals)), -1)
    c_max = 1.0 / vmax if vmax > 0 else math.inf
    c_min = 1.0 / vmin if vmin < 0 else -math.inf
    return c_min, c_max


@dataclass(frozen=True)
class TrigGaussian(DistributionSpec):
    """Law with L(t) = (1 - c P(t)) e^{t^2/2}."""

    P: TrigPoly
    c: float
    kind: ClassVar[str] = "trig"

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        bad = [(d, float(self.P(0.0, d))) for d in range(3)]
        bad = [(d, v) for d, v in bad if abs(v) > 1e-12]
        if bad:
            names = {0: "P(0)", 1: "P'(0)", 2: "P''(0)"}
            raise RejectsNonStandardized(
                "moment constraints fail: " + ", ".join(f"{names[d]} = {v:.3e}" for d, v in bad)
            )
        c_min, c_max = self.admissible
        if self.c > c_max * (1 + 1e-10) or self.c < c_min * (1 + 1e-10):
            raise RejectsInadmissibleC(self.c, c_min, c_max)

    @cached_property
    def admissible(self):
        return admissible_range(self.P)

    @property
    def c_max(self):
        return self.admissible[1]

    @property
    def symmetric(self):
        return all(b == 0 for _, b in self.P.sin_terms) or self.c == 0

    @property
    def is_normal(self):
        return self.c == 0 or not self.P.frequencies and self.P.a0 == 0

    @property
    def t_period(self):
        return self.P.period

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, **self.P.to_dict()}

    def gauss_deviation(self):
        """r(x) = -c [a0 + sum e^{k^2/2}(a_k cos kx + b_k sin kx)] in spectral form."""
        return SpectralDeviation(float(self.P.gcd), -self.c * self.P.exponential_coeffs(lifted=True))

    def density(self, grid=GridParams()):
        r = self.gauss_deviation()
        for _ in range(4):
            x = grid.x
            dens = GridDensity.from_values(x[0], grid.dx, (1.0 + r(x)) * phi(x))
            if abs(dens.integral - 1) <= 1e-8:
                return dens
            grid = grid.refined()
        raise GridDensityError(f"integral {dens.integral!r} does not converge to 1 on refined grids")

    def _log_psi(self, s):
        s = np.asarray(s)
        if not np.iscomplexobj(s):
            return np.log1p(-self.c * self.P(s))
        N = self.P.degree
        big = N * np.abs(s.imag) > EXP_BUDGET
        out = np.empty(s.shape, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[~big] = np.log1p(-self.c * self.P(s[~big]))
            if np.any(big):
                sb = s[big]
                shift = N * np.abs(sb.imag)
                scaled = np.exp(-shift) - self.c * _scaled_trig(self.P, sb, shift)
                out[big] = shift + np.log(scaled)
        return out

    def log_laplace(self, s):
        s = np.asarray(s)
        return 0.5 * s * s + self._log_psi(s)

    def psi(self, t, deriv=0):
        """Psi^(deriv)(t) = (1 - c P)^(deriv)."""
        return (1.0 if deriv == 0 else 0.0) - self.c * self.P(t, deriv)

    def cumulant_derivs(self, t):
        t = np.asarray(t, dtype=float)
        psi0, psi1, psi2 = self.psi(t), self.psi(t, 1), self.psi(t, 2)
        if np.any(psi0 <= 0):
            raise NonfiniteLaplace("Psi(t) <= 0: the construction is not a probability law here")
        K = 0.5 * t * t + np.log1p(-self.c * self.P(t))
        K1 = t + psi1 / psi0
        K2 = 1.0 + (psi2 * psi0 - psi1 * psi1) / (psi0 * psi0)
        return K, K1, K2

    def slack_derivs(self, t):
        # formed from Psi directly: t^2/2 - K would cancel at c ~ 1e-14
        t = np.asarray(t, dtype=float)
        psi0, psi1, psi2 = self.psi(t), self.psi(t, 1), self.psi(t, 2)
        A = -np.log1p(-self.c * self.P(t))
        A1 = -psi1 / psi0
        A2 = -(psi2 * psi0 - psi1 * psi1) / (psi0 * psi0)
        return A, A1, A2


def _scaled_trig(P, z, shift):
    """P(z) * e^{-shift} without forming cosh/sinh of large arguments."""
    sr, si = z.real, z.imag
    out = P.a0 * np.exp(-shift)
    for k, a in P.cos_terms:
        ep, em = np.exp(k * si - shift), np.exp(-k * si - shift)
        out = out + a * (np.cos(k * sr) * 0.5 * (ep + em) - 1j * np.sin(k * sr) * 0.5 * (ep - em))
    for k, b in P.sin_terms:
        ep, em = np.exp(k * si - shift), np.exp(-k * si - shift)
        out = out + b * (np.sin(k * sr) * 0.5 * (ep + em) + 1j * np.cos(k * sr) * 0.5 * (ep - em))
    return out


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    halfwidth: float = SQRT3
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "halfwidth", float(self.halfwidth))
        if abs(self.halfwidth - SQRT3) > 1e-12:
            raise RejectsNonStandardized(
                f"uniform halfwidth {self.halfwidth!r} gives variance {self.halfwidth**2 / 3:.6f}, need sqrt(3)"
            )

    @property
    def support_radius(self):
        return self.halfwidth

    def to_dict(self):
        return {"kind": self.kind, "halfwidth": self.halfwidth}

    def density(self, grid=GridParams()):
        return uniform_density(self.halfwidth, grid)

    def log_laplace(self, s):
        s = np.asarray(s)
        if np.iscomplexobj(s):
            return _log_sinhc_complex(self.halfwidth * s)
        return _kappa(self.halfwidth * s)

    def log_cf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.sinc(self.halfwidth * t / np.pi).astype(complex))

    def cumulant_derivs(self, t):
        a = self.halfwidth
        u = a * np.asarray(t, dtype=float)
        return _kappa(u), a * _kappa1(u), a * a * _kappa2(u)


@dataclass(frozen=True)
class WeightedUniformSum(DistributionSpec):
    weights: Tuple[float, ...] = (1.0,)
    kind: ClassVar[str] = "wsum"

    def __post_init__(self):
        weights = tuple(sorted((float(w) for w in self.weights), key=abs, reverse=True))
        object.__setattr__(self, "weights", weights)
        if not weights:
            raise RejectsNonStandardized("weight list is empty")
        total = sum(w * w for w in weights)
        if abs(total - 1) > 1e-12:
            raise RejectsNonStandardized(f"sum of squared weights is {total!r}, need 1")

    @property
    def support_radius(self):
        return SQRT3 * sum(abs(w) for w in self.weights)

    def to_dict(self):
        return {"kind": self.kind, "weights": list(self.weights)}

    def density(self, grid=GridParams()):
        return weighted_uniform_sum(self.weights, grid)

    def log_laplace(self, s):
        s = np.asarray(s)
        out = 0.0
        for w in self.weights:
            if np.iscomplexobj(s):
                out = out + _log_sinhc_complex(SQRT3 * w * s)
            else:
                out = out + _kappa(SQRT3 * w * s)
        return out

    def cumulant_derivs(self, t):
        t = np.asarray(t, dtype=float)
        K = np.zeros_like(t)
        K1 = np.zeros_like(t)
        K2 = np.zeros_like(t)
        for w in self.weights:
            a = SQRT3 * abs(w)
            K += _kappa(a * t)
            K1 += a * _kappa1(a * t)
            K2 += a * a * _kappa2(a * t)
        return K, K1, K2


@dataclass(frozen=True, eq=False)
class GridSpec(DistributionSpec):
    grid_density: GridDensity = field(default=None)
    kind: ClassVar[str] = "grid"

    def __post_init__(self):
        g = self.grid_density
        assert g is not None, "grid spec needs a density"
        try:
            g.check(standardized=True)
        except GridDensityError as e:
            raise RejectsNonStandardized(str(e))

    @property
    def symmetric(self):
        v = np.asarray(self.grid_density.values)
        return abs(self.grid_density.x0 + self.grid_density.x[-1]) < 1e-12 and np.allclose(v, v[::-1], atol=1e-12)

    @property
    def support_radius(self):
        g = self.grid_density
        nz = np.nonzero(g.values > 0)[0]
        return float(max(abs(g.x[nz[0]]), abs(g.x[nz[-1]])))

    def to_dict(self):
        return {"kind": self.kind, **self.grid_density.to_dict()}

    def density(self, grid=None):
        return self.grid_density

    def _guard(self, s_real):
        g = self.grid_density
        bound = float(np.max(np.abs(s_real))) * max(abs(g.x0), abs(g.x[-1])) if np.size(s_real) else 0.0
        if bound > EXP_BUDGET:
            raise NonfiniteLaplace(f"|t| * x_max = {bound:.1f} exceeds the exponent budget")

    def log_laplace(self, s, chunk=64):
        s = np.asarray(s)
        self._guard(s.real)
        g = self.grid_density
        x, wp = g.x, g.weights * g.values
        flat = s.ravel()
        out = np.empty(flat.shape, dtype=complex if np.iscomplexobj(s) else float)
        for i in range(0, flat.size, chunk):
            sc = flat[i : i + chunk]
            shift = np.max(np.outer(sc.real, x), axis=1)
            vals = np.sum(np.exp(np.outer(sc, x) - shift[:, None]) * wp[None, :], axis=1)
            out[i : i + chunk] = shift + np.log(vals.astype(out.dtype))
        return out.reshape(s.shape)

    def cumulant_derivs(self, t, chunk=64):
        t = np.asarray(t, dtype=float)
        self._guard(t)
        g = self.grid_density
        x, wp = g.x, g.weights * g.values
        flat = t.ravel()
        K, K1, K2 = (np.empty(flat.shape) for _ in range(3))
        for i in range(0, flat.size, chunk):
            tc = flat[i : i + chunk]
            e = np.outer(tc, x)
            shift = np.max(e, axis=1)
            w = np.exp(e - shift[:, None]) * wp[None, :]
            m0 = np.sum(w, axis=1)
            m1 = np.sum(w * x, axis=1) / m0
            K[i : i + chunk] = shift + np.log(m0)
            K1[i : i + chunk] = m1
            K2[i : i + chunk] = np.sum(w * (x[None, :] - m1[:, None]) ** 2, axis=1) / m0
        if not (np.all(np.isfinite(K)) and np.all(K2 > 0)):
            raise NonfiniteLaplace("quadrature of the Laplace transform is not finite")
        return K.reshape(t.shape), K1.reshape(t.shape), K2.reshape(t.shape)


def build_trig_gaussian(P, c):
    """Spec, spectral Gaussian-relative deviation and c_max for L(t) = (1 - cP(t)) e^{t^2/2}."""
    spec = TrigGaussian(P, c)
    return spec, spec.gauss_deviation(), spec.c_max


def verify_laplace_identity(spec, t_samples, grid=GridParams()):
    """max_t |int e^{tx}(1+r)phi dx - (1 - cP(t)) e^{t^2/2}| / e^{t^2/2}.

    e^{tx} phi(x) = e^{t^2/2} phi(x - t), so the quadrature runs on a grid
    centered at t and the ratio never forms e^{t^2/2} itself.
    """
    r = spec.gauss_deviation()
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_samples, dtype=float)):
        if 0.5 * t * t > EXP_BUDGET:
            raise QuadratureOverflow(f"e^(t^2/2) at t = {t} exceeds the representable range")
        u = grid.x
        integrand = (1.0 + r(t + u)) * phi(u)
        lhs = float(np.sum(trapezoid_weights(u.size, grid.dx) * integrand))
        rhs = float(spec.psi(t))
        worst = max(worst, abs(lhs - rhs))
    return worst
