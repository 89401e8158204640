"""Densities of Z_n = (X_1 + ... + X_n)/sqrt(n) by three independent routes.

* spectral: Gaussian-relative deviation q_n - 1 of a trig spec, built by
  binary powering directly in the lifted (Gaussian-relative) domain;
* cf: trapezoid inversion of f(t/sqrt(n))^n (FFT onto a grid, or direct sums
  at arbitrary points);
* gridconv: repeated FFT self-convolution of a grid density.

``ratio_at`` gives p_n(x)/phi(x) at arbitrary x with full relative accuracy,
through the spectral deviation or, for other specs, the shifted
representation p_n(x) = e^{-hx} L(h/sqrt(n))^n Q_h p_n(x) inverted at the
saddle point.
"""
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from subgauss.distributions.distributions import (
    SQRT_2PI,
    GridDensity,
    GridDeviation,
    GridParams,
    SpectralDeviation,
    TrigGaussian,
    phi,
)
from subgauss.errors import GridTooCoarse, LiftOverflow, MethodUnavailable, PhaseUnwrapFailure
from subgauss.lib.logger import Logger

logger = Logger.get()

ENVELOPE_LOG = -36.0  # |f_n| below e^-36 is dropped from the inversion
T_CAP = 2.0e5
MAX_FFT = 2**23
LIFT_GUARD = 1e15
DROP_TOL = 1e-32
TRIM_L = 14.0

METHODS = ("spectral", "cf", "gridconv")


@dataclass(frozen=True, eq=False)
class SumDensity:
    n: int
    method: str
    payload: Union[SpectralDeviation, GridDensity]
    accuracy: float
    spec: Optional[object] = None

    @property
    def is_spectral(self):
        return isinstance(self.payload, SpectralDeviation)

    def deviation(self):
        if self.is_spectral:
            return self.payload
        return self.payload.deviation()

    def __call__(self, x):
        """p_n(x)."""
        x = np.asarray(x, dtype=float)
        if self.is_spectral:
            return (1.0 + self.payload(x)) * phi(x)
        return self.payload(x)

    def grid(self, grid=GridParams()):
        """Grid view of the density (the payload itself for grid routes)."""
        if not self.is_spectral:
            return self.payload
        x = grid.x
        return GridDensity.from_values(x[0], grid.dx, self(x))

    def mean_variance(self):
        g = self.grid()
        return g.mean, g.variance

    def rows(self, grid=GridParams()):
        """CSV rows x,p,phi,ratio_minus_1."""
        if self.is_spectral:
            x = grid.x
            r = self.payload(x)
            ph = phi(x)
            return list(zip(x, (1.0 + r) * ph, ph, r))
        g = self.payload
        ph = phi(g.x)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(ph > 0, g.values / ph - 1.0, np.inf)
        return list(zip(g.x, g.values, ph, r))


###########################################################################
# characteristic functions
###########################################################################


def cf(spec, t):
    """f(t) = E e^{itX}."""
    return np.exp(spec.log_cf(np.asarray(t, dtype=float)))


def _binary_power(f, n):
    out = np.ones_like(f)
    base = f.copy()
    while n:
        if n & 1:
            out = out * base
        base = base * base
        n >>= 1
    return out


def cf_power(spec, t, n):
    """f(t/sqrt(n))^n in log-polar form: n * log|f| and n * unwrapped phase.

    A zero crossing on the t-grid (phase jump near pi) makes the unwrapped
    phase ambiguous; the samples are then powered by repeated squaring.
    """
    logf = spec.log_cf(np.asarray(t, dtype=float) / math.sqrt(n))
    try:
        with np.errstate(invalid="ignore"):
            raw = np.where(np.isfinite(logf.real), logf.imag, np.nan)
            if np.any(np.isnan(raw)) or np.any(np.abs(np.diff(raw)) > 0.5 * np.pi):
                raise PhaseUnwrapFailure("cf crosses zero on the t-grid")
        phase = np.unwrap(raw)
        return np.exp(n * logf.real + 1j * n * phase)
    except PhaseUnwrapFailure as e:
        logger.debug(f"{e}; powering by repeated squaring (n={n})")
        with np.errstate(over="ignore", invalid="ignore"):
            f = np.exp(logf)
        f = np.where(np.isfinite(logf.real), f, 0.0)
        return _binary_power(f, n)


def truncation(spec, n, t_cap=T_CAP):
    """(T, accuracy): inversion range where |f_n| stays below e^-36 beyond T.

    The envelope is the running maximum of n log|f(t/sqrt n)| taken from the
    right, so isolated zeros of f never end the range early.
    """
    step = 0.05
    t = np.arange(0.0, t_cap + step, step) if t_cap <= 2000 else np.concatenate(
        [np.arange(0.0, 2000.0, step), np.geomspace(2000.0, t_cap, 4000)]
    )
    with np.errstate(divide="ignore"):
        logmag = n * spec.log_cf(t / math.sqrt(n)).real
    env = np.maximum.accumulate(logmag[::-1])[::-1]
    above = np.nonzero(env >= ENVELOPE_LOG)[0]
    if above.size == 0:
        return step, 1e-15
    i = int(above[-1])
    if i + 1 < t.size:
        T = float(t[i + 1])
        return T, max(1e-15, math.exp(ENVELOPE_LOG) * T / (math.pi * max(n - 1, 1)))
    # power-law cf: truncation error of the tail integral, int_T^inf C t^-n dt,
    # with C read off the envelope over the last stretch of oscillations
    T = float(t[-1])
    tail = math.exp(float(env[-64])) * T / (math.pi * max(n - 1, 1))
    logger.debug(f"cf inversion capped at T={T:.3g} (n={n}); declared accuracy {tail:.2e}")
    return T, max(tail, 1e-15)


def density_zn_cf(spec, n, grid=GridParams()):
    """p_n on ``grid`` by trapezoid inversion of f(t/sqrt n)^n, evaluated with one FFT."""
    assert n >= 1, "n must be >= 1"
    T, accuracy = truncation(spec, n)
    dx_out = grid.dx
    m = 2 ** math.ceil(math.log2(2 * grid.L / dx_out))
    s = 2 ** max(0, math.ceil(math.log2(T * dx_out / math.pi)))
    while 2 * m * s > MAX_FFT and s > 1:
        s //= 2
    M = 2 * m * s
    P = m * dx_out  # the FFT grid spans [-P, P)
    dt = math.pi / P
    T = min(T, dt * (M // 2 - 1))
    k = np.arange(M // 2)
    t = k * dt
    live = t <= T
    fk = np.zeros(M // 2, dtype=complex)
    fk[live] = cf_power(spec, t[live], n)
    F = np.zeros(M, dtype=complex)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    F[: M // 2] = fk * sign
    F[M // 2 + 1 :] = np.conj(fk[1:][::-1]) * sign[1:][::-1]
    p = (dt / (2 * np.pi)) * np.fft.fft(F).real
    half = (grid.points - 1) // 2
    idx = s * (m - half + np.arange(grid.points))
    values = p[idx]
    tol = max(1e-12, 10 * accuracy)
    worst = float(np.min(values))
    if worst < -1e-12:
        logger.warning(f"cf inversion n={n}: clipping negatives down to {worst:.2e} (declared accuracy {accuracy:.1e})")
    if worst < -tol:
        raise GridTooCoarse(f"cf inversion produced {worst:.2e}, beyond its declared accuracy {accuracy:.1e}")
    dens = GridDensity(-grid.L, dx_out, np.maximum(values, 0.0))
    return SumDensity(n, "cf", dens, accuracy, spec)


def evaluate_cf_density(spec, n, x, L=12.0, chunk_x=64, chunk_t=65536):
    """p_n at arbitrary points by the same trapezoid rule as ``density_zn_cf`` (direct sums)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    T, _ = truncation(spec, n)
    dx_out = GridParams(L).dx
    P = 2 ** math.ceil(math.log2(2 * L / dx_out)) * dx_out
    dt = math.pi / P
    t = dt * np.arange(1, int(T / dt) + 1)
    f = cf_power(spec, t, n)
    out = np.empty_like(x)
    for i in range(0, x.size, chunk_x):
        xs = x[i : i + chunk_x]
        acc = np.zeros(xs.size)
        for j in range(0, t.size, chunk_t):
            e = np.exp(-1j * np.outer(xs, t[j : j + chunk_t]))
            acc += np.sum((e * f[None, j : j + chunk_t]).real, axis=1)
        out[i : i + chunk_x] = (dt / np.pi) * (0.5 + acc)
    return out


###########################################################################
# spectral route
###########################################################################


def _trim(coeffs):
    K = coeffs.size // 2
    mag = np.maximum(np.abs(coeffs[K:]), np.abs(coeffs[K::-1]))
    keep = np.nonzero(mag >= DROP_TOL)[0]
    K_new = int(keep[-1]) if keep.size else 0
    return coeffs[K - K_new : K + K_new + 1]


def combine_lifted(r1, m, r2, k, g):
    """Deviation of Z_{m+k} from the deviations of independent Z_m and Z_k.

    Harmonic j of Z_m sits at frequency j g / sqrt(m). With u = sqrt(m/(m+k)),
    v = sqrt(k/(m+k)), the product of harmonics j1, j2 lands on j1 + j2 with
    weight exp(-g^2 (k j1 - m j2)^2 / (2 m k (m + k))) <= 1.
    """
    K1, K2 = r1.size // 2, r2.size // 2
    j1 = np.arange(-K1, K1 + 1)
    j2 = np.arange(-K2, K2 + 1)
    denom = 2.0 * m * k * (m + k)
    K = K1 + K2
    out = np.zeros(2 * K + 1, dtype=complex)
    out[K - K1 : K + K1 + 1] += r1 * np.exp(-(g * k * j1) ** 2 / denom)
    out[K - K2 : K + K2 + 1] += r2 * np.exp(-(g * m * j2) ** 2 / denom)
    for a in range(r1.size):
        if r1[a] == 0:
            continue
        damp = np.exp(-(g * (k * j1[a] - m * j2)) ** 2 / denom)
        lo = K + j1[a] - K2
        out[lo : lo + r2.size] += r1[a] * r2 * damp
    out = 0.5 * (out + np.conj(out[::-1]))
    return _trim(out)


def density_zn_spectral(spec, n):
    """q_n - 1 of a trig spec as a spectral deviation with base frequency g / sqrt(n)."""
    if not isinstance(spec, TrigGaussian):
        raise MethodUnavailable(f"spectral route needs a trig spec, got {spec.kind}")
    assert n >= 1, "n must be >= 1"
    base = spec.gauss_deviation()
    g = base.base_freq
    r_base, m_base = np.array(base.coeffs), 1
    result, m_res = None, 0
    bits = n
    while bits:
        if bits & 1:
            if result is None:
                result, m_res = r_base, m_base
            else:
                result = combine_lifted(result, m_res, r_base, m_base, g)
                m_res += m_base
            peak = float(np.max(np.abs(result)))
            if peak > LIFT_GUARD:
                raise LiftOverflow(
                    f"lifted coefficient {peak:.2e} exceeds {LIFT_GUARD:.0e} at n={m_res}: c is inadmissible"
                )
        bits >>= 1
        if bits:
            r_base = combine_lifted(r_base, m_base, r_base, m_base, g)
            m_base *= 2
    dev = SpectralDeviation(g / math.sqrt(n), result)
    # roundoff of the lifted sums, relative to the coefficient mass
    return SumDensity(n, "spectral", dev, 1e-16 * max(dev.l1, 1e-300), spec)


###########################################################################
# grid convolution route
###########################################################################


def _edge_check(p):
    v = np.asarray(p.values)
    if max(v[0], v[-1]) > 1e-12 * max(1.0, float(np.max(v))):
        raise GridTooCoarse("density does not vanish at the grid edges; widen the grid")


def _trim_window(x0, dx, values, half_width):
    x = x0 + dx * np.arange(values.size)
    inside = np.abs(x) <= half_width
    lost = float(np.sum(values[~inside]) * dx)
    if lost > 1e-12:
        raise GridTooCoarse(f"mass {lost:.2e} outside the |x| <= {half_width:.1f} window")
    first = int(np.argmax(inside))
    return x0 + first * dx, values[inside]


def self_convolve(p, n):
    """Grid density of S_n = X_1 + ... + X_n (n a power of two) by FFT doubling."""
    assert n >= 1 and n & (n - 1) == 0, f"n must be a power of two, got {n}"
    _edge_check(p)
    x0, dx, values = p.x0, p.dx, np.asarray(p.values, dtype=float)
    m = 1
    while m < n:
        values = fftconvolve(values, values, mode="full") * dx
        x0 *= 2
        m *= 2
        x0, values = _trim_window(x0, dx, values, TRIM_L * math.sqrt(m))
    return x0, dx, np.maximum(values, 0.0)


def density_zn_gridconv(p, n, L=12.0):
    """p_n from repeated self-convolution of a grid density, rescaled to Z_n."""
    assert n <= 64, "grid convolution serves n <= 64"
    if n == 1:
        return SumDensity(1, "gridconv", p, 0.0)
    x0, dx, values = self_convolve(p, n)
    rt = math.sqrt(n)
    x0, values = _trim_window(x0 / rt, dx / rt, values * rt, L)
    return SumDensity(n, "gridconv", GridDensity.from_values(x0, dx / rt, values), 1e-12)


def convolution_max_bound(p, n):
    """(M(p^{*n}), sqrt(2/n) M(p)): the maximum of a convolution power never exceeds the bound."""
    _, _, values = self_convolve(p, n)
    return float(np.max(values)), math.sqrt(2.0 / n) * p.max


###########################################################################
# preferred routes and pointwise ratios
###########################################################################


def density_zn(spec, n, method="auto", grid=GridParams()):
    """Z_n density by the requested route; "auto" prefers spectral for trig specs, else cf."""
    if method == "auto":
        method = "spectral" if isinstance(spec, TrigGaussian) else "cf"
    if method == "spectral":
        return density_zn_spectral(spec, n)
    if method == "cf":
        if n == 1 and spec.support_radius is not None:
            # f is not integrable for jump densities; n = 1 is its own grid
            return SumDensity(1, "gridconv", spec.density(grid), 0.0, spec)
        return density_zn_cf(spec, n, grid)
    if method == "gridconv":
        if n & (n - 1) or n > 64:
            raise MethodUnavailable(f"grid convolution serves powers of two <= 64, not n={n}")
        out = density_zn_gridconv(spec.density(grid), n, grid.L)
        return SumDensity(out.n, out.method, out.payload, out.accuracy, spec)
    raise MethodUnavailable(f"unknown density route {method!r}")


def _saddle(spec, tau, radius):
    """s with K'(s) = tau (scalar), by bracketing on the monotone K'."""
    if tau == 0:
        return 0.0

    def g(s):
        return float(spec.cumulant_derivs(np.array([s]))[1][0]) - tau

    sign = 1.0 if tau > 0 else -1.0
    hi = sign * max(1.0, 2 * abs(tau))
    while g(hi) * sign < 0:
        hi *= 2
        if abs(hi) > 1e6:
            raise MethodUnavailable(f"no saddle point for tau={tau} (radius {radius})")
    lo, hi = (0.0, hi) if sign > 0 else (hi, 0.0)
    return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def tilted_ratio(spec, n, x, span=60.0):
    """p_n(x)/phi(x) through the shifted representation at the saddle point.

    p_n(x)/phi(x) = sqrt(2 pi) exp(n (tau^2/2 - s tau + K(s))) Q(x), tau = x/sqrt(n),
    K'(s) = tau, with Q(x) the density at x of Z_n shifted by s sqrt(n), whose
    mean is x; Q is recovered by inverting its characteristic function.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rt = math.sqrt(n)
    radius = spec.support_radius
    dt = 2 * math.pi / span
    out = np.zeros_like(x)
    for i, xi in enumerate(x):
        tau = xi / rt
        if radius is not None and abs(tau) >= radius * (1 - 1e-9):
            continue
        s = _saddle(spec, tau, radius)
        K, _, K2 = (float(v[0]) for v in spec.cumulant_derivs(np.array([s])))
        # Gaussian-like core of width 1/sqrt(K''(s)); extend until |g| < e^-36
        T = 12.0 / math.sqrt(K2)
        while True:
            t = dt * np.arange(1, int(T / dt) + 1)
            logg = n * (spec.log_laplace(s + 1j * t / rt) - K)
            if np.max(logg[-max(1, t.size // 8) :].real) < ENVELOPE_LOG or T > T_CAP:
                break
            T *= 2
        g = np.exp(logg - 1j * t * xi)
        Q = (dt / (2 * np.pi)) * (1.0 + 2.0 * float(np.sum(g.real)))
        out[i] = SQRT_2PI * math.exp(n * (0.5 * tau * tau - s * tau + K)) * max(Q, 0.0)
    return out


def ratio_at(spec, n, x):
    """p_n(x)/phi(x) with full relative accuracy at arbitrary x."""
    if isinstance(spec, TrigGaussian):
        return 1.0 + density_zn_spectral(spec, n).payload(np.asarray(x, dtype=float))
    return tilted_ratio(spec, n, x)
