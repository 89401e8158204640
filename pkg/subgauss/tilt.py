"""Log-Laplace profiles, the Esscher (shifted-distribution) transform and shifted moments."""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from subgauss.distributions.distributions import EXP_BUDGET, GridDensity, GridParams
from subgauss.errors import OutOfRange, OverflowAtTilt, ZoneViolation
from subgauss.lib.logger import Logger
from subgauss.lib.writers import write_csv

logger = Logger.get()

PROFILE_HEADER = ["t", "K", "K1", "K2", "A", "A1", "A2"]


@dataclass(frozen=True, eq=False)
class LogLaplaceProfile:
    t: np.ndarray
    K: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    A: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    spec_id: str
    period: Optional[float] = None

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    @cached_property
    def _A_interp(self):
        return CubicHermiteSpline(self.t, self.A, self.A1)

    @cached_property
    def _A1_interp(self):
        return CubicHermiteSpline(self.t, self.A1, self.A2)

    @cached_property
    def _K1_interp(self):
        return CubicHermiteSpline(self.t, self.K1, self.K2)

    @cached_property
    def _K2_interp(self):
        return CubicSpline(self.t, self.K2)

    def covers(self, h):
        h = np.asarray(h)
        return bool(np.all((h >= self.t[0] - 1e-12) & (h <= self.t[-1] + 1e-12)))

    def A_at(self, h):
        return self._A_interp(h)

    def A1_at(self, h):
        return self._A1_interp(h)

    def K1_at(self, h):
        return self._K1_interp(h)

    def K2_at(self, h):
        return self._K2_interp(h)

    def invariant_slacks(self):
        """Margins of K'' > 0, A'' <= 1 and (if strictly subgaussian) A'^2 <= 2A."""
        slacks = {"min_K2": float(np.min(self.K2)), "max_A2": float(np.max(self.A2))}
        if float(np.min(self.A)) >= -1e-10:
            slacks["max_A1sq_minus_2A"] = float(np.max(self.A1**2 - 2 * self.A))
        return slacks

    def rows(self):
        return list(zip(self.t, self.K, self.K1, self.K2, self.A, self.A1, self.A2))

    def to_csv(self, path, formats=None):
        write_csv(path, PROFILE_HEADER, self.rows(), formats)


@dataclass(frozen=True)
class ShiftedMoments:
    h: float
    m_h: float
    sigma_h: float
    v_h: float
    A_h: float


def profile(spec, t_grid):
    """Tabulate K, K', K'' (and A = t^2/2 - K) of ``spec`` on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    assert t.ndim == 1 and t.size >= 4, "t_grid needs at least 4 knots"
    assert np.all(np.diff(t) > 0), "t_grid must be increasing"
    K, K1, K2 = spec.cumulant_derivs(t)
    A, A1, A2 = spec.slack_derivs(t)
    return LogLaplaceProfile(t, K, K1, K2, A, A1, A2, spec.spec_id, spec.t_period)


def default_t_range(spec, t_max=20.0):
    if spec.t_period is not None:
        return -spec.t_period, spec.t_period
    return -t_max, t_max


def build_profile(spec, t_max=20.0, dt=1e-2, tol=1e-8, max_halvings=6, t_range=None):
    """Profile on a uniform knot grid, halving dt until midpoint interpolation agrees to ``tol``."""
    lo, hi = t_range if t_range is not None else default_t_range(spec, t_max)
    for _ in range(max_halvings + 1):
        n = int(math.ceil((hi - lo) / dt))
        t = lo + (hi - lo) * np.arange(n + 1) / n
        prof = profile(spec, t)
        mid = 0.5 * (t[1:] + t[:-1])
        _, K1, K2 = spec.cumulant_derivs(mid)
        A, A1, _ = spec.slack_derivs(mid)
        err = max(
            float(np.max(np.abs(prof.K1_at(mid) - K1))),
            float(np.max(np.abs(prof.K2_at(mid) - K2))),
            float(np.max(np.abs(prof.A_at(mid) - A))),
            float(np.max(np.abs(prof.A1_at(mid) - A1))),
        )
        if err <= tol:
            return prof
        logger.debug(f"profile dt={dt:.2e} midpoint error {err:.2e} > {tol:.0e}; halving")
        dt /= 2
    logger.warning(f"profile not grid-converged: midpoint error {err:.2e} at dt={dt * 2:.2e}")
    return prof


def shifted_moments(profile, h):
    """Mean, standard deviation, v_h = (h - m_h)/sigma_h and A(h) of the law shifted by h."""
    if not profile.covers(h):
        raise OutOfRange(f"h = {h} outside profile range [{profile.t[0]}, {profile.t[-1]}]")
    m_h = float(profile.K1_at(h))
    sigma_h = math.sqrt(float(profile.K2_at(h)))
    return ShiftedMoments(
        h=float(h),
        m_h=m_h,
        sigma_h=sigma_h,
        v_h=float(profile.A1_at(h)) / sigma_h,
        A_h=float(profile.A_at(h)),
    )


def esscher(p, h):
    """Q_h p(x) = e^{hx} p(x) / L(h), normalized by the grid's own trapezoid rule."""
    x = p.x
    x_max = max(abs(x[0]), abs(x[-1]))
    if abs(h) * x_max > EXP_BUDGET:
        raise OverflowAtTilt(f"|h| * x_max = {abs(h) * x_max:.1f} exceeds the exponent budget")
    hx = h * x
    live = np.asarray(p.values) > 0
    shift = float(np.max(hx[live])) if np.any(live) else 0.0
    values = np.exp(hx - shift) * p.values
    values /= p.integrate(values)
    return GridDensity(p.x0, p.dx, values, p.support)


def sigma_lower_bound_check(profile, c_const, h_samples):
    """min over h of sigma_h - sqrt(pi / (6 c^2)) e^{-A(h)}."""
    h = np.atleast_1d(np.asarray(h_samples, dtype=float))
    if not profile.covers(h):
        raise OutOfRange("h samples outside profile range")
    sigma = np.sqrt(profile.K2_at(h))
    bound = math.sqrt(math.pi / (6 * c_const**2)) * np.exp(-profile.A_at(h))
    return float(np.min(sigma - bound))


def _zone_guard(spec, h, n, a):
    if n < 4 * a + 1:
        raise ZoneViolation(f"n = {n} < 4a + 1 = {4 * a + 1}")
    A = float(spec.slack_derivs(np.array([h]))[0][0])
    if A > a / (n - 1):
        raise ZoneViolation(f"A({h}) = {A:.3e} > a/(n-1) = {a / (n - 1):.3e}: h is outside the critical zone")


def tilted_mgf_check(spec, h, n, a, grid=GridParams()):
    """E exp(sigma_h |Xhat(h)| / 2) = E exp(|X(h) - m_h| / 2) by quadrature of the tilted grid density."""
    _zone_guard(spec, h, n, a)
    q = esscher(spec.density(grid), h)
    m = q.integrate(q.x * q.values)
    return q.integrate(np.exp(0.5 * np.abs(q.x - m)) * q.values)


def tilted_third_moment_check(spec, h, n, a, grid=GridParams()):
    """(E|Xhat(h)|^3, 2e (3/e)^3 (2/sigma_h)^3): the moment bound implied by the mgf bound."""
    _zone_guard(spec, h, n, a)
    q = esscher(spec.density(grid), h)
    m = q.integrate(q.x * q.values)
    sigma = math.sqrt(q.integrate((q.x - m) ** 2 * q.values))
    beta = q.integrate(np.abs(q.x - m) ** 3 * q.values) / sigma**3
    return beta, 2 * math.e * (3 / math.e) ** 3 * (2 / sigma) ** 3


def max_variance_product(p):
    """M(p)^2 Var(p), never below 1/12."""
    return p.max**2 * p.variance
