"""Local limit checks: the uniform density gap, the shifted-law representation
inside critical zones, and Richter-type asymptotics of log(p_n/phi)."""
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from subgauss.convolution import density_zn, ratio_at
from subgauss.diagnostics import critical_zone, first_nonzero_cumulant
from subgauss.distributions.cumulants import moments_and_cumulants
from subgauss.distributions.distributions import GridParams, phi
from subgauss.divergence import tail_constant
from subgauss.errors import AllZeroUpToJ, IllConditionedFit, ZoneViolation
from subgauss.lib.logger import Logger
from subgauss.lib.writers import write_csv, write_json
from subgauss.tilt import build_profile, shifted_moments

logger = Logger.get()

RESIDUAL_HEADER = ["n", "x", "lhs", "rhs", "residual"]
GAP_GROWTH = 1.25
MAX_COND = 1e12


@dataclass(frozen=True)
class RichterFit:
    m: int
    coefficient: float
    target: float
    mu_coefficient: Optional[float] = None
    cubic_coefficient: Optional[float] = None
    condition: float = 1.0

    @property
    def relative_error(self):
        if self.target == 0:
            return abs(self.coefficient)
        return abs(self.coefficient - self.target) / abs(self.target)


@dataclass(frozen=True)
class LogCubeRateCheck:
    n_list: Tuple[int, ...]
    tau0: float
    max_ratio: Tuple[float, ...]
    C: Tuple[float, ...]

    @property
    def spread(self):
        live = [c for c in self.C if c > 0]
        return max(live) / min(live) if live else 1.0


@dataclass
class LltReport:
    n_list: List[int]
    sup_gap: List[float]
    scaled_gap: List[float]
    lemma61_bound_ok: bool
    tilted_residuals: List[Tuple[int, float, float, float, float]] = field(default_factory=list)
    cramer: Optional[Tuple[float, float]] = None
    richter_fit: Optional[RichterFit] = None
    log_cube_rate: Optional[LogCubeRateCheck] = None

    def to_dict(self):
        return asdict(self)

    def save(self, out_dir, formats=None):
        write_json(out_dir / "llt.json", self.to_dict(), formats)
        write_csv(out_dir / "llt_residuals.csv", RESIDUAL_HEADER, self.tilted_residuals, formats)


def uniform_llt_gap(spec, n_list, method="auto", grid=GridParams()):
    """sup_x |p_n - phi| and its sqrt(n) / (M^2 beta3) normalization along the ladder."""
    report = moments_and_cumulants(spec)
    norm = report.M**2 * report.beta3
    gaps, scaled = [], []
    for n in n_list:
        g = density_zn(spec, n, method, grid).grid(grid)
        gap = float(np.max(np.abs(np.asarray(g.values) - phi(g.x))))
        gaps.append(gap)
        scaled.append(math.sqrt(n) * gap / norm)
    ok = all(s <= GAP_GROWTH * scaled[0] for s in scaled) if scaled and scaled[0] > 0 else True
    if not ok:
        logger.warning(f"normalized density gap grows along the ladder: {scaled}")
    return LltReport(list(n_list), gaps, scaled, ok)


def _zone_samples(profile, a, n, count=7):
    zones = critical_zone(profile, a, n)
    central = [iv for iv in zones.intervals if iv[0] <= 0 <= iv[1]]
    if not central:
        raise ZoneViolation(f"0 is not in the critical zone for a = {a}, n = {n}")
    lo, hi = central[0]
    half = 0.9 * min(-lo, hi, 1.0)
    return np.linspace(-half, half, count)


def tilted_llt_check(spec, n, a, x_samples=None, profile=None, c_const=None):
    """Rows (n, x, lhs, rhs, residual) comparing p_n(x sqrt n)/phi(x sqrt n) with
    e^{-n A(x) - n v_x^2 / 2} / sigma_x, residual scaled by sqrt(n) / c^4 with
    c = 1 + T_inf(p || phi) of the base law unless given."""
    if n < 4 * (a + 1):
        raise ZoneViolation(f"n = {n} < 4(a + 1) = {4 * (a + 1)}")
    if profile is None:
        profile = build_profile(spec)
    if c_const is None:
        c_const = tail_constant(spec)
    if x_samples is None:
        x_samples = _zone_samples(profile, a, n)
    x = np.asarray(x_samples, dtype=float)
    level = a / (n - 1)
    outside = x[profile.A_at(x) > level + 1e-12]
    if outside.size:
        raise ZoneViolation(f"x = {outside[0]:.4f} lies outside the critical zone A <= {level:.3e}")
    rt = math.sqrt(n)
    lhs = ratio_at(spec, n, x * rt)
    rows = []
    for xi, li in zip(x, lhs):
        sm = shifted_moments(profile, xi)
        rhs = math.exp(-n * sm.A_h - 0.5 * n * sm.v_h**2) / sm.sigma_h
        rows.append((n, float(xi), float(li), rhs, (float(li) - rhs) * rt / c_const**4))
    return rows


def cramer_coeffs(report):
    """(lambda0, lambda1) = (gamma3 / 6, (gamma4 - 3 gamma3^2) / 24)."""
    g3, g4 = report.gamma(3), report.gamma(4)
    return g3 / 6.0, (g4 - 3.0 * g3 * g3) / 24.0


def _log_ratio(spec, n, x):
    with np.errstate(divide="ignore"):
        return np.log(ratio_at(spec, n, x))


def richter_fit(spec, n_list, window=None, points=41, with_mu=True, with_cubic=False, report=None):
    """Least-squares coefficient of x^m / n^{m/2-1} in log(p_n/phi), pooled over the ladder.

    The default window is |x| <= n^{1/2 - 1/m}, inside the zone of normal
    attraction. Companion regressors x^{m-2} / n^{m/2-1} and 1 / n^{m/2-1}
    absorb the next terms of the expansion; x^3 / sqrt(n) is optional.
    """
    report = report or moments_and_cumulants(spec)
    try:
        m, gamma_m = first_nonzero_cumulant(report)
    except AllZeroUpToJ:
        m, gamma_m = 4, 0.0
    target = gamma_m / math.factorial(m)
    columns, y = [], []
    for n in n_list:
        w = window if window is not None else n ** (0.5 - 1.0 / m)
        x = np.linspace(-w, w, points)
        scale = n ** (m / 2 - 1)
        cols = [x**m / scale]
        if with_mu:
            cols += [x ** (m - 2) / scale, np.full_like(x, 1.0 / scale)]
        if with_cubic:
            cols.append(x**3 / math.sqrt(n))
        columns.append(np.stack(cols, axis=1))
        y.append(_log_ratio(spec, n, x))
    X = np.concatenate(columns)
    y = np.concatenate(y)
    if not np.all(np.isfinite(y)):
        raise IllConditionedFit("log ratio not finite inside the fit window")
    if X.shape[0] <= X.shape[1]:
        raise IllConditionedFit(f"{X.shape[0]} samples for {X.shape[1]} regressors")
    cond = float(np.linalg.cond(X))
    if not math.isfinite(cond) or cond > MAX_COND:
        raise IllConditionedFit(f"design matrix condition number {cond:.2e}")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    k = 1
    mu = None
    if with_mu:
        mu = float(coef[1])
        k = 3
    cubic = float(coef[k]) if with_cubic else None
    return RichterFit(m=m, coefficient=float(coef[0]), target=target, mu_coefficient=mu, cubic_coefficient=cubic, condition=cond)


def log_cube_rate_check(spec, n_list, tau0=0.25, step=0.02, report=None):
    """max_{|x| <= tau0 sqrt n} p_n/phi - 1 = C_n (log n)^3 / n, with the fitted C_n reported."""
    # (log n)^3 vanishes at n = 1
    n_list = [int(n) for n in n_list if n >= 2]
    assert n_list, "log-cube rate needs some n >= 2"
    report = report or moments_and_cumulants(spec)
    m, gamma_m = first_nonzero_cumulant(report)
    assert m % 2 == 0 and gamma_m < 0, f"needs m even and gamma_m < 0, got m = {m}, gamma_m = {gamma_m}"
    maxima, C = [], []
    for n in n_list:
        edge = tau0 * math.sqrt(n)
        x = np.arange(0.0, edge + step, step)
        x = x[x <= edge]
        if not spec.symmetric:
            x = np.concatenate([-x[:0:-1], x])
        top = float(np.max(ratio_at(spec, n, x)))
        maxima.append(top)
        C.append((top - 1.0) * n / math.log(n) ** 3)
    return LogCubeRateCheck(tuple(n_list), tau0, tuple(maxima), tuple(C))


def llt_report(spec, n_list, a=1.0, tilt_n=(64, 256), profile=None, c_const=None, tau0=0.25, x_samples=None):
    """All local-limit checks of one spec; ``x_samples`` overrides the critical-zone samples."""
    profile = profile if profile is not None else build_profile(spec)
    if c_const is None:
        c_const = tail_constant(spec)
    out = uniform_llt_gap(spec, n_list)
    cums = moments_and_cumulants(spec)
    out.cramer = cramer_coeffs(cums)
    for n in tilt_n:
        out.tilted_residuals += tilted_llt_check(spec, n, a, x_samples, profile=profile, c_const=c_const)
    if not spec.is_normal:
        fit_n = [n for n in n_list if n >= 16] or list(n_list)
        out.richter_fit = richter_fit(spec, fit_n, with_cubic=not spec.symmetric, report=cums)
        m, g = first_nonzero_cumulant(cums)
        if m % 2 == 0 and g < 0:
            out.log_cube_rate = log_cube_rate_check(spec, fit_n, tau0, report=cums)
    else:
        out.richter_fit = RichterFit(m=4, coefficient=0.0, target=0.0)
    return out
