"""Renyi and Tsallis divergences of Z_n densities relative to the standard normal.

Both functionals are evaluated on the discretized pair (P_i, Q_i), the
quadrature-weighted density and normal masses each normalized to one; the
ladder alpha -> D_alpha is then monotone by construction, and every
evaluation goes through log1p/expm1 so deviations down to 1e-15 keep their
digits.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from subgauss.convolution import density_zn, ratio_at
from subgauss.distributions.distributions import GridParams, phi, trapezoid_weights
from subgauss.errors import DivergentIntegral, UncertifiedTail
from subgauss.lib.logger import Logger
from subgauss.lib.writers import write_csv, write_json

logger = Logger.get()

DEFAULT_ALPHAS = (0.5, 1.001, 2.0, 4.0, 8.0, 16.0, 32.0)
SPECTRAL_L = 14.0
SCAN_POINTS = 2**16
TRUST_FACTOR = 1e4
TAIL_STEP = 0.05

GRID_ONLY = "GridOnly"
ANALYTIC_TAIL = "AnalyticTailBound"

CSV_HEADER = ["alpha", "D", "T", "argmax_x"]


@dataclass(frozen=True)
class DivergenceReport:
    alphas: tuple
    D_alpha: tuple
    T_alpha: tuple
    D_inf: float
    T_inf: float
    argmax_x: float
    tail_method: str
    n: Optional[int] = None
    extras: dict = field(default_factory=dict)

    def rows(self):
        rows = [(a, d, t, "") for a, d, t in zip(self.alphas, self.D_alpha, self.T_alpha)]
        rows.append(("inf", self.D_inf, self.T_inf, self.argmax_x))
        return rows

    def to_dict(self):
        return {
            "n": self.n,
            "alphas": list(self.alphas),
            "D_alpha": list(self.D_alpha),
            "T_alpha": list(self.T_alpha),
            "D_inf": self.D_inf,
            "T_inf": self.T_inf,
            "argmax_x": self.argmax_x,
            "tail_method": self.tail_method,
            **self.extras,
        }

    def save(self, out_dir, stem="divergence", formats=None):
        write_csv(out_dir / f"{stem}.csv", CSV_HEADER, self.rows(), formats)
        write_json(out_dir / f"{stem}.json", self.to_dict(), formats)


@dataclass(frozen=True, eq=False)
class _Discrete:
    """Normal masses Q_i and log-ratios l_i = log(P_i / Q_i) on a quadrature grid."""

    Q: np.ndarray
    ell: np.ndarray


def _spectral_grid(dev):
    max_freq = dev.K * dev.base_freq
    dx = min(0.01, 0.1 / max_freq) if max_freq > 0 else 0.01
    points = 2 * int(math.ceil(SPECTRAL_L / dx)) + 1
    return np.linspace(-SPECTRAL_L, SPECTRAL_L, points)


def trusted_mask(sum_density):
    """Grid points where the density's absolute accuracy still resolves the ratio."""
    x = sum_density.payload.x
    floor = max(sum_density.accuracy, 1e-300) * TRUST_FACTOR
    return phi(x) >= floor


def _edge_growing(ratio, mask):
    """(left, right): ratio above 1 and still increasing outward at the trusted edges."""
    idx = np.nonzero(mask)[0]
    if idx.size < 3:
        return False, False
    lo, hi = idx[0], idx[-1]
    left = ratio[lo] > 1 and ratio[lo] > ratio[lo + 1]
    right = ratio[hi] > 1 and ratio[hi] > ratio[hi - 1]
    return bool(left), bool(right)


def discretize(sum_density):
    if sum_density.is_spectral:
        dev = sum_density.payload
        x = _spectral_grid(dev)
        w = trapezoid_weights(x.size, x[1] - x[0]) * phi(x)
        r = dev(x)
    else:
        g = sum_density.payload
        x = g.x
        mask = trusted_mask(sum_density)
        w = g.weights * phi(x) * mask
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(mask, np.asarray(g.values) / phi(x) - 1.0, 0.0)
    Q = w / np.sum(w)
    r_bar = float(np.sum(Q * r))
    with np.errstate(divide="ignore"):
        ell = np.log1p(r) - math.log1p(r_bar)
    return _Discrete(Q, ell)


def _check_divergent(sum_density, alpha):
    if alpha <= 1 or sum_density.is_spectral:
        return
    g = sum_density.payload
    mask = trusted_mask(sum_density)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mask, np.asarray(g.values) / phi(g.x), 0.0)
    if any(_edge_growing(ratio, mask)):
        raise DivergentIntegral(f"ratio p/phi grows at the edge of the resolved grid (alpha = {alpha})")


def _moment_minus_one(d, alpha):
    """I_alpha - 1 = sum Q_i expm1(alpha l_i)."""
    with np.errstate(invalid="ignore"):
        terms = np.where(np.isneginf(d.ell), -1.0, np.expm1(alpha * d.ell))
    return float(np.sum(d.Q * terms))


def _renyi_tsallis(d, alpha):
    excess = _moment_minus_one(d, alpha)
    return math.log1p(excess) / (alpha - 1), excess / (alpha - 1)


def renyi(p, alpha, _disc=None):
    """D_alpha(p || phi) = log(int (p/phi)^alpha phi) / (alpha - 1)."""
    assert alpha > 0 and alpha != 1, f"alpha must be positive and != 1, got {alpha}"
    _check_divergent(p, alpha)
    d = _disc if _disc is not None else discretize(p)
    return _renyi_tsallis(d, alpha)[0]


def tsallis(p, alpha, _disc=None):
    """T_alpha(p || phi) = (int (p/phi)^alpha phi - 1) / (alpha - 1)."""
    assert alpha > 0 and alpha != 1, f"alpha must be positive and != 1, got {alpha}"
    _check_divergent(p, alpha)
    d = _disc if _disc is not None else discretize(p)
    return _renyi_tsallis(d, alpha)[1]


def kl(p):
    """int p log(p/phi), the alpha -> 1 limit of both families."""
    d = discretize(p)
    P = d.Q * np.exp(d.ell)
    live = P > 0
    return float(np.sum(P[live] * d.ell[live]))


def chi_square(p):
    """int (p - phi)^2 / phi evaluated directly on the density."""
    if p.is_spectral:
        x = _spectral_grid(p.payload)
        r = p.payload(x)
        return float(np.sum(trapezoid_weights(x.size, x[1] - x[0]) * r * r * phi(x)))
    g = p.payload
    mask = trusted_mask(p)
    ph = phi(g.x)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(mask, (np.asarray(g.values) - ph) ** 2 / ph, 0.0)
    return g.integrate(integrand)


###########################################################################
# order infinity
###########################################################################


def _spectral_sup(dev):
    if dev.K == 0 or dev.l1 - abs(dev.r0) == 0:
        return dev.r0, 0.0
    period = dev.period
    x = -0.5 * period + period * np.arange(SCAN_POINTS) / SCAN_POINTS
    r = dev(x)
    top = float(np.max(r))
    near = np.nonzero(r >= top - 1e-12 * max(abs(top), 1e-300))[0]
    i = min(near, key=lambda k: (abs(x[k]), -x[k]))
    step = period / SCAN_POINTS
    xi = float(x[i])
    for _ in range(8):
        d1 = float(dev(np.array([xi]), deriv=1)[0])
        d2 = float(dev(np.array([xi]), deriv=2)[0])
        if d2 >= 0:
            break
        move = float(np.clip(-d1 / d2, -step, step))
        xi += move
        if abs(move) < 1e-13 * max(1.0, abs(xi)):
            break
    val = float(dev(np.array([xi]))[0])
    if val < top:
        return top, float(x[i])
    return val, xi


def _grid_ratio(g, mask):
    """p/phi on the trusted grid, with one-sided limits at the support jumps."""
    x = g.x
    values = np.array(g.values, dtype=float)
    if g.support is not None:
        for edge, inward in ((g.support[0], 1), (g.support[1], -1)):
            k = int(round((edge - g.x0) / g.dx))
            if 0 <= k < values.size and abs(x[k] - edge) < 1e-9 * g.dx + 1e-12:
                k1, k2 = k + inward, k + 2 * inward
                if 0 <= k2 < values.size:
                    values[k] = 2 * values[k1] - values[k2]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mask, values / phi(x) - 1.0, -np.inf)


def _tail_scan(spec, n, x_from, x_to, best, best_x):
    """Refine the sup on [x_from, x_to] (either sign) with pointwise ratios."""
    if abs(x_to) <= abs(x_from):
        return best, best_x
    sign = 1.0 if x_from >= 0 else -1.0
    lo, hi = sorted((abs(x_from), abs(x_to)))
    xs = sign * np.arange(lo, hi + TAIL_STEP, TAIL_STEP)
    r = ratio_at(spec, n, xs) - 1.0
    i = int(np.argmax(r))
    if r[i] > best:
        return float(r[i]), float(xs[i])
    return best, best_x


def _certified_extent(profile, c_const, n, level, x_start, sign, radius):
    """Smallest |x| beyond which c sqrt(2) e^{-(n-1) A(x/sqrt n)} - 1 < level."""
    rt = math.sqrt(n)
    t_end = profile.t[-1] if sign > 0 else -profile.t[0]
    tau = np.linspace(abs(x_start) / rt, t_end, 4096)
    bound = c_const * math.sqrt(2) * np.exp(-(n - 1) * profile.A_at(sign * tau)) - 1.0
    failing = np.nonzero(bound >= level)[0]
    if failing.size == 0:
        return abs(x_start)
    if failing[-1] == tau.size - 1:
        if radius is not None and radius <= t_end:
            return radius * rt
        raise UncertifiedTail(f"tail bound still above {level:.3e} at the end of the profile (n={n})")
    return float(tau[failing[-1] + 1]) * rt


def t_inf(p, profile=None, c_const=None):
    """(T_inf, argmax_x, tail_method) for a Z_n density.

    Spectral deviations are periodic: one period is scanned at 2^16 points and
    the best point polished by Newton steps on r'. Grid densities use the
    trusted grid; beyond it, a profile together with c = 1 + T_inf(p_1 || phi)
    certifies the tail, and the gap up to the certified point is scanned with
    pointwise ratios.
    """
    if p.is_spectral:
        T, x = _spectral_sup(p.payload)
        return T, x, GRID_ONLY
    g = p.payload
    mask = trusted_mask(p)
    ratio = _grid_ratio(g, mask)
    i = int(np.argmax(ratio))
    best, best_x = float(ratio[i]), float(g.x[i])
    left, right = _edge_growing(ratio + 1.0, mask)
    idx = np.nonzero(mask)[0]
    x_lo, x_hi = float(g.x[idx[0]]), float(g.x[idx[-1]])
    covers_support = g.support is not None and x_lo <= g.support[0] and g.support[1] <= x_hi
    if profile is None or c_const is None or p.spec is None or covers_support:
        if (left or right) and not covers_support:
            raise UncertifiedTail("ratio still increasing at the grid edge and no profile to bound the tail")
        return best, best_x, GRID_ONLY

    spec, n = p.spec, p.n
    radius = spec.support_radius
    sides = [(x_hi, 1.0)] if spec.symmetric else [(x_hi, 1.0), (x_lo, -1.0)]
    for x_edge, sign in sides:
        x_cert = _certified_extent(profile, c_const, n, best, x_edge, sign, radius)
        best, best_x = _tail_scan(spec, n, x_edge, sign * x_cert, best, best_x)
    # the scan may have raised the level; the bound must clear the final value too
    for x_edge, sign in sides:
        _certified_extent(profile, c_const, n, best, x_edge, sign, radius)
    if spec.symmetric and best_x < 0:
        best_x = -best_x
    return best, best_x, ANALYTIC_TAIL


def d_inf(p, profile=None, c_const=None):
    return math.log1p(t_inf(p, profile, c_const)[0])


def tail_constant(spec, grid=GridParams()):
    """c = 1 + T_inf(p || phi) of the base law, the constant of the tail bound."""
    return 1.0 + t_inf(density_zn(spec, 1, "auto", grid))[0]


def uniform_n_bound(T1):
    """sqrt(2) (1 + T_inf(p_1)) - 1: the uniform-in-n bound on T_inf(p_n)."""
    return math.sqrt(2) * (1.0 + T1) - 1.0


def zone_bound_check(p, profile, c_const, a):
    """(sup of p_n/phi over grid x with A(x/sqrt n) > a/(n-1), c sqrt(2) e^{-a})."""
    n = p.n
    assert n >= 2 and a > 0, "zone bound needs n >= 2 and a > 0"
    if p.is_spectral:
        x = _spectral_grid(p.payload)
        ratio = 1.0 + p.payload(x)
    else:
        x = p.payload.x
        mask = trusted_mask(p)
        ratio = np.where(mask, _grid_ratio(p.payload, mask) + 1.0, 0.0)
    tau = x / math.sqrt(n)
    inside = profile.covers(tau)
    if not inside:
        keep = (tau >= profile.t[0]) & (tau <= profile.t[-1])
        x, ratio, tau = x[keep], ratio[keep], tau[keep]
    outside_zone = profile.A_at(tau) > a / (n - 1)
    sup = float(np.max(ratio[outside_zone])) if np.any(outside_zone) else 0.0
    return sup, c_const * math.sqrt(2) * math.exp(-a)


def divergence_report(p, alphas=DEFAULT_ALPHAS, profile=None, c_const=None, threads=1):
    """Renyi/Tsallis ladder plus order infinity, alphas evaluated in parallel, collected in order."""
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        _check_divergent(p, a)
    d = discretize(p)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pairs = list(pool.map(lambda a: _renyi_tsallis(d, a), alphas))
    T, x, method = t_inf(p, profile, c_const)
    D_alpha = tuple(v[0] for v in pairs)
    slips = [b - a for a, b in zip(D_alpha, D_alpha[1:]) if b < a - 1e-9]
    if slips:
        logger.warning(f"D_alpha not monotone on the ladder (worst slip {min(slips):.2e})")
    return DivergenceReport(
        alphas=alphas,
        D_alpha=D_alpha,
        T_alpha=tuple(v[1] for v in pairs),
        D_inf=math.log1p(T),
        T_inf=T,
        argmax_x=x,
        tail_method=method,
        n=p.n,
    )
