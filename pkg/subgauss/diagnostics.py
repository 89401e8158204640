"""Strict-subgaussianity and CLT-criterion diagnostics on log-Laplace profiles."""
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from prettytable import PrettyTable
from scipy.optimize import brentq

from subgauss.distributions.cumulants import moments_and_cumulants
from subgauss.distributions.distributions import TrigGaussian
from subgauss.errors import AllZeroUpToJ, RangeTooSmall
from subgauss.lib.logger import Logger
from subgauss.tilt import build_profile

logger = Logger.get()

STRICT_TOL = 1e-10
EPS_A_EXACT = 1e-8
EPS_A_GRID = 1e-6
ROOT_SCAN = 2**14

VACUOUS = "vacuous"
SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StrictCheck:
    strictly_subgaussian: bool
    min_A: float
    zeros: Tuple[float, ...]
    identically_zero: bool = False


@dataclass(frozen=True)
class PeriodicRoot:
    t: float
    P: float
    P2: float
    passed: bool


@dataclass(frozen=True)
class ZoneSet:
    a: float
    n: int
    intervals: Tuple[Tuple[float, float], ...]

    def contains(self, t):
        return any(lo <= t <= hi for lo, hi in self.intervals)


@dataclass
class DiagnosticsReport:
    spec_id: str
    strictly_subgaussian: bool
    min_A: float
    A_zero_set: List[float]
    A_identically_zero: bool
    cond_a: List[Tuple[float, float, bool]]  # (t, A'' or P'', ok)
    cond_b: str
    cond_b_witness: str
    separation_margins: List[Tuple[float, float]]
    periodic_criterion: List[PeriodicRoot]
    first_nonzero_cumulant: Optional[Tuple[int, float]]
    predicted_clt: bool
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def verdict_table(self):
        table = PrettyTable(["check", "value", "verdict"])
        table.align["check"] = "l"
        table.add_row(["strictly subgaussian", f"min A = {self.min_A:.3e}", self.strictly_subgaussian])
        zeros = "A = 0 everywhere" if self.A_identically_zero else ", ".join(f"{t:.6f}" for t in self.A_zero_set)
        table.add_row(["zeros of A", zeros, ""])
        table.add_row(["condition a)", f"{len(self.cond_a)} zero(s) checked", all(ok for *_, ok in self.cond_a)])
        table.add_row(["condition b)", self.cond_b_witness, self.cond_b])
        for t0, margin in self.separation_margins:
            table.add_row([f"separation t0={t0:g}", f"{margin:.3e}", margin > 0])
        for root in self.periodic_criterion:
            table.add_row([f"periodic root t={root.t:.6f}", f"P''={root.P2:.6g}", root.passed])
        if self.first_nonzero_cumulant is not None:
            m, g = self.first_nonzero_cumulant
            table.add_row(["first nonzero cumulant", f"gamma_{m} = {g:.6g}", ""])
        table.add_row(["CLT in sup(p_n - phi)/phi", "", self.predicted_clt])
        return table


###########################################################################
# zeros of A
###########################################################################


def _local_minima(A):
    """Indices of (weak) local minima, range ends included."""
    left = np.concatenate([[True], A[1:] <= A[:-1]])
    right = np.concatenate([A[:-1] <= A[1:], [True]])
    return np.nonzero(left & right)[0]


def _polish_zero(profile, i):
    t = profile.t
    lo, hi = max(i - 1, 0), min(i + 1, t.size - 1)
    f_lo, f_hi = float(profile.A1_at(t[lo])), float(profile.A1_at(t[hi]))
    if f_lo < 0 < f_hi:
        return brentq(lambda s: float(profile.A1_at(s)), t[lo], t[hi], xtol=1e-13)
    return float(t[i])


def strict_check(profile):
    """(strictly subgaussian?, min A, zeros of A) over the profile range.

    Zeros of a nonnegative A are minima, so they are located from A' sign
    changes at sampled minima whose height is negligible against max A.
    """
    A = np.asarray(profile.A)
    min_A = float(np.min(A))
    peak = float(np.max(np.abs(A)))
    strict = min_A >= -STRICT_TOL
    if peak < 1e-300:
        return StrictCheck(strict, min_A, (), identically_zero=True)
    if profile.period is None:
        if profile.A1[-1] < -STRICT_TOL or profile.A1[0] > STRICT_TOL:
            raise RangeTooSmall(f"A still descending at the end of [{profile.t[0]:g}, {profile.t[-1]:g}]")
    tol = 1e-8 * peak if strict else STRICT_TOL
    zeros = []
    for i in _local_minima(A):
        # knots straddle most zeros; judge the height at the polished minimum
        z = _polish_zero(profile, i)
        if abs(float(profile.A_at(z))) > tol:
            continue
        if profile.period is not None and not (-1e-12 <= z <= profile.period + 1e-12):
            continue
        if not zeros or abs(z - zeros[-1]) > 2 * profile.dt:
            zeros.append(z)
    return StrictCheck(strict, min_A, tuple(zeros))


###########################################################################
# periodic criterion (on P, scale free)
###########################################################################


def periodic_roots(P):
    """Points t in [0, h] where P vanishes at a local extremum: where Psi = 1 - cP touches 1."""
    h = P.period
    t = h * np.arange(ROOT_SCAN + 1) / ROOT_SCAN
    vals = P(t).real
    scale = max(P.abs_coeff_sum(), 1e-300)
    roots = []
    for sign in (1.0, -1.0):
        v = sign * vals
        for i in _local_minima(v):
            if abs(v[i]) > 1e-6 * scale:
                continue
            ti = float(t[i])
            for _ in range(20):
                d1 = float(P(ti, 1).real)
                d2 = float(P(ti, 2).real)
                if d2 == 0:
                    break
                step = d1 / d2
                if abs(step) > h / ROOT_SCAN:
                    break
                ti -= step
                if abs(step) < 1e-15:
                    break
            if abs(float(P(ti).real)) <= 1e-10 * scale:
                roots.append(min(max(ti, 0.0), h))
    roots.sort()
    merged = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 1e-6:
            merged.append(r)
    return merged


def periodic_criterion(spec):
    """Psi(t) = 1 => Psi''(t) = 0 checked at the roots of P in one period; [] when P = 0."""
    P = spec.P
    if spec.is_normal:
        return []
    scale = P.abs_coeff_sum()
    out = []
    for t in periodic_roots(P):
        P2 = float(P(t, 2).real)
        out.append(PeriodicRoot(t=t, P=float(P(t).real), P2=P2, passed=abs(P2) <= EPS_A_EXACT * scale))
    return out


###########################################################################
# conditions of the CLT criterion
###########################################################################


def separation_margin(profile, t0_list):
    """[(t0, 1 - sup_{|t| >= t0} Psi(t))] with Psi = e^{-A}."""
    out = []
    t, A = profile.t, np.asarray(profile.A)
    for t0 in t0_list:
        assert t0 > 0, "t0 must be positive"
        if profile.period is not None:
            # {|t| >= t0} holds a full period of Psi, where Psi reaches 1 at t = 0 mod h
            h = profile.period
            s = np.linspace(t0, t0 + h, 4097)
            s = np.append(np.mod(s, h), 0.0)
            sup_psi = float(np.max(np.exp(-profile.A_at(s))))
        else:
            if profile.A1[-1] <= 0 or profile.A1[0] >= 0:
                raise RangeTooSmall(f"Psi not visibly decreasing at the profile ends (t0 = {t0})")
            far = np.abs(t) >= t0
            if not np.any(far):
                raise RangeTooSmall(f"profile range does not reach |t| >= {t0}")
            sup_psi = float(np.max(np.exp(-A[far])))
            edge = float(np.max(np.exp(-profile.A_at(np.array([t0, -t0]))))) if profile.covers([-t0, t0]) else 0.0
            sup_psi = max(sup_psi, edge)
        out.append((float(t0), 1.0 - sup_psi))
    return out


def _cond_a(spec, profile, zeros):
    if isinstance(spec, TrigGaussian):
        # scale free: at a zero of A, A'' = c P''
        scale = spec.P.abs_coeff_sum()
        return [(z, float(spec.P(z, 2).real), abs(float(spec.P(z, 2).real)) <= EPS_A_EXACT * scale) for z in zeros]
    eps = EPS_A_GRID if spec.kind == "grid" else EPS_A_EXACT
    out = []
    for z in zeros:
        A2 = float(spec.slack_derivs(np.array([z]))[2][0])
        out.append((z, A2, abs(A2) <= eps))
    return out


def clt_condition_check(spec, profile, t0_list=(0.5, 1.0, 2.0)):
    """cond a), cond b) verdict, separation margins and periodic roots.

    cond b) is decided for periodic laws (finitely many roots per period)
    and for laws with the separation property; otherwise it is inconclusive.
    """
    sc = strict_check(profile)
    if not sc.strictly_subgaussian:
        logger.warning(f"min A = {sc.min_A:.3e}: not strictly subgaussian, CLT criteria do not apply")
    if sc.identically_zero:
        return sc, [], VACUOUS, "normal law (A = 0)", [(t0, 0.0) for t0 in t0_list], [], True

    cond_a = _cond_a(spec, profile, sc.zeros)
    margins = separation_margin(profile, t0_list)
    periodic = []
    if profile.period is not None and isinstance(spec, TrigGaussian):
        periodic = periodic_criterion(spec)
        cond_b, witness = VACUOUS, f"periodic: {len(periodic)} root(s) per period"
        predicted = sc.strictly_subgaussian and all(r.passed for r in periodic)
    else:
        if all(m > 0 for _, m in margins):
            cond_b, witness = VACUOUS, "separation holds"
        else:
            cond_b, witness = INCONCLUSIVE, "no finite certificate for t -> infinity"
        predicted = sc.strictly_subgaussian and all(ok for *_, ok in cond_a) and cond_b != VIOLATED
    return sc, cond_a, cond_b, witness, margins, periodic, predicted


def critical_zone(profile, a, n):
    """Sublevel intervals {A <= a/(n-1)} within the profile range."""
    assert a > 0 and n >= 2, "critical zone needs a > 0 and n >= 2"
    level = a / (n - 1)
    t = profile.t
    below = np.asarray(profile.A) <= level

    def g(s):
        return float(profile.A_at(s)) - level

    intervals = []
    i = 0
    while i < t.size:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < t.size and below[j + 1]:
            j += 1
        lo = float(t[0]) if i == 0 else brentq(g, t[i - 1], t[i], xtol=1e-14)
        hi = float(t[-1]) if j == t.size - 1 else brentq(g, t[j], t[j + 1], xtol=1e-14)
        intervals.append((lo, hi))
        i = j + 1
    for lo, hi in intervals:
        for e in (lo, hi):
            if e not in (t[0], t[-1]):
                assert abs(g(e)) <= 1e-10, f"zone endpoint {e} misses the level by {g(e):.2e}"
    return ZoneSet(a=a, n=n, intervals=tuple(intervals))


def first_nonzero_cumulant(report, strict=False):
    """(m, gamma_m) with m >= 3; strict laws that are not normal have m even and gamma_m < 0."""
    if report.first_nonzero is None:
        raise AllZeroUpToJ(f"all cumulants 3..{report.J} within {report.threshold:.1e} of zero")
    m, g = report.first_nonzero
    if strict:
        assert m % 2 == 0 and g < 0, f"strictly subgaussian law with gamma_{m} = {g}"
    return m, g


def diagnose(spec, profile=None, J=8, t0_list=(0.5, 1.0, 2.0)):
    """Full diagnostics report of a spec."""
    if profile is None:
        profile = build_profile(spec)
    sc, cond_a, cond_b, witness, margins, periodic, predicted = clt_condition_check(spec, profile, t0_list)
    notes = []
    try:
        fnz = first_nonzero_cumulant(moments_and_cumulants(spec, J), strict=sc.strictly_subgaussian)
    except AllZeroUpToJ as e:
        fnz = None
        notes.append(str(e))
    return DiagnosticsReport(
        spec_id=spec.spec_id,
        strictly_subgaussian=sc.strictly_subgaussian,
        min_A=sc.min_A,
        A_zero_set=list(sc.zeros),
        A_identically_zero=sc.identically_zero,
        cond_a=cond_a,
        cond_b=cond_b,
        cond_b_witness=witness,
        separation_margins=margins,
        periodic_criterion=periodic,
        first_nonzero_cumulant=fnz,
        predicted_clt=predicted,
        notes=notes,
    )
