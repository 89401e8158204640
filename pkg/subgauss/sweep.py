"""n-ladders of T_inf(p_n || phi): rate fits and convergence verdicts."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from subgauss.convolution import density_zn, ratio_at
from subgauss.diagnostics import clt_condition_check, separation_margin
from subgauss.distributions.distributions import GridParams, TrigGaussian, phi
from subgauss.divergence import t_inf, tail_constant
from subgauss.errors import SeparationNotEstablished
from subgauss.lib.logger import Logger
from subgauss.lib.query import Q
from subgauss.lib.writers import DummyWriter, write_csv, write_json
from subgauss.tilt import build_profile

logger = Logger.get()

SWEEP_HEADER = ["n", "T_inf", "argmax_x", "D_inf", "rate_constant", "sup_gap"]
DEFAULT_LADDER = (16, 32, 64, 128, 256, 512, 1024)
MAX_N = 4096
STALL_BAND = 0.25
STALL_RESOLUTION = 10.0
JITTER = 0.05

CONVERGES = "converges"
STALLS_AT = "stalls_at"
INCONCLUSIVE = "inconclusive"


@dataclass
class LadderPoint:
    n: int
    T_inf: float
    argmax_x: float
    D_inf: float
    sup_gap: float
    resolvable: float
    tail_method: str

    @property
    def rate_constant(self):
        if self.n < 2:
            return math.nan
        return self.T_inf * self.n / math.log(self.n) ** 3


@dataclass
class RateSweep:
    spec_id: str
    points: List[LadderPoint]
    loglog_slope: float
    verdict: str
    stall_level: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @property
    def n_list(self):
        return Q(self.points).select("n").array()

    @property
    def T_inf(self):
        return Q(self.points).select("T_inf").array()

    @property
    def argmax_x(self):
        return Q(self.points).select("argmax_x").array()

    @property
    def rate_constant(self):
        return Q(self.points).select("rate_constant").array()

    def rows(self):
        return [(p.n, p.T_inf, p.argmax_x, p.D_inf, p.rate_constant, p.sup_gap) for p in self.points]

    def summary(self):
        return {
            "spec_id": self.spec_id,
            "n_list": [p.n for p in self.points],
            "loglog_slope": self.loglog_slope,
            "verdict": self.verdict,
            "stall_level": self.stall_level,
            "tail_methods": [p.tail_method for p in self.points],
            **self.extras,
        }

    def save(self, out_dir, stem="sweep", formats=None):
        write_csv(out_dir / f"{stem}.csv", SWEEP_HEADER, self.rows(), formats)
        write_json(out_dir / f"{stem}.json", self.summary(), formats)


def loglog_slope(n_list, values):
    """Least-squares slope of log(value) on log(n) over the upper half of the ladder."""
    n = np.asarray(n_list, dtype=float)
    v = np.asarray(values, dtype=float)
    half = n.size // 2
    n, v = n[half:], v[half:]
    if n.size < 2 or np.any(v <= 0):
        return math.nan
    return float(np.polyfit(np.log(n), np.log(v), 1)[0])


def verdict_of(points, predicted_clt=None):
    """(verdict, stall level); converges is never emitted against a no-CLT diagnosis."""
    T = np.array([p.T_inf for p in points])
    if np.all(np.abs(T) <= 1e-15):
        return CONVERGES, None
    if len(points) >= 3:
        last = T[-3:]
        level = float(np.mean(last))
        resolvable = max(p.resolvable for p in points[-3:])
        if level > 0 and np.all(np.abs(last - level) <= STALL_BAND * level) and level > STALL_RESOLUTION * resolvable:
            return STALLS_AT, level
    upper = T[len(T) // 2 :]
    nonincreasing = all(b <= a * (1 + JITTER) for a, b in zip(upper, upper[1:]))
    if nonincreasing and upper[-1] < upper[0] and predicted_clt is not False:
        return CONVERGES, None
    return INCONCLUSIVE, None


def _resolvable(sum_density, x):
    if sum_density.is_spectral:
        return 1e-15 * max(sum_density.payload.l1, 1e-300)
    return sum_density.accuracy / max(float(phi(x)), 1e-300)


def _grid_gap(sum_density, grid):
    g = sum_density.grid(grid)
    return float(np.max(np.abs(np.asarray(g.values) - phi(g.x))))


def run_sweep(spec, n_list=DEFAULT_LADDER, method="auto", threads=1, writer=None, predicted_clt=None, grid=GridParams()):
    """T_inf(p_n) along the ladder; ladder entries run in parallel and are collected in n order.

    Without ``predicted_clt`` the CLT prediction is computed here, so the
    verdict never reads converges for a law diagnosed without a CLT.
    """
    n_list = [int(n) for n in n_list]
    assert all(a < b for a, b in zip(n_list, n_list[1:])), "n_list must be increasing"
    assert n_list and n_list[0] >= 1 and n_list[-1] <= MAX_N, f"n must lie in [1, {MAX_N}]"
    writer = writer or DummyWriter()
    profile, c_const = None, None
    if not isinstance(spec, TrigGaussian):
        # grid routes certify their tails with the profile bound
        profile = build_profile(spec)
        c_const = tail_constant(spec, grid)

    if predicted_clt is None:
        predicted_clt = clt_condition_check(spec, profile if profile is not None else build_profile(spec))[-1]

    def task(n):
        p = density_zn(spec, n, method, grid)
        T, x, tail = t_inf(p, profile, c_const)
        return LadderPoint(
            n=n,
            T_inf=T,
            argmax_x=x,
            D_inf=math.log1p(T),
            sup_gap=_grid_gap(p, grid),
            resolvable=_resolvable(p, x),
            tail_method=tail,
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        points = list(pool.map(task, n_list))
    for p in points:
        scalars = {"T_inf": p.T_inf, "D_inf": p.D_inf, "rate_constant": p.rate_constant}
        writer.add_scalars_with_prefix(scalars, p.n, f"{spec.spec_id}/")
        logger.info(f"n={p.n:5d}  T_inf={p.T_inf:.6e}  argmax_x={p.argmax_x:+.4f}  [{p.tail_method}]")
    slope = loglog_slope(n_list, [p.T_inf for p in points])
    verdict, level = verdict_of(points, predicted_clt)
    return RateSweep(spec.spec_id, points, slope, verdict, level, {"predicted_clt": predicted_clt})


@dataclass(frozen=True)
class SupContrast:
    n: int
    restricted: float
    unrestricted_abs: float
    unrestricted_signed: float
    unrestricted_witness: float


def _line(spec, n, step):
    """Half-line (or full line for asymmetric laws) reaching past the support edge or one period."""
    rt = math.sqrt(n)
    if spec.support_radius is not None:
        end = spec.support_radius * rt + 1.0
    elif spec.t_period is not None and not spec.is_normal:
        end = spec.t_period * rt
    else:
        end = 12.0
    x = np.arange(0.0, end + step, step)
    return x if spec.symmetric else np.concatenate([-x[:0:-1], x])


def restricted_sup_check(spec, n, c_window=1.0, step=0.05):
    """sup |p_n - phi| / phi over |x| <= c sqrt(log n), next to the unrestricted sups."""
    assert n >= 2, "restricted sup needs n >= 2"
    edge = c_window * math.sqrt(math.log(n))
    x = np.arange(0.0, edge + step / 4, step / 4)
    x = x[x <= edge]
    if not spec.symmetric:
        x = np.concatenate([-x[:0:-1], x])
    restricted = float(np.max(np.abs(ratio_at(spec, n, x) - 1.0)))
    xs = _line(spec, n, step)
    r = ratio_at(spec, n, xs) - 1.0
    i = int(np.argmax(np.abs(r)))
    return SupContrast(
        n=n,
        restricted=restricted,
        unrestricted_abs=float(np.abs(r[i])),
        unrestricted_signed=float(np.max(r)),
        unrestricted_witness=float(xs[i]),
    )


def tail_decay_check(spec, tau0, n_list, profile=None, t0_list=(0.5, 1.0, 2.0), step=0.05):
    """[(n, sup_{|x| >= tau0 sqrt n} p_n/phi)] and the slope of their logs in n."""
    if spec.is_normal:
        raise SeparationNotEstablished("the normal law has Psi = 1 everywhere")
    profile = profile or build_profile(spec)
    margins = separation_margin(profile, t0_list)
    if not all(m > 0 for _, m in margins):
        raise SeparationNotEstablished(f"separation margins {margins}")
    rows = []
    for n in n_list:
        rt = math.sqrt(n)
        far = _line(spec, n, step)
        far = far[np.abs(far) >= tau0 * rt]
        far = np.concatenate([[tau0 * rt], far]) if spec.symmetric else far
        rows.append((n, float(np.max(ratio_at(spec, n, far)))))
    sups = np.array([s for _, s in rows])
    slope = float(np.polyfit([n for n, _ in rows], np.log(sups), 1)[0]) if len(rows) >= 2 and np.all(sups > 0) else math.nan
    return rows, slope
