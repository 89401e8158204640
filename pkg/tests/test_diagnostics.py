import math

import numpy as np
import pytest

from subgauss.diagnostics import (
    INCONCLUSIVE,
    VACUOUS,
    clt_condition_check,
    critical_zone,
    diagnose,
    first_nonzero_cumulant,
    periodic_criterion,
    periodic_roots,
    separation_margin,
    strict_check,
)
from subgauss.distributions import root_pi6_poly
from subgauss.distributions.cumulants import moments_and_cumulants
from subgauss.distributions.distributions import TrigGaussian, sin_power_poly
from subgauss.errors import AllZeroUpToJ, RangeTooSmall
from subgauss.tilt import build_profile, profile


def test_normal(normal):
    report = diagnose(normal)
    assert report.A_identically_zero
    assert report.predicted_clt
    assert report.cond_b == VACUOUS
    assert report.first_nonzero_cumulant is None
    with pytest.raises(AllZeroUpToJ):
        first_nonzero_cumulant(moments_and_cumulants(normal))


def test_sin4(sin4, sin4_profile):
    sc = strict_check(sin4_profile)
    assert sc.strictly_subgaussian
    # quartic zeros are located to about the cube root of round-off
    assert sc.zeros == pytest.approx((0.0, math.pi), abs=1e-4)
    report = diagnose(sin4, sin4_profile)
    assert report.predicted_clt
    assert [r.passed for r in report.periodic_criterion] == [True, True]
    assert all(abs(m) <= 1e-10 for _, m in report.separation_margins)
    assert report.first_nonzero_cumulant == (4, pytest.approx(-24 * sin4.c))


def test_root_pi6(root_pi6):
    report = diagnose(root_pi6)
    assert report.strictly_subgaussian
    assert report.A_zero_set == pytest.approx([0.0, math.pi / 6, 5 * math.pi / 6, math.pi], abs=1e-4)
    assert not report.predicted_clt
    failing = [r for r in report.periodic_criterion if not r.passed]
    assert [r.t for r in failing] == pytest.approx([math.pi / 6, 5 * math.pi / 6], abs=1e-9)
    assert failing[0].P2 == pytest.approx(1.5, rel=1e-9)


def test_periodic_criterion_is_scale_free():
    roots = periodic_roots(root_pi6_poly())
    assert roots == pytest.approx([0.0, math.pi / 6, 5 * math.pi / 6, math.pi], abs=1e-9)
    for c in (1e-14, 5e-14):
        verdicts = [r.passed for r in periodic_criterion(TrigGaussian(root_pi6_poly(), c))]
        assert verdicts == [True, False, False, True]


def test_sin6_passes():
    spec = TrigGaussian(sin_power_poly(6), 1e-7)
    assert all(r.passed for r in periodic_criterion(spec))
    assert diagnose(spec).predicted_clt


def test_uniform(uniform, uniform_profile):
    report = diagnose(uniform, uniform_profile)
    assert report.A_zero_set == pytest.approx([0.0], abs=1e-6)
    assert report.cond_b == VACUOUS
    assert all(m > 0 for _, m in report.separation_margins)
    assert report.predicted_clt
    m, g = report.first_nonzero_cumulant
    assert (m, g) == (4, pytest.approx(-1.2))


def test_uniform_separation_margin(uniform_profile):
    (t0, margin), = separation_margin(uniform_profile, [1.0])
    # 1 - sinh(sqrt3) / (sqrt3 e^{1/2})
    expected = 1 - math.sinh(math.sqrt(3)) / (math.sqrt(3) * math.exp(0.5))
    assert margin == pytest.approx(expected, abs=1e-8)


def test_short_range_is_rejected(uniform):
    prof = profile(uniform, np.linspace(-20.0, -1.0, 200))
    with pytest.raises(RangeTooSmall):
        strict_check(prof)
    with pytest.raises(RangeTooSmall):
        separation_margin(prof, [0.5])


def test_critical_zone_periodic(sin4, sin4_profile):
    zones = critical_zone(sin4_profile, 0.1, 101)
    assert len(zones.intervals) == 3
    assert zones.contains(0.0)
    assert not zones.contains(math.pi / 2)
    level = 0.1 / 100
    for lo, hi in zones.intervals:
        for e in (lo, hi):
            if abs(abs(e) - math.pi) > 1e-9:
                assert float(sin4_profile.A_at(e)) == pytest.approx(level, abs=1e-10)
    # sin^4 t = (1 - e^{-level}) / c on the central interval's edge
    edge = math.asin(((1 - math.exp(-level)) / sin4.c) ** 0.25)
    assert zones.intervals[1] == pytest.approx((-edge, edge), abs=1e-8)


def test_critical_zone_uniform(uniform_profile):
    zones = critical_zone(uniform_profile, 1.0, 101)
    (lo, hi), = zones.intervals
    assert lo == pytest.approx(-hi)
    assert 0.5 < hi < 0.8


def test_critical_zone_normal(normal):
    prof = build_profile(normal)
    zones = critical_zone(prof, 1.0, 64)
    assert zones.intervals == ((prof.t[0], prof.t[-1]),)


def test_verdict_table(root_pi6):
    text = diagnose(root_pi6).verdict_table().get_string()
    assert "periodic root" in text
    assert "CLT" in text


def test_report_serializes(sin4, sin4_profile):
    d = diagnose(sin4, sin4_profile).to_dict()
    assert d["predicted_clt"] is True
    assert d["cond_b"] in (VACUOUS, INCONCLUSIVE)


def test_clt_condition_check(uniform, uniform_profile, sin4, sin4_profile):
    sc, cond_a, cond_b, witness, margins, periodic, predicted = clt_condition_check(uniform, uniform_profile)
    assert sc.strictly_subgaussian
    assert cond_b == VACUOUS and witness == "separation holds"
    assert periodic == []
    assert predicted

    *_, witness, margins, periodic, predicted = clt_condition_check(sin4, sin4_profile)
    assert witness.startswith("periodic")
    assert len(periodic) == 2
    assert predicted
