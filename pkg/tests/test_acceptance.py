"""End-to-end checks across modules on the built-in laws."""
import math

import numpy as np
import pytest

from subgauss.convolution import density_zn
from subgauss.diagnostics import diagnose
from subgauss.distributions import BUILTIN_SPECS, get_builtin
from subgauss.divergence import DEFAULT_ALPHAS, chi_square, uniform_n_bound, d_inf, renyi, t_inf, tsallis
from subgauss.local_limit import uniform_llt_gap
from subgauss.sweep import STALLS_AT, restricted_sup_check, run_sweep
from subgauss.tilt import build_profile, sigma_lower_bound_check

STRICT = [name for name in BUILTIN_SPECS if name != "normal"]


@pytest.mark.parametrize("name", BUILTIN_SPECS)
@pytest.mark.parametrize("n", [1, 2, 4])
def test_identities(name, n, grid):
    p = density_zn(get_builtin(name), n, grid=grid)
    g = p.grid(grid)
    assert g.integral == pytest.approx(1.0, abs=max(1e-8, 10 * p.accuracy))

    D = [renyi(p, a) for a in DEFAULT_ALPHAS]
    assert all(b >= a - 1e-9 for a, b in zip(D, D[1:]))
    T, _, _ = t_inf(p)
    assert T == pytest.approx(math.expm1(d_inf(p)), rel=1e-10, abs=1e-300)
    if p.accuracy <= 1e-10:
        # routes with a declared error floor truncate both sides differently
        assert tsallis(p, 2.0) == pytest.approx(chi_square(p), abs=1e-8)


@pytest.mark.parametrize("name", STRICT)
def test_profile_inequalities(name):
    prof = build_profile(get_builtin(name))
    slacks = prof.invariant_slacks()
    assert slacks["min_K2"] > 0
    assert slacks["max_A2"] <= 1 + 1e-9
    assert slacks["max_A1sq_minus_2A"] <= 1e-9


@pytest.mark.parametrize("name", ["uniform", "wsum_half"])
def test_sigma_bound(name, grid):
    spec = get_builtin(name)
    c = 1 + t_inf(density_zn(spec, 1, grid=grid))[0]
    prof = build_profile(spec)
    slack = sigma_lower_bound_check(prof, c, np.linspace(-3.0, 3.0, 13))
    assert slack >= -1e-9


@pytest.mark.parametrize("name", ["uniform", "sin4"])
def test_uniform_in_n_bound(name, grid):
    spec = get_builtin(name)
    prof, c = None, None
    T1 = t_inf(density_zn(spec, 1, grid=grid))[0]
    if name == "uniform":
        prof, c = build_profile(spec), 1 + T1
    for n in (2, 4, 16, 64):
        T = t_inf(density_zn(spec, n, grid=grid), prof, c)[0]
        assert T <= uniform_n_bound(T1) + 1e-6


def test_gap_shape_sin4():
    n_list = [16, 32, 64, 128]
    report = uniform_llt_gap(get_builtin("sin4"), n_list)
    assert report.lemma61_bound_ok
    assert max(report.scaled_gap) <= 4 * min(report.scaled_gap)


def test_no_clt_witness_and_stall():
    spec = get_builtin("sin4_root_pi6")
    report = diagnose(spec)
    assert not report.predicted_clt
    witness = next(r for r in report.periodic_criterion if not r.passed)
    assert witness.t == pytest.approx(math.pi / 6)
    assert witness.P2 == pytest.approx(1.5)
    sweep = run_sweep(spec, (256, 512, 1024), threads=3, predicted_clt=report.predicted_clt)
    assert sweep.verdict == STALLS_AT
    # (1 - 3c/2)^{-1/2} - 1 to first order
    assert sweep.stall_level == pytest.approx(0.75 * spec.c, rel=0.2)


@pytest.mark.slow
def test_restricted_sup_shrinks_to_n1024():
    spec = get_builtin("uniform")
    small = restricted_sup_check(spec, 64, c_window=1.0)
    big = restricted_sup_check(spec, 1024, c_window=1.0)
    assert small.unrestricted_abs >= 0.9
    assert big.restricted < small.restricted


@pytest.mark.parametrize("name,n_list", [("sin4", (16, 32, 64, 128)), ("uniform", (16, 32, 64))])
def test_sweep_csv_is_thread_independent(name, n_list, tmp_path):
    spec = get_builtin(name)
    for threads in (1, 8):
        run_sweep(spec, n_list, threads=threads).save(tmp_path, stem=f"sweep_{threads}")
    assert (tmp_path / "sweep_1.csv").read_bytes() == (tmp_path / "sweep_8.csv").read_bytes()
