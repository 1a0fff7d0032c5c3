"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test prints one ``[criterion N] PASS|FAIL`` line (visible in the
``pytest -v`` log) before asserting.
"""
import math
import time

import numpy as np
import pytest

from roughmill.averaging import averaging_error_sweep, ergodicity_decay
from roughmill.drivers import canonical_smooth_lift, sample_ito_brownian_lift, sample_mixed_lift, \
    smooth_test_path
from roughmill.harness.config import RunConfig
from roughmill.harness.experiments import cauchy_differences, cauchy_ratio, cauchy_threshold, ito_gap, \
    linear_path_convolution, run_experiment
from roughmill.hilbert_scale import SpectralOperator, norm_gamma
from roughmill.models import default_model, null_coupling_model
from roughmill.rough_path import max_chen_residual
from roughmill.slowfast import SolverConfig, increment_experiment, initial_state

SEED = 42
OP = SpectralOperator.dirichlet_laplacian(8)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed, budget):
        within = elapsed < budget
        with capsys.disabled():
            tag = "PASS" if ok and within else "FAIL"
            print(f"\n[criterion {n}] {tag} {detail} (runtime {elapsed:.1f}s < {budget:g}s: {within})")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f}s exceeds {budget}s"
    return emit


def test_criterion_1_chen(report):
    t0 = time.perf_counter()
    grid = np.linspace(0, 1, 65)
    f, df = smooth_test_path(3)
    lifts = {
        "smooth": canonical_smooth_lift(f, grid, derivative=df),
        "brownian": sample_ito_brownian_lift((SEED, 0, 0), grid, 2, 32),
        "mixed": sample_mixed_lift(SEED, 0, grid, 2, 1, 32)[2],
    }
    res = {k: max_chen_residual(p) for k, p in lifts.items()}
    ok = all(v <= 1e-12 for v in res.values())
    detail = "max Chen residual " + ", ".join(f"{k}={v:.2e}" for k, v in res.items()) + " (<= 1e-12)"
    report(1, ok, detail, time.perf_counter() - t0, 5)


def test_criterion_2_convolution_oracle(report):
    t0 = time.perf_counter()
    targets = {1.0: 0.6321206, 4.0: 0.2454211, 9.0: 0.1110973}
    errs = {}
    for lam, target in targets.items():
        assert abs((1 - math.exp(-lam)) / lam - target) < 1e-7
        errs[lam] = abs(linear_path_convolution(lam, 12) - target)
    ok = all(e <= 1e-3 for e in errs.values())
    detail = "depth 12 errors " + ", ".join(f"lambda={k:g}: {v:.2e}" for k, v in errs.items()) + " (<= 1e-3)"
    report(2, ok, detail, time.perf_counter() - t0, 10)


def test_criterion_3_sewing_cauchy(report):
    t0 = time.perf_counter()
    grid = np.linspace(0, 1, 2 ** 12 + 1)
    diffs = [cauchy_differences(OP, sample_ito_brownian_lift((SEED, s, 0), grid, 2, 32), range(8, 13))
             for s in range(20)]
    ratio = cauchy_ratio(diffs)
    thr = cauchy_threshold(0.45)
    report(3, ratio <= thr, f"mean successive-depth ratio {ratio:.3f} (<= {thr:.3f})", time.perf_counter() - t0, 60)


def test_criterion_4_ito_consistency(report):
    t0 = time.perf_counter()
    grid = np.linspace(0, 1, 2 ** 12 + 1)
    gaps, sizes = [], []
    for s in range(100):
        rough, euler = ito_gap(OP, sample_ito_brownian_lift((SEED, s, 1), grid, 2, 32))
        gaps.append(norm_gamma(rough - euler, OP, 0) ** 2)
        sizes.append(norm_gamma(euler, OP, 0) ** 2)
    rel = math.sqrt(np.mean(gaps) / np.mean(sizes))
    report(4, rel <= 0.05, f"relative RMS gap {rel:.4f} (<= 0.05)", time.perf_counter() - t0, 120)


def test_criterion_5_ergodicity(report):
    t0 = time.perf_counter()
    m = default_model(OP)
    x, _ = initial_state(OP, SolverConfig())
    t = np.arange(61) * 0.1
    res = ergodicity_decay(OP, m, x, np.full(8, 2.0), t, replicas=1000, seed=SEED)
    assert res.theoretical_rate == pytest.approx(0.6875)
    ok = res.rate >= 0.34 and res.nonincreasing and res.cauchy_schwarz_ok
    detail = (f"fitted rate {res.rate:.3f} (>= 0.34), smoothed nonincreasing={res.nonincreasing}, "
              f"Cauchy-Schwarz={res.cauchy_schwarz_ok}")
    report(5, ok, detail, time.perf_counter() - t0, 300)


def test_criterion_6_increment_scaling(report):
    t0 = time.perf_counter()
    m = default_model(OP)
    cfg = SolverConfig(alpha=0.45, sigma=0.0, seed=SEED)
    tab = increment_experiment(OP, m, cfg, [2.0 ** -k for k in range(4, 9)], 200)
    report(6, tab.slope >= 1.6, f"log-log slope {tab.slope:.3f} (>= 1.6)", time.perf_counter() - t0, 600)


def test_criterion_7_averaging(report):
    t0 = time.perf_counter()
    m = default_model(OP)
    cfg = SolverConfig(alpha=0.45, T=0.5, seed=SEED)
    tab = averaging_error_sweep(OP, m, cfg, [0.05, 0.01, 0.002], 100)
    dec = tab.strictly_decreasing()
    ratio = tab.mean[-1] / tab.mean[0]
    detail = (f"errors {', '.join(f'{v:.3e}' for v in tab.mean)}; strictly decreasing beyond pooled SE={dec}; "
              f"last/first={ratio:.3f} (<= 0.5)")
    report(7, dec and ratio <= 0.5, detail, time.perf_counter() - t0, 1800)


def test_criterion_8_null_coupling(report):
    t0 = time.perf_counter()
    n = null_coupling_model(OP)
    cfg = SolverConfig(alpha=0.45, T=0.5, seed=SEED)
    tab = averaging_error_sweep(OP, n, cfg, [0.05, 0.01, 0.002], 100)
    sup = float(np.sqrt(np.max(tab.per_replica, axis=0)).max())
    report(8, sup <= 1e-4, f"max sup-norm difference {sup:.2e} (<= 1e-4)", time.perf_counter() - t0, 300)


def test_criterion_9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    run = RunConfig()
    a = run_experiment("averaging", run, tmp_path / "a")
    b = run_experiment("averaging", run, tmp_path / "b")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("averaging.csv", "averaging_null.csv"))
    report(9, same and a.passed == b.passed, f"byte-identical averaging CSVs={same}", time.perf_counter() - t0,
           1800)
