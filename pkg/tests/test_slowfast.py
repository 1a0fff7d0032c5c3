import math

import numpy as np
import pytest

from roughmill.convolution import drift_convolve
from roughmill.drivers import canonical_smooth_lift, smooth_test_path
from roughmill.errors import AlignmentError, ConstraintError, InstabilityError, TimescaleError
from roughmill.hilbert_scale import SpectralOperator, norm_gamma
from roughmill.models import ModelSpec, default_model, null_coupling_model, ou_fast_model, zero_model
from roughmill.slowfast import (FastStepper, SlowFastDrivers, SolverConfig, derived_delta, floor_time,
                                increment_experiment, initial_state, sample_drivers, solve_auxiliary,
                                solve_coupled, step_fast, step_slow, sup_increments)

OP = SpectralOperator.dirichlet_laplacian(8)


def small_config(**kw):
    base = dict(T=0.25, macro_steps=64, epsilon=0.05, area_substeps=8, seed=7)
    base.update(kw)
    return SolverConfig(**base)


def test_config_examples():
    cfg = SolverConfig(alpha=0.45, alpha0=0.5, sigma=0.2, zeta=0.24)
    assert cfg.sigma == 0.2
    with pytest.raises(ConstraintError) as err:
        SolverConfig(alpha=0.45, sigma=0.3)
    assert "alpha/2" in err.value.constraint
    cfg = SolverConfig(epsilon=0.001, alpha=0.4)
    assert abs(cfg.delta - 0.146780) < 5e-7
    assert abs(0.001 ** (1 / 3.6) - cfg.delta) < 1e-15
    with pytest.raises(ConstraintError):
        SolverConfig(alpha=0.3)
    with pytest.raises(ConstraintError):
        SolverConfig(alpha=0.45, zeta=0.2)
    with pytest.raises(ConstraintError):
        SolverConfig(theta=0.1)
    assert SolverConfig(theta=0.9).theta == 0.9


def test_config_replace_rederives_delta():
    cfg = SolverConfig(epsilon=0.01)
    assert cfg.replace(epsilon=0.002).delta == derived_delta(0.002, 0.45)
    assert cfg.micro_per_macro(0.002) == math.ceil(40 * cfg.macro_step / 0.002)


def test_floor_time():
    assert floor_time(0.35, 0.1) == pytest.approx(0.3)
    assert floor_time(0.3, 0.1) == pytest.approx(0.3)
    assert floor_time(0.0, 0.1) == 0.0


def test_step_slow_trivial_cases(rng):
    z = zero_model(OP)
    x = rng.standard_normal(8)
    np.testing.assert_allclose(step_slow(OP, z, x, x, np.ones(1), np.ones((1, 1)), 0.1),
                               np.exp(-OP.eigenvalues * 0.1) * x, rtol=1e-15)
    g = rng.standard_normal(8)
    const = ModelSpec(OP, z.F1, z.F2, lambda x: np.broadcast_to(g[:, None], np.shape(x) + (1,)),
                      lambda x: np.zeros(np.shape(x) + (1, 1)), z.G2, 0.0, 0.0, 1, 1)
    db = np.array([0.37])
    np.testing.assert_allclose(step_slow(OP, const, x, x, db, np.array([[5.0]]), 0.1),
                               np.exp(-OP.eigenvalues * 0.1) * (x + g * 0.37), rtol=1e-14)


def test_step_fast_trivial_and_timescale(rng):
    z = zero_model(OP)
    y = rng.standard_normal(8)
    np.testing.assert_allclose(step_fast(OP, z, y, y, np.ones(1), 0.001, 0.05),
                               np.exp(-OP.eigenvalues * 0.02) * y, rtol=1e-15)
    with pytest.raises(TimescaleError):
        step_fast(OP, z, y, y, np.ones(1), 0.01, 0.05)


def test_instability_raises():
    z = zero_model(OP)
    bad = ModelSpec(OP, lambda x, y: np.full(np.shape(x), np.inf), z.F2, z.G1, z.DG1G1, z.G2, 0, 0, 1, 1)
    with pytest.raises(InstabilityError):
        step_slow(OP, bad, np.zeros(8), np.zeros(8), np.zeros(1), np.zeros((1, 1)), 0.1)


def test_ou_stationary_variance():
    c, eps, h = 0.5, 0.05, 0.05 / 40
    ou = ou_fast_model(OP, c=c)
    step = FastStepper(OP, ou, h, eps)
    rng = np.random.default_rng(3)
    r = 400
    y = np.zeros((r, 8))
    x = np.zeros((r, 8))
    acc, count = np.zeros(8), 0
    for k in range(6000):
        y = step(x, y, rng.standard_normal((r, 1)) * math.sqrt(h))
        if k >= 2000 and k % 20 == 0:
            acc += np.mean(y ** 2, axis=0)
            count += 1
    np.testing.assert_allclose(acc / count, c ** 2 / (2 * OP.eigenvalues), rtol=0.05)


def test_fast_moment_bound_uniform_in_eps():
    m = default_model(OP)
    sups = []
    for eps in (0.05, 0.01):
        cfg = small_config(epsilon=eps, y0_scale=1.0)
        drv = sample_drivers(cfg, m, range(200))
        path = solve_coupled(OP, m, cfg, drv, record_micro=True)
        sups.append(np.max(np.mean(norm_gamma(path.Y_micro, OP, 0.0) ** 4, axis=0)))
    assert max(sups) <= 2 * min(sups)


def test_deterministic_mild_solution():
    m = null_coupling_model(OP, g_scale=0.0)
    cfg = small_config()
    drv = sample_drivers(cfg, m, range(2))
    path = solve_coupled(OP, m, cfg, drv)
    x = path.X[0]
    f = m.F1(x, np.zeros_like(x))
    for k in (1, 17, 64):
        mild = np.exp(-OP.eigenvalues * path.times[k]) * x[0] + drift_convolve(OP, f, path.times, k)
        np.testing.assert_allclose(x[k], mild, atol=1e-8)


def test_eps_one_trivial_fast(rng):
    z = zero_model(OP)
    cfg = small_config(epsilon=1.0, y0_scale=0.8)
    drv = sample_drivers(cfg, z, range(1))
    path = solve_coupled(OP, z, cfg, drv)
    expect = np.exp(-np.outer(path.times, OP.eigenvalues)) * 0.8
    np.testing.assert_allclose(path.Y[0], expect, rtol=1e-12)


def test_replay_and_thread_invariance():
    m = default_model(OP)
    cfg = small_config()
    a = solve_coupled(OP, m, cfg, sample_drivers(cfg, m, range(3)))
    b = solve_coupled(OP, m, cfg, sample_drivers(cfg, m, range(3)))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    t1 = increment_experiment(OP, m, cfg, [cfg.T / 4], 70, threads=1)
    t3 = increment_experiment(OP, m, cfg, [cfg.T / 4], 70, threads=3)
    assert np.array_equal(t1.mean, t3.mean)


def test_decoupling_from_fast_stream():
    m = null_coupling_model(OP)
    cfg = small_config()
    drv = sample_drivers(cfg, m, range(2))
    other = SlowFastDrivers(drv.times, drv.dB, drv.BB, drv.dW * -3.0 + 1.0, drv.micro_per_macro)
    assert np.array_equal(solve_coupled(OP, m, cfg, drv).X, solve_coupled(OP, m, cfg, other).X)


def test_self_convergence_smooth_driver():
    m = default_model(OP, c=0.0, L_G2=0.0)
    f, df = smooth_test_path(2)

    def run(n):
        cfg = SolverConfig(T=0.5, macro_steps=n, epsilon=0.05, micro_substeps=4)
        lift = canonical_smooth_lift(f, cfg.macro_times, derivative=df)
        drv = SlowFastDrivers(cfg.macro_times, lift.step_increments[None], lift.step_areas[None],
                              np.zeros((1, 4 * n, 1)), 4)
        return solve_coupled(OP, m, cfg, drv).X[0]

    ref = run(1024)
    errs = []
    for n in (64, 128, 256):
        x = run(n)
        errs.append(np.max(norm_gamma(x - ref[::1024 // n], OP, 0.0)))
    assert errs[0] / errs[1] >= 2 and errs[1] / errs[2] >= 2


def test_auxiliary_process():
    m = default_model(OP)
    cfg = small_config()
    drv = sample_drivers(cfg, m, range(64))
    path = solve_coupled(OP, m, cfg, drv)
    whole = solve_auxiliary(OP, m, cfg, drv, path, delta=cfg.T)
    frozen = SlowFastDrivers(drv.times, drv.dB, drv.BB, drv.dW, drv.micro_per_macro)
    # single block equals a run with the slow input pinned at X_0
    step = FastStepper(OP, m, cfg.macro_step / drv.micro_per_macro, cfg.epsilon)
    y = np.zeros((64, 8))
    for j in range(drv.dW.shape[1]):
        y = step(path.X[:, 0], y, drv.dW[:, j])
    np.testing.assert_array_equal(whole[:, -1], y)
    with pytest.raises(AlignmentError):
        solve_auxiliary(OP, m, cfg, drv, path, delta=cfg.macro_step * 1.5)
    errs = []
    for q in (64, 16, 4):
        yhat = solve_auxiliary(OP, m, cfg, drv, path, delta=q * cfg.macro_step)
        errs.append(np.max(np.mean(norm_gamma(path.Y - yhat, OP, 0.0) ** 4, axis=0)))
    assert errs[0] > errs[1] > errs[2]
    ou = ou_fast_model(OP)
    p2 = solve_coupled(OP, ou, cfg, drv)
    assert np.array_equal(solve_auxiliary(OP, ou, cfg, drv, p2, delta=4 * cfg.macro_step), p2.Y)


def test_increment_semigroup_oracle():
    z = zero_model(OP)
    cfg = small_config()
    drv = sample_drivers(cfg, z, range(1))
    x = solve_coupled(OP, z, cfg, drv).X
    x0, _ = initial_state(OP, cfg)
    delta = 8 * cfg.macro_step
    t = cfg.macro_times
    tfl = np.floor(np.arange(t.size) / 8) * delta
    exact = (np.exp(-np.outer(t - tfl, OP.eigenvalues)) - 1) * np.exp(-np.outer(tfl, OP.eigenvalues)) * x0
    ref = np.max(norm_gamma(exact, OP, 0.0) ** 4)
    assert sup_increments(OP, x, cfg.macro_step, delta)[0] == pytest.approx(ref, rel=1e-9)
    with pytest.raises(AlignmentError):
        increment_experiment(OP, z, cfg, [0.3 * cfg.macro_step], 2)
