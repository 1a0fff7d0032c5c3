"""Frozen fast dynamics, averaged drift, and the averaging-error sweep."""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import linregress

from .drivers import STREAM_AUX, STREAM_FROZEN, stream_rng
from .errors import ConfigError, DomainError, InstabilityError
from .hilbert_scale import drift_weight, noise_weight, norm_gamma
from .slowfast import derived_delta, map_chunks, sample_b_steps, sample_w_steps, \
    solve_coupled, step_slow, SlowFastDrivers, _initial

MIN_SWEEP_REPLICAS = 30
MIN_ERGODIC_REPLICAS = 100


# -- frozen equation ---------------------------------------------------------

class FrozenStepper:
    """Exponential Euler-Maruyama for dY = [LY + F2(x, Y)] dt + G2(x, Y) dW.

    The noise weight gives each linear mode its exact one-step variance.
    """

    def __init__(self, op, model, h):
        if h <= 0:
            raise DomainError(f"frozen step must be positive, got {h}")
        self.model = model
        self.h = h
        self.decay = np.exp(-op.eigenvalues * h)
        self.w = drift_weight(op, h)
        self.q = noise_weight(op, h)

    def __call__(self, x, y, dW):
        m = self.model
        noise = np.einsum("...nj,...j->...n", m.G2(x, y), dW)
        return self.decay * y + self.w * m.F2(x, y) + self.q * noise


def frozen_noise(model, n_steps, h, replica_ids, master_seed, stream=STREAM_FROZEN):
    """W-tilde increments, shape (R, n_steps, d2); disjoint from the system's W stream."""
    return np.stack([stream_rng(master_seed, r, stream).standard_normal((n_steps, model.d2)) * np.sqrt(h)
                     for r in replica_ids])


def run_frozen(op, model, x, y0, dW, h, observe=None):
    """Integrate a batch of frozen paths.  ``y0`` is (R, n), ``dW`` is (R, K, d2).

    Returns the full trajectory (R, K+1, n), or ``observe(Y_k)`` stacked along
    axis 1 when ``observe`` is given.
    """
    step = FrozenStepper(op, model, h)
    y = np.array(y0, dtype=float)
    first = y if observe is None else observe(y)
    out = np.empty((first.shape[0], dW.shape[1] + 1) + first.shape[1:])
    out[:, 0] = first
    for k in range(dW.shape[1]):
        y = step(x, y, dW[:, k])
        if not np.all(np.isfinite(y)):
            raise InstabilityError(k)
        out[:, k + 1] = y if observe is None else observe(y)
    return out


def solve_frozen(op, model, x, y, T_frozen, h, seed, replicas=None):
    """Frozen trajectory on [0, T_frozen] with x held fixed.

    ``seed`` is the master seed; replica r draws from its own frozen stream.
    Returns ``(times, Y)`` with Y of shape (K+1, n), or (R, K+1, n) when
    ``replicas`` is given.
    """
    if h <= 0:
        raise DomainError(f"frozen step must be positive, got {h}")
    k = max(1, int(round(T_frozen / h)))
    times = np.arange(k + 1) * h
    r = 1 if replicas is None else replicas
    x = np.asarray(x, dtype=float)
    y0 = np.broadcast_to(np.asarray(y, dtype=float), (r, op.n_modes))
    path = run_frozen(op, model, x, y0, frozen_noise(model, k, h, range(r), seed), h)
    return times, (path[0] if replicas is None else path)


# -- averaged drift ----------------------------------------------------------

@dataclass
class FbarEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    mixing_time: float
    warning: bool
    replicas: int
    samples_per_replica: int
    oracle_only: bool = False


def default_burn_in(model):
    return 5.0 / model.ergodic_rate


def integrated_autocorrelation(series, max_lag=None):
    """Integrated autocorrelation time of (R, K, n) series, max over modes, in steps.

    The autocorrelation is averaged over replicas and summed until it first
    drops below 0.05.
    """
    z = series - series.mean(axis=1, keepdims=True)
    var = np.mean(z * z, axis=(0, 1))
    live = var > 1e-300
    if not np.any(live):
        return 0.0
    z = z[..., live]
    var = var[live]
    k = z.shape[1]
    max_lag = k // 2 if max_lag is None else min(max_lag, k - 1)
    tau = np.full(var.shape, 0.5)
    open_ = np.ones(var.shape, dtype=bool)
    for lag in range(1, max_lag + 1):
        rho = np.mean(z[:, lag:] * z[:, :-lag], axis=(0, 1)) / var
        open_ &= rho >= 0.05
        if not np.any(open_):
            break
        tau = tau + np.where(open_, rho, 0.0)
    return float(np.max(tau))


def estimate_fbar(op, model, x, burn_in=None, horizon=None, replicas=200, seed=0, h=0.01,
                  y0=None, observable=None, threads=1):
    """Time-and-ensemble average of F1(x, Y_s) over s in [burn_in, horizon].

    ``observable(x, y)`` replaces F1 (oracle checks with unbounded test
    functions; the result is then flagged ``oracle_only``).  ``warning`` is
    set when the averaging window is shorter than 20 fitted mixing times.
    """
    burn_in = default_burn_in(model) if burn_in is None else burn_in
    horizon = burn_in + 20.0 / model.ergodic_rate if horizon is None else horizon
    if not 0 <= burn_in < horizon:
        raise DomainError(f"need 0 <= burn_in < horizon, got {burn_in}, {horizon}")
    if replicas < 2:
        raise ConfigError("estimate_fbar needs at least two replicas")
    x = np.asarray(x, dtype=float)
    obs = model.F1 if observable is None else observable
    k0 = int(math.ceil(burn_in / h - 1e-9))
    k1 = int(math.floor(horizon / h + 1e-9))
    y_init = np.zeros(op.n_modes) if y0 is None else np.asarray(y0, dtype=float)

    def run(ids):
        dW = frozen_noise(model, k1, h, ids, seed)
        y = np.broadcast_to(y_init, (len(ids), op.n_modes))
        return run_frozen(op, model, x, y, dW, h, observe=lambda yy: obs(x, yy))[:, k0:k1]

    series = np.concatenate(map_chunks(run, replicas, threads))
    per_replica = series.mean(axis=1)
    tau_steps = integrated_autocorrelation(series)
    mixing = tau_steps * h
    window = (k1 - k0) * h
    return FbarEstimate(per_replica.mean(axis=0), per_replica.std(axis=0, ddof=1) / np.sqrt(replicas),
                        mixing, bool(window < 20.0 * mixing), replicas, k1 - k0,
                        oracle_only=observable is not None)


# -- ergodicity --------------------------------------------------------------

@dataclass
class ErgodicityResult:
    times: np.ndarray
    curve: np.ndarray
    smoothed: np.ndarray
    rate: float
    theoretical_rate: float
    nonincreasing: bool
    fit_window: tuple
    phi_times: np.ndarray
    phi: np.ndarray
    phi_rate: float
    cauchy_schwarz_ok: bool
    fit_ok: bool
    diagnostic: str = ""


def moving_average(values, window=5):
    values = np.asarray(values, dtype=float)
    if values.size < window:
        return values.copy()
    return np.convolve(values, np.ones(window) / window, mode="valid")


def two_time_correlation(op, centred, gamma):
    """Phi(s, r) = mean over replicas of <A_s, A_r> in H_gamma, A of shape (R, K, n)."""
    w2 = op.weights(gamma) ** 2
    return np.einsum("rsn,rtn,n->st", centred, centred, w2) / centred.shape[0]


def cauchy_schwarz_holds(phi, rtol=1e-10):
    diag = np.clip(np.diag(phi), 0.0, None)
    bound = np.sqrt(np.outer(diag, diag))
    return bool(np.all(np.diag(phi) >= -1e-300) and np.all(np.abs(phi) <= bound * (1 + rtol) + 1e-300))


def _decay_fit(t, values):
    keep = values > 0
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(-linregress(t[keep], np.log(values[keep])).slope)


def ergodicity_decay(op, model, x, y, t_grid, replicas=1000, seed=0, h=0.01, fit_window=(0.5, 6.0),
                     burn_in=None, n_phi=32, threads=1):
    """Decay of |E F1(x, Y_t) - F1bar(x)|_(gamma - alpha) along ``t_grid``.

    The mean is estimated with a stationary control variate: a second copy
    started from a burned-in state and driven by the same noise, so that
    E F1(x, Y_t) - F1bar(x) = E[F1(x, Y_t) - F1(x, Ytilde_t)].  The
    two-time correlation Phi of the centred observable is evaluated on a
    subgrid of at most ``n_phi`` times and checked against Cauchy-Schwarz.
    """
    if replicas < MIN_ERGODIC_REPLICAS:
        raise ConfigError(f"ergodicity_decay needs at least {MIN_ERGODIC_REPLICAS} replicas, got {replicas}")
    t_grid = np.asarray(t_grid, dtype=float)
    idx = np.rint(t_grid / h).astype(int)
    if np.any(np.abs(idx * h - t_grid) > 1e-9) or np.any(idx < 0):
        raise DomainError("t grid must consist of nonnegative multiples of h")
    x = np.asarray(x, dtype=float)
    gamma = model.gamma - model.alpha
    burn_in = default_burn_in(model) if burn_in is None else burn_in
    k_burn = int(math.ceil(burn_in / h))
    k_max = int(idx.max())
    phi_idx = idx[np.unique(np.linspace(0, idx.size - 1, min(n_phi, idx.size)).round().astype(int))]
    y_start = np.asarray(y, dtype=float)

    def run(ids):
        r = len(ids)
        dW_aux = frozen_noise(model, k_burn, h, ids, seed, STREAM_AUX)
        stat0 = run_frozen(op, model, x, np.broadcast_to(y_start, (r, op.n_modes)), dW_aux, h,
                           observe=lambda yy: yy)[:, -1]
        dW = frozen_noise(model, k_max, h, ids, seed)
        both = np.concatenate([np.broadcast_to(y_start, (r, op.n_modes)), stat0])
        f = run_frozen(op, model, x, both, np.concatenate([dW, dW]), h,
                       observe=lambda yy: model.F1(x, yy))
        return f[:r], f[r:]

    parts = map_chunks(run, replicas, threads)
    f_y = np.concatenate([p[0] for p in parts])
    f_s = np.concatenate([p[1] for p in parts])
    diff = (f_y - f_s)[:, idx].mean(axis=0)
    curve = norm_gamma(diff, op, gamma)
    smoothed = moving_average(curve, 5)
    nonincreasing = bool(np.all(np.diff(smoothed) <= 0))

    lo, hi = fit_window
    sel = (t_grid >= lo - 1e-12) & (t_grid <= hi + 1e-12)
    rate = _decay_fit(t_grid[sel], curve[sel])

    fbar_hat = f_s.mean(axis=(0, 1))
    centred = f_y[:, phi_idx] - fbar_hat
    phi = two_time_correlation(op, centred, gamma)
    cs_ok = cauchy_schwarz_holds(phi)
    # stationary-copy correlation C(u) = Phi~(r0 + u, r0) as a function of the lag u
    stat_c = f_s[:, phi_idx] - fbar_hat
    phi_stat = two_time_correlation(op, stat_c, gamma)
    phi_times = phi_idx * h
    lag_sel = (phi_times - phi_times[0]) <= 3.0
    phi_rate = _decay_fit(phi_times[lag_sel] - phi_times[0], phi_stat[lag_sel, 0])
    cs_ok = cs_ok and cauchy_schwarz_holds(phi_stat)

    fit_ok = bool(np.isfinite(rate) and rate > 0)
    diag = "" if fit_ok else f"nonpositive or undefined decay fit (rate={rate})"
    return ErgodicityResult(t_grid, curve, smoothed, rate, model.ergodic_rate, nonincreasing,
                            (lo, hi), phi_times, phi, phi_rate, cs_ok, fit_ok, diag)


# -- averaged equation and sweep ---------------------------------------------

def solve_averaged(op, model, fbar, config, drivers, x0=None):
    """Averaged slow path driven by the same B steps as the slow-fast run."""
    fbar = model.fbar if fbar is None else fbar
    if fbar is None:
        raise ConfigError("no averaged drift available: supply fbar")
    H = config.macro_step if not hasattr(drivers, "macro_step") else drivers.macro_step
    dB, BB = drivers.dB, drivers.BB
    r = dB.shape[0]
    X = np.empty((r, dB.shape[1] + 1, op.n_modes))
    X[:, 0] = _initial(op, config, x0, None, r)[0]
    for k in range(dB.shape[1]):
        xk = X[:, k]
        X[:, k + 1] = step_slow(op, model, xk, None, dB[:, k], BB[:, k], H, drift=fbar(xk), step=k)
    return X


def estimated_fbar(op, model, replicas=64, seed=0, h=0.01, **kwargs):
    """Averaged drift evaluated pointwise by ``estimate_fbar`` (slow; small runs only)."""
    def fbar(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, op.n_modes)
        out = np.stack([estimate_fbar(op, model, xi, replicas=replicas, seed=seed, h=h, **kwargs).mean
                        for xi in flat])
        return out.reshape(x.shape)
    return fbar


@dataclass
class SweepTable:
    epsilons: np.ndarray
    deltas: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicas: int
    seed: int
    per_replica: Optional[np.ndarray] = field(default=None, repr=False)

    COLUMNS = ("epsilon", "delta", "mean_sq_sup_error", "stderr", "replicas", "seed")

    def rows(self):
        return [(e, d, m, s, self.replicas, self.seed)
                for e, d, m, s in zip(self.epsilons, self.deltas, self.mean, self.stderr)]

    def strictly_decreasing(self):
        """Each entry below its predecessor by more than one pooled standard error."""
        pooled = np.sqrt(self.stderr[:-1] ** 2 + self.stderr[1:] ** 2)
        return bool(np.all(self.mean[:-1] - self.mean[1:] > pooled))


def sup_sq_error(op, X, Xbar, gamma):
    return np.max(norm_gamma(X - Xbar, op, gamma) ** 2, axis=1)


def averaging_error_sweep(op, model, config, eps_list, replicas, master_seed=None, fbar=None,
                          threads=1, smooth_b=False):
    """E sup_t |X^eps_t - Xbar_t|_gamma^2 per eps with shared B per replica."""
    if replicas < MIN_SWEEP_REPLICAS:
        raise ConfigError(f"averaging sweep refuses fewer than {MIN_SWEEP_REPLICAS} replicas, got {replicas}")
    eps_list = np.asarray(eps_list, dtype=float)
    seed = config.seed if master_seed is None else master_seed
    fbar = model.fbar if fbar is None else fbar
    if fbar is None:
        raise ConfigError("no averaged drift available: supply fbar or use estimated_fbar")

    def run(ids):
        dB, BB = sample_b_steps(config, model.d1, ids, seed, smooth_b)
        base = SlowFastDrivers(config.macro_times, dB, BB, None, 1, ids)
        xbar = solve_averaged(op, model, fbar, config, base)
        errs = []
        for eps in eps_list:
            m, dW = sample_w_steps(config, model.d2, ids, seed, eps)
            drv = SlowFastDrivers(config.macro_times, dB, BB, dW, m, ids)
            path = solve_coupled(op, model, config, drv, epsilon=eps)
            errs.append(sup_sq_error(op, path.X, xbar, config.gamma))
        return np.stack(errs, axis=1)

    vals = np.concatenate(map_chunks(run, replicas, threads))
    return SweepTable(eps_list, derived_delta(eps_list, config.alpha), vals.mean(axis=0),
                      vals.std(axis=0, ddof=1) / np.sqrt(replicas), replicas, seed, vals)


def max_sup_difference(op, model, config, eps_list, replicas, master_seed=None, threads=1):
    """max over replicas and eps of sup_t |X^eps_t - Xbar_t|_gamma (null-coupling check)."""
    table = averaging_error_sweep(op, model, config, eps_list, replicas, master_seed, threads=threads)
    return float(np.sqrt(np.max(table.per_replica))), table
