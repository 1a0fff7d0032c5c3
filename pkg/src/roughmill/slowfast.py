"""Time stepping for the coupled slow-fast system in mild form.

Slow component: rough exponential Milstein step on the macro grid,

    x_{k+1} = S_H x_k + w(H) F1(x_k, y_k) + S_H [G1(x_k) dB + DG1G1(x_k) : BB].

Fast component: exponential Euler-Maruyama on the eps-rescaled semigroup
with micro step h <= eps / 20, the slow value held at the enclosing macro
node.  Every state array carries a leading replica axis.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from scipy.stats import linregress

from .drivers import STREAM_B, STREAM_W, canonical_smooth_lift, sample_ito_brownian_lift, \
    smooth_test_path, stream_rng
from .errors import AlignmentError, ConfigError, ConstraintError, DimensionError, DomainError, \
    InstabilityError, TimescaleError
from .hilbert_scale import drift_weight, noise_weight, norm_gamma

FAST_STEPS_PER_EPS = 40
MAX_FAST_STEP_FRACTION = 1.0 / 20.0


def derived_delta(epsilon, alpha):
    """Khasminskii block length eps^(1 / (2 (1 + 2 alpha)))."""
    return epsilon ** (1.0 / (2.0 * (1.0 + 2.0 * alpha)))


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and experiment parameters.

    ``delta`` is derived from ``epsilon`` when omitted.  ``micro_substeps``
    of ``None`` picks ``ceil(40 H / eps)`` fast steps per macro step.
    Initial data are x0_n = x0_scale / n^3 and y0_n = y0_scale.
    """

    alpha: float = 0.45
    alpha0: float = 0.5
    gamma: float = 0.0
    sigma: float = 0.0
    theta: float = 0.0
    zeta: float = 0.3
    epsilon: float = 0.01
    delta: Optional[float] = None
    T: float = 0.5
    macro_steps: int = 1024
    micro_substeps: Optional[int] = None
    area_substeps: int = 32
    seed: int = 42
    x0_scale: float = 1.0
    y0_scale: float = 0.0

    def __post_init__(self):
        a = self.alpha
        if not (1 / 3 < a < self.alpha0 <= 0.5):
            raise ConstraintError("alpha range", f"need 1/3 < alpha < alpha0 <= 1/2, got alpha={a}, alpha0={self.alpha0}")
        if not (0 <= self.sigma < a / 2):
            raise ConstraintError("sigma < alpha/2", f"need 0 <= sigma < {a / 2:g}, got sigma={self.sigma}")
        if not (a / 2 < self.zeta < a - self.sigma):
            raise ConstraintError(
                "zeta window", f"need {a / 2:g} < zeta < {a - self.sigma:g}, got zeta={self.zeta}")
        if not any(math.isclose(self.theta, v, abs_tol=1e-12) for v in (0.0, a, 2 * a)):
            raise ConstraintError("theta", f"theta must be one of 0, alpha, 2 alpha, got {self.theta}")
        if self.epsilon <= 0:
            raise ConstraintError("epsilon", "epsilon must be positive")
        if self.T <= 0:
            raise ConstraintError("T", "T must be positive")
        if self.macro_steps < 1 or self.area_substeps < 1:
            raise ConstraintError("steps", "macro_steps and area_substeps must be positive")
        if self.micro_substeps is not None and self.micro_substeps < 1:
            raise ConstraintError("steps", "micro_substeps must be positive")
        if self.delta is None:
            object.__setattr__(self, "delta", derived_delta(self.epsilon, a))
        elif self.delta <= 0:
            raise ConstraintError("delta", "delta must be positive")

    @property
    def macro_step(self):
        return self.T / self.macro_steps

    @property
    def macro_times(self):
        return np.linspace(0.0, self.T, self.macro_steps + 1)

    def micro_per_macro(self, epsilon=None):
        eps = self.epsilon if epsilon is None else epsilon
        if self.micro_substeps is not None:
            return self.micro_substeps
        return max(1, math.ceil(FAST_STEPS_PER_EPS * self.macro_step / eps - 1e-9))

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        if "epsilon" in changes and "delta" not in changes:
            values["delta"] = None
        values.update(changes)
        return SolverConfig(**values)


def initial_state(op, config):
    n = np.arange(1, op.n_modes + 1, dtype=float)
    return config.x0_scale / n ** 3, np.full(op.n_modes, float(config.y0_scale))


def floor_time(t, delta):
    """t(delta) = [t / delta] delta."""
    return math.floor(t / delta + 1e-12) * delta


# -- single steps ------------------------------------------------------------

def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise InstabilityError(step)


def rough_increment(model, x, dB, BB):
    """G1(x) dB + sum_ij DG1_i G1_j(x) BB^{ji}."""
    return (np.einsum("...ni,...i->...n", model.G1(x), dB)
            + np.einsum("...nij,...ji->...n", model.DG1G1(x), BB))


def step_slow(op, model, x, y, dB, BB, h, drift=None, step=0):
    """One rough exponential Milstein step of length ``h``.

    ``drift`` replaces F1(x, y) when given (used by the averaged equation).
    """
    if h <= 0:
        raise DomainError("step length must be positive")
    decay = np.exp(-op.eigenvalues * h)
    f = model.F1(x, y) if drift is None else drift
    out = decay * (x + rough_increment(model, x, dB, BB)) + drift_weight(op, h) * f
    _check_finite(out, step)
    return out


class FastStepper:
    """Precomputed factors for the fast exponential Euler-Maruyama step.

    In fast time tau = h / eps the step reads
        y' = S_tau y + w(tau) F2(x, y) + q(tau) G2(x, y) dW / sqrt(eps),
    where q(tau) = sqrt((1 - e^{-2 lambda tau}) / (2 lambda tau)) makes the
    noise term carry the exact variance of the stochastic convolution.
    """

    def __init__(self, op, model, h, epsilon):
        if h <= 0 or epsilon <= 0:
            raise DomainError("step and epsilon must be positive")
        if h > epsilon * MAX_FAST_STEP_FRACTION * (1 + 1e-12):
            raise TimescaleError(f"fast step h={h:g} exceeds eps/20={epsilon / 20:g}")
        tau = h / epsilon
        self.model = model
        self.decay = np.exp(-op.eigenvalues * tau)
        self.w = drift_weight(op, tau)
        self.q = noise_weight(op, tau) / np.sqrt(epsilon)

    def __call__(self, x, y, dW):
        m = self.model
        noise = np.einsum("...nj,...j->...n", m.G2(x, y), dW)
        return self.decay * y + self.w * m.F2(x, y) + self.q * noise


def step_fast(op, model, x, y, dW, h, epsilon):
    out = FastStepper(op, model, h, epsilon)(x, y, dW)
    _check_finite(out, 0)
    return out


# -- drivers -----------------------------------------------------------------

@dataclass
class SlowFastDrivers:
    """Batched driver data for a set of replicas.

    dB: (R, N, d1) and BB: (R, N, d1, d1) on the macro grid; dW: (R, N m, d2)
    on the micro grid with ``m`` fast steps per macro step.
    """

    times: np.ndarray
    dB: np.ndarray
    BB: np.ndarray
    dW: np.ndarray
    micro_per_macro: int
    replica_ids: np.ndarray = field(default=None)

    @property
    def replicas(self):
        return self.dB.shape[0]

    @property
    def macro_step(self):
        return float(self.times[1] - self.times[0])


def sample_b_steps(config, d1, replica_ids, master_seed, smooth=False):
    """Step increments and areas of B for each replica (shared across eps)."""
    times = config.macro_times
    if smooth:
        f, df = smooth_test_path(d1)
        lift = canonical_smooth_lift(f, times, derivative=df)
        r = len(replica_ids)
        return (np.broadcast_to(lift.step_increments, (r,) + lift.step_increments.shape).copy(),
                np.broadcast_to(lift.step_areas, (r,) + lift.step_areas.shape).copy())
    db, bb = [], []
    for rid in replica_ids:
        lift = sample_ito_brownian_lift((master_seed, rid, STREAM_B), times, d1, config.area_substeps)
        db.append(lift.step_increments)
        bb.append(lift.step_areas)
    return np.stack(db), np.stack(bb)


def sample_w_steps(config, d2, replica_ids, master_seed, epsilon=None):
    m = config.micro_per_macro(epsilon)
    h = config.macro_step / m
    n = config.macro_steps * m
    return m, np.stack([stream_rng(master_seed, rid, STREAM_W).standard_normal((n, d2)) * np.sqrt(h)
                        for rid in replica_ids])


def sample_drivers(config, model, replica_ids, master_seed=None, epsilon=None, smooth_b=False):
    seed = config.seed if master_seed is None else master_seed
    replica_ids = np.asarray(list(replica_ids))
    db, bb = sample_b_steps(config, model.d1, replica_ids, seed, smooth_b)
    m, dw = sample_w_steps(config, model.d2, replica_ids, seed, epsilon)
    return SlowFastDrivers(config.macro_times, db, bb, dw, m, replica_ids)


def drivers_from_paths(b_paths, dW, micro_per_macro):
    """Assemble drivers from replayed B lifts and micro-grid W increments."""
    times = b_paths[0].times
    for p in b_paths:
        if not np.array_equal(p.times, times):
            raise DimensionError("replayed B paths must share one grid")
    dW = np.asarray(dW, dtype=float)
    if dW.ndim == 2:
        dW = dW[None]
    if dW.shape[1] != (times.size - 1) * micro_per_macro:
        raise DimensionError("W increments do not cover the micro grid")
    return SlowFastDrivers(times, np.stack([p.step_increments for p in b_paths]),
                           np.stack([p.step_areas for p in b_paths]), dW, micro_per_macro,
                           np.arange(len(b_paths)))


# -- solvers -----------------------------------------------------------------

@dataclass
class SlowFastPath:
    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Y_micro: Optional[np.ndarray] = None
    micro_times: Optional[np.ndarray] = None


def _initial(op, config, x0, y0, r):
    dx, dy = initial_state(op, config)
    x0 = dx if x0 is None else np.asarray(x0, dtype=float)
    y0 = dy if y0 is None else np.asarray(y0, dtype=float)
    return np.broadcast_to(x0, (r, op.n_modes)).copy(), np.broadcast_to(y0, (r, op.n_modes)).copy()


def solve_coupled(op, model, config, drivers, epsilon=None, x0=None, y0=None, record_micro=False):
    """Slow path on the macro grid and fast path on the micro grid.

    Within macro step k both components start from (x_k, y_k); the fast
    component takes ``m`` micro steps with x held at x_k.
    """
    eps = config.epsilon if epsilon is None else epsilon
    n_macro = drivers.dB.shape[1]
    m = drivers.micro_per_macro
    if drivers.dW.shape[1] != n_macro * m:
        raise DimensionError("W increments do not match the micro grid")
    H = drivers.macro_step
    fast = FastStepper(op, model, H / m, eps)
    r = drivers.replicas
    X = np.empty((r, n_macro + 1, op.n_modes))
    Y = np.empty_like(X)
    X[:, 0], Y[:, 0] = _initial(op, config, x0, y0, r)
    Ym = np.empty((r, n_macro * m + 1, op.n_modes)) if record_micro else None
    if record_micro:
        Ym[:, 0] = Y[:, 0]
    for k in range(n_macro):
        xk, yk = X[:, k], Y[:, k]
        X[:, k + 1] = step_slow(op, model, xk, yk, drivers.dB[:, k], drivers.BB[:, k], H, step=k)
        y = yk
        for j in range(m):
            y = fast(xk, y, drivers.dW[:, k * m + j])
            if record_micro:
                Ym[:, k * m + j + 1] = y
        _check_finite(y, k)
        Y[:, k + 1] = y
    micro_times = np.linspace(0.0, drivers.times[-1], n_macro * m + 1) if record_micro else None
    return SlowFastPath(drivers.times, X, Y, Ym, micro_times)


def block_steps(delta, macro_step, n_macro):
    """Macro steps per Khasminskii block; whole horizon when delta >= T."""
    if delta >= macro_step * n_macro * (1 - 1e-12):
        return n_macro
    q = delta / macro_step
    if q < 1 - 1e-9 or abs(q - round(q)) > 1e-9:
        raise AlignmentError(f"delta={delta:g} is not a multiple of the macro step {macro_step:g}")
    return int(round(q))


def solve_auxiliary(op, model, config, drivers, slow, delta=None, epsilon=None, y0=None):
    """Fast auxiliary process with coefficients frozen at X_{t(delta)}.

    Reuses the Brownian increments of the true fast path; returns its
    values on the macro grid, shape ``(R, N+1, n)``.
    """
    eps = config.epsilon if epsilon is None else epsilon
    delta = config.delta if delta is None else delta
    n_macro = drivers.dB.shape[1]
    q = block_steps(delta, drivers.macro_step, n_macro)
    m = drivers.micro_per_macro
    fast = FastStepper(op, model, drivers.macro_step / m, eps)
    r = drivers.replicas
    out = np.empty((r, n_macro + 1, op.n_modes))
    out[:, 0] = _initial(op, config, None, y0, r)[1]
    y = out[:, 0]
    for k in range(n_macro):
        x_frozen = slow.X[:, (k // q) * q]
        for j in range(m):
            y = fast(x_frozen, y, drivers.dW[:, k * m + j])
        _check_finite(y, k)
        out[:, k + 1] = y
    return out


# -- replica orchestration ---------------------------------------------------

def replica_chunks(replicas, chunk=64):
    ids = np.arange(replicas)
    return [ids[i:i + chunk] for i in range(0, replicas, chunk)]


def map_chunks(fn, replicas, threads=1, chunk=64):
    """Apply ``fn`` to fixed replica chunks; results come back in chunk order.

    Chunk boundaries do not depend on ``threads``, so outputs are identical
    for any thread count.
    """
    chunks = replica_chunks(replicas, chunk)
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


@dataclass
class IncrementTable:
    deltas: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicas: int
    slope: float

    def rows(self):
        return [dict(delta=d, mean_sup_fourth=m, stderr=s, replicas=self.replicas)
                for d, m, s in zip(self.deltas, self.mean, self.stderr)]


def sup_increments(op, X, macro_step, delta, gamma=0.0, power=4):
    """sup over macro nodes of |X_t - X_{t(delta)}|_gamma^power per replica."""
    n_macro = X.shape[1] - 1
    q = block_steps(delta, macro_step, n_macro)
    idx = np.arange(n_macro + 1)
    diff = X[:, idx] - X[:, (idx // q) * q]
    return np.max(norm_gamma(diff, op, gamma) ** power, axis=1)


def increment_experiment(op, model, config, deltas, replicas, master_seed=None, threads=1,
                         smooth_b=False):
    """Monte-Carlo table of E sup_t |X_t - X_{t(delta)}|^4 with a log-log slope."""
    deltas = np.asarray(deltas, dtype=float)
    for d in deltas:
        block_steps(d, config.macro_step, config.macro_steps)
    seed = config.seed if master_seed is None else master_seed

    def run(ids):
        drv = sample_drivers(config, model, ids, seed, smooth_b=smooth_b)
        path = solve_coupled(op, model, config, drv)
        return np.stack([sup_increments(op, path.X, config.macro_step, d, config.gamma)
                         for d in deltas], axis=1)

    vals = np.concatenate(map_chunks(run, replicas, threads))
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(replicas) if replicas > 1 else np.zeros_like(mean)
    slope = float(linregress(np.log(deltas), np.log(mean)).slope) if deltas.size > 1 else float("nan")
    return IncrementTable(deltas, mean, se, replicas, slope)


def stderr(values, axis=0):
    values = np.asarray(values)
    n = values.shape[axis]
    if n < 2:
        raise ConfigError("at least two replicas are needed for a standard error")
    return values.std(axis=axis, ddof=1) / np.sqrt(n)
