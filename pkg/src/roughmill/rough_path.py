"""Two-level rough paths sampled on a time grid.

Only the per-step areas are stored.  Areas over arbitrary grid pairs are
recovered from Chen's relation through the running area from the origin,

    XX_{s,t} = XX_{0,t} - XX_{0,s} - X_{0,s} (x) X_{s,t},

so Chen's relation holds by construction up to rounding.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class GridRoughPath:
    """Path values ``(K+1, d)`` and step areas ``(K, d, d)`` on ``times``.

    ``fine_increments`` optionally keeps the ``(K, M, d)`` substep
    increments a Brownian lift was built from; mixed lifts need them to
    form cross areas.
    """

    times: np.ndarray
    values: np.ndarray
    step_areas: np.ndarray
    fine_increments: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        areas = np.asarray(self.step_areas, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise DimensionError("times must be a nonempty 1-d array")
        if np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        if values.ndim == 1:
            values = values[:, None]
        k = times.size - 1
        if values.shape[0] != k + 1:
            raise DimensionError("one path value per grid point is required")
        d = values.shape[1]
        if areas.shape != (k, d, d):
            raise DimensionError(f"step areas must have shape {(k, d, d)}, got {areas.shape}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "step_areas", areas)

    @classmethod
    def from_increments(cls, times, increments, step_areas, start=None, fine_increments=None):
        increments = np.asarray(increments, dtype=float)
        if increments.ndim == 1:
            increments = increments[:, None]
        d = increments.shape[1]
        values = np.zeros((increments.shape[0] + 1, d))
        if start is not None:
            values[0] = start
        values[1:] = values[0] + np.cumsum(increments, axis=0)
        return cls(times, values, step_areas, fine_increments)

    @classmethod
    def zero(cls, times, dim):
        k = len(times) - 1
        return cls(times, np.zeros((k + 1, dim)), np.zeros((k, dim, dim)))

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def step_increments(self):
        return np.diff(self.values, axis=0)

    def increment(self, s, t):
        _check_pair(self, s, t)
        return self.values[t] - self.values[s]

    @cached_property
    def origin_areas(self):
        """Running areas XX_{0,t_k}, shape ``(K+1, d, d)``."""
        inc = self.step_increments
        from_origin = self.values[:-1] - self.values[0]
        steps = self.step_areas + from_origin[:, :, None] * inc[:, None, :]
        out = np.zeros((self.n_steps + 1, self.dim, self.dim))
        np.cumsum(steps, axis=0, out=out[1:])
        return out

    def pair_areas(self, s, t):
        """Vectorised XX_{s,t} for index arrays ``s <= t``."""
        s = np.asarray(s)
        t = np.asarray(t)
        x0 = self.values[0]
        xs = self.values[s] - x0
        xst = self.values[t] - self.values[s]
        return (self.origin_areas[t] - self.origin_areas[s]
                - xs[..., :, None] * xst[..., None, :])

    def restrict(self, stride):
        """Coarse path keeping every ``stride``-th grid point."""
        if stride < 1 or self.n_steps % stride:
            raise DimensionError(f"stride {stride} does not divide {self.n_steps} steps")
        idx = np.arange(0, self.n_steps + 1, stride)
        return GridRoughPath(self.times[idx], self.values[idx],
                             self.pair_areas(idx[:-1], idx[1:]))


def _check_pair(path, s, t):
    k = path.n_steps
    if not (0 <= s <= t <= k):
        raise IndexError(f"grid indices must satisfy 0 <= s <= t <= {k}, got ({s}, {t})")


def chen_extend(path, s_index, t_index):
    """Area XX_{s,t} over the grid pair ``(s_index, t_index)``."""
    _check_pair(path, s_index, t_index)
    if s_index == t_index:
        return np.zeros((path.dim, path.dim))
    return path.pair_areas(s_index, t_index)


def chen_residual(path, s, u, t):
    """Max-entry violation of Chen's relation on the triple ``s <= u <= t``."""
    _check_pair(path, s, u)
    _check_pair(path, u, t)
    return float(np.max(np.abs(chen_residuals(path, [s], [u], [t]))))


def chen_residuals(path, s, u, t):
    """Vectorised residual matrices of Chen's relation.

    Each pair area is assembled by :func:`chen_extend`'s prefix formula, the
    residual is ``XX_{s,t} - XX_{s,u} - XX_{u,t} - X_{s,u} (x) X_{u,t}``.
    """
    s, u, t = (np.asarray(a) for a in (s, u, t))
    xsu = path.values[u] - path.values[s]
    xut = path.values[t] - path.values[u]
    return (path.pair_areas(s, t) - path.pair_areas(s, u) - path.pair_areas(u, t)
            - xsu[..., :, None] * xut[..., None, :])


def max_chen_residual(path, n_random=None, rng=None):
    """Max residual over all grid triples, or ``n_random`` random ones."""
    k = path.n_steps
    if n_random is None:
        s, u, t = np.array([(a, b, c) for a in range(k + 1)
                            for b in range(a, k + 1) for c in range(b, k + 1)]).T
    else:
        rng = np.random.default_rng(rng)
        trip = np.sort(rng.integers(0, k + 1, size=(n_random, 3)), axis=1)
        s, u, t = trip.T
    worst = 0.0
    for lo in range(0, s.size, 20000):
        sl = slice(lo, lo + 20000)
        worst = max(worst, float(np.max(np.abs(chen_residuals(path, s[sl], u[sl], t[sl])))))
    return worst


def pairwise_sup(times, pair_norm, exponent):
    """max over grid pairs s < t of pair_norm(s, t) / (t - s)^exponent.

    ``pair_norm`` maps equal-length index arrays to nonnegative values.  The
    loop runs over lags so memory stays linear in the grid size.
    """
    times = np.asarray(times, dtype=float)
    k = times.size - 1
    if k < 1:
        raise DimensionError("a Hoelder seminorm needs at least two grid points")
    best = 0.0
    for lag in range(1, k + 1):
        s = np.arange(0, k + 1 - lag)
        t = s + lag
        vals = pair_norm(s, t) / (times[t] - times[s]) ** exponent
        best = max(best, float(np.max(vals)))
    return best


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise DomainError(f"Hoelder exponent must lie in (0, 1], got {alpha}")


def holder_seminorm(path, alpha, times=None):
    """Grid proxy for the alpha-Hoelder seminorm.

    ``path`` is either a :class:`GridRoughPath` (level one, Euclidean norm)
    or a two-parameter table of shape ``(K+1, K+1, ...)`` whose entry
    ``[s, t]`` is measured in max-entry norm; ``times`` is required for
    tables.  The continuum supremum is bounded below by this value.
    """
    _check_alpha(alpha)
    if isinstance(path, GridRoughPath):
        vals = path.values
        return pairwise_sup(path.times,
                            lambda s, t: np.linalg.norm(vals[t] - vals[s], axis=-1), alpha)
    table = np.asarray(path, dtype=float)
    if times is None:
        raise DimensionError("times are required for a two-parameter table")
    if table.shape[:2] != (len(times), len(times)):
        raise DimensionError("table must be indexed by grid pairs")
    flat = table.reshape(table.shape[:2] + (-1,))
    return pairwise_sup(times, lambda s, t: np.max(np.abs(flat[s, t]), axis=-1), alpha)


def area_seminorm(path, alpha):
    """|XX|_{2 alpha} with the max-entry matrix norm."""
    _check_alpha(alpha)
    return pairwise_sup(
        path.times,
        lambda s, t: np.max(np.abs(path.pair_areas(s, t)), axis=(-2, -1)),
        2 * alpha)


def _check_compatible(p, q):
    if p.dim != q.dim or p.times.shape != q.times.shape or not np.array_equal(p.times, q.times):
        raise DimensionError("rough paths must share grid and dimension")


def distance_alpha(p, q, alpha):
    """Inhomogeneous pseudometric |X - Y|_alpha + |XX - YY|_{2 alpha}."""
    _check_alpha(alpha)
    _check_compatible(p, q)
    dv = p.values - q.values
    level_one = pairwise_sup(
        p.times, lambda s, t: np.linalg.norm(dv[t] - dv[s], axis=-1), alpha)
    level_two = pairwise_sup(
        p.times,
        lambda s, t: np.max(np.abs(p.pair_areas(s, t) - q.pair_areas(s, t)), axis=(-2, -1)),
        2 * alpha)
    return level_one + level_two


def rho_alpha(path, alpha):
    """Distance to the zero rough path."""
    return holder_seminorm(path, alpha) + area_seminorm(path, alpha)


def homogeneous_norm(path, alpha):
    """|X|_alpha + sqrt(|XX|_{2 alpha})."""
    return holder_seminorm(path, alpha) + np.sqrt(area_seminorm(path, alpha))
