"""Semigroup rough convolution by compensated Riemann sums.

    int_0^t S_{t-s} Y_s dX_s  =  lim  sum_{[u,v]} S_{t-u} (Y_u X_{u,v} + Y'_u XX_{u,v})

The sums are evaluated on dyadic sub-partitions of the driver's grid.
"""
import numpy as np

from .controlled import ControlledPath, _check_driver
from .errors import DimensionError, DomainError, ResolutionError
from .hilbert_scale import drift_weight, norm_gamma


def _as_integrand(cp):
    if cp.ncols == 1:
        return cp
    if cp.ncols == 0 and cp.dim == 1:
        return ControlledPath(cp.times, cp.Y[..., None], cp.Yprime[..., None, :],
                              cp.gamma, cp.alpha)
    raise DimensionError("integrand must take values in L(R^d, H), shape (K+1, n, d)")


def germs(cp, driver, u, v):
    """Y_u X_{u,v} + Y'_u XX_{u,v} for index arrays, shape ``(len(u), n)``.

    The second-order term pairs Y'[i, j] with XX[j, i].
    """
    x_uv = driver.values[v] - driver.values[u]
    xx_uv = driver.pair_areas(u, v)
    first = np.einsum("lnd,ld->ln", cp.Y[u], x_uv)
    second = np.einsum("lnij,lji->ln", cp.Yprime[u], xx_uv)
    return first + second


def dyadic_points(t_index, depth):
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    n_int = 2 ** depth
    if t_index % n_int:
        raise ResolutionError(
            f"depth {depth} needs a multiple of {n_int} grid steps, [0, t] has {t_index}")
    return np.arange(0, t_index + 1, t_index // n_int)


def rough_convolve(op, cp, driver, t_index, depth):
    """Compensated sum over the dyadic partition of ``[t_0, t]`` at ``depth``."""
    cp = _as_integrand(cp)
    _check_driver(cp, driver)
    if cp.n_modes != op.n_modes:
        raise DimensionError("integrand and operator disagree on the number of modes")
    if t_index == 0:
        return np.zeros(op.n_modes)
    pts = dyadic_points(t_index, depth)
    u, v = pts[:-1], pts[1:]
    t = driver.times[t_index]
    decay = np.exp(-op.eigenvalues[None, :] * (t - driver.times[u])[:, None])
    return np.sum(decay * germs(cp, driver, u, v), axis=0)


def rough_convolution_path(op, cp, driver, depth=None):
    """Running integral Z_t on the grid (or its dyadic coarsening at ``depth``).

    Uses Z_{t_{j+1}} = S_{t_{j+1} - t_j} (Z_{t_j} + germ_j), which reproduces
    the compensated sum over the partition of [0, t_{j+1}] by the points
    visited so far.  Returns ``(points, Z)`` with ``Z`` of shape
    ``(len(points), n)``.
    """
    cp = _as_integrand(cp)
    _check_driver(cp, driver)
    k = driver.n_steps
    pts = np.arange(k + 1) if depth is None else dyadic_points(k, depth)
    g = germs(cp, driver, pts[:-1], pts[1:])
    dt = np.diff(driver.times[pts])
    z = np.zeros((pts.size, op.n_modes))
    for j in range(pts.size - 1):
        z[j + 1] = np.exp(-op.eigenvalues * dt[j]) * (z[j] + g[j])
    return pts, z


def sewing_defect(op, cp, driver, s, t, beta, gamma=None, alpha=None):
    """|I_{s,t} - S_{t-s} Y_s X_{s,t} - S_{t-s} Y'_s XX_{s,t}|_{gamma - 2 alpha + beta}.

    ``I_{s,t}`` is the compensated sum over every grid step in ``[s, t]``.
    """
    alpha = cp.alpha if alpha is None else alpha
    gamma = cp.gamma if gamma is None else gamma
    if not 0 <= beta < 3 * alpha:
        raise DomainError(f"beta must lie in [0, 3 alpha), got {beta}")
    cp = _as_integrand(cp)
    _check_driver(cp, driver)
    if not (0 <= s <= t <= driver.n_steps):
        raise IndexError("grid indices must satisfy 0 <= s <= t <= K")
    if s == t:
        return 0.0
    u = np.arange(s, t)
    tt = driver.times[t]
    decay = np.exp(-op.eigenvalues[None, :] * (tt - driver.times[u])[:, None])
    integral = np.sum(decay * germs(cp, driver, u, u + 1), axis=0)
    one_step = np.exp(-op.eigenvalues * (tt - driver.times[s])) * germs(
        cp, driver, np.array([s]), np.array([t]))[0]
    return float(norm_gamma(integral - one_step, op, gamma - 2 * alpha + beta))


def drift_convolve(op, f, times, t_index):
    """Exponential quadrature of int_0^t S_{t-s} f_s ds, f piecewise constant.

    ``f`` has shape ``(..., K+1, n)``; the sum is
    sum_k S_{t - t_{k+1}} w(t_{k+1} - t_k) f(t_k) with exact weights w.
    """
    f = np.asarray(f, dtype=float)
    times = np.asarray(times, dtype=float)
    if t_index == 0:
        return np.zeros(f.shape[:-2] + f.shape[-1:])
    t = times[t_index]
    total = np.zeros(f.shape[:-2] + f.shape[-1:])
    for k in range(t_index):
        w = drift_weight(op, times[k + 1] - times[k])
        total = total + np.exp(-op.eigenvalues * (t - times[k + 1])) * w * f[..., k, :]
    return total
