"""Controlled rough paths (Y, Y') over the spectral scale.

``Y`` has shape ``(K+1, n_modes, *cols)``: no column axes for an
H_gamma-valued path, one column axis of size d for an integrand valued in
L(R^d, H_gamma).  ``Yprime`` appends one driver axis of size d, so
``Yprime[k] @ X_{s,t}`` contracts the last axis.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ModelError
from .hilbert_scale import operator_norm
from .rough_path import pairwise_sup


@dataclass(frozen=True, eq=False)
class ControlledPath:
    times: np.ndarray
    Y: np.ndarray
    Yprime: np.ndarray
    gamma: float = 0.0
    alpha: float = 0.45

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        y = np.asarray(self.Y, dtype=float)
        yp = np.asarray(self.Yprime, dtype=float)
        if y.shape[0] != times.size or yp.shape[0] != times.size:
            raise DimensionError("Y and Y' need one value per grid point")
        if yp.shape[:-1] != y.shape:
            raise DimensionError(f"Y' shape {yp.shape} does not extend Y shape {y.shape}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "Y", y)
        object.__setattr__(self, "Yprime", yp)

    @property
    def ncols(self):
        return self.Y.ndim - 2

    @property
    def dim(self):
        return self.Yprime.shape[-1]

    @property
    def n_modes(self):
        return self.Y.shape[1]


def _check_driver(cp, driver):
    if cp.dim != driver.dim:
        raise DimensionError(f"Y' has {cp.dim} driver columns, driver has dimension {driver.dim}")
    if cp.times.shape != driver.times.shape or not np.allclose(cp.times, driver.times, rtol=0, atol=1e-14):
        raise DimensionError("controlled path and driver must share the grid")


def remainders(cp, driver, s, t):
    """R_{s,t} = Y_t - Y_s - Y'_s X_{s,t} for index arrays."""
    s = np.asarray(s)
    t = np.asarray(t)
    x_st = driver.values[t] - driver.values[s]
    yp = cp.Yprime[s]
    return cp.Y[t] - cp.Y[s] - np.sum(yp * _expand(x_st, yp.ndim), axis=-1)


def _expand(x, ndim):
    # x has shape (..., d); insert axes so it broadcasts against Y' (..., n, *cols, d)
    lead = x.shape[:-1]
    return x.reshape(lead + (1,) * (ndim - len(lead) - 1) + x.shape[-1:])


def remainder(cp, driver, s, t):
    _check_driver(cp, driver)
    k = cp.times.size - 1
    if not (0 <= s <= t <= k):
        raise IndexError(f"grid indices must satisfy 0 <= s <= t <= {k}")
    return remainders(cp, driver, s, t)


def sup_norm(values, op, gamma, ncols=0):
    return float(np.max(operator_norm(values, op, gamma, ncols)))


def increment_seminorm(values, times, op, gamma, exponent, ncols=0):
    """|f|_{exponent, gamma} for a sampled path f with values ``(K+1, n, *cols)``."""
    return pairwise_sup(
        times, lambda s, t: operator_norm(values[t] - values[s], op, gamma, ncols), exponent)


def remainder_seminorm(cp, driver, op, gamma, exponent):
    _check_driver(cp, driver)
    return pairwise_sup(
        cp.times,
        lambda s, t: operator_norm(remainders(cp, driver, s, t), op, gamma, cp.ncols),
        exponent)


def controlled_norm(cp, driver, op, alpha=None, gamma=None):
    """The D^{2 alpha}_{X, gamma} norm, all suprema taken over grid points/pairs.

    ||Y||_{inf,g} + ||Y'||_{inf,g-a} + |Y'|_{a,g-2a} + |R|_{a,g-a} + |R|_{2a,g-2a}
    """
    alpha = cp.alpha if alpha is None else alpha
    gamma = cp.gamma if gamma is None else gamma
    _check_driver(cp, driver)
    nc = cp.ncols
    return (sup_norm(cp.Y, op, gamma, nc)
            + sup_norm(cp.Yprime, op, gamma - alpha, nc + 1)
            + increment_seminorm(cp.Yprime, cp.times, op, gamma - 2 * alpha, alpha, nc + 1)
            + remainder_seminorm(cp, driver, op, gamma - alpha, alpha)
            + remainder_seminorm(cp, driver, op, gamma - 2 * alpha, 2 * alpha))


def compose_vector_field(cp, field, jacobian):
    """(G(Y), DG(Y) Y') for an H-valued controlled path.

    ``field`` maps ``(..., n)`` to ``(..., n, m)`` and ``jacobian`` maps
    ``(..., n)`` to ``(..., n, m, n)`` (derivative of each column in each
    mode).  The composed Gubinelli derivative has shape ``(K+1, n, m, d)``
    with entry ``[.., i, j] = DG_i(Y) Y'_j``.
    """
    if cp.ncols != 0:
        raise DimensionError("vector fields compose with H-valued paths only")
    try:
        gy = np.asarray(field(cp.Y), dtype=float)
        dgy = np.asarray(jacobian(cp.Y), dtype=float)
    except Exception as exc:  # user-supplied coefficient
        raise ModelError(f"vector field evaluation failed: {exc}") from exc
    if gy.ndim == cp.Y.ndim:
        gy = gy[..., None]
        dgy = dgy[..., None, :]
    if not (np.all(np.isfinite(gy)) and np.all(np.isfinite(dgy))):
        raise ModelError("vector field returned non-finite values")
    yp = np.einsum("knmp,kpd->knmd", dgy, cp.Yprime)
    return ControlledPath(cp.times, gy, yp, cp.gamma, cp.alpha)
