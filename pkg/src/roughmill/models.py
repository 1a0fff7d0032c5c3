"""Coefficient sets for the slow-fast system and their closed-form averages.

All coefficient functions broadcast over leading batch axes: ``x`` and ``y``
have shape ``(..., n)``; G1 returns ``(..., n, d1)``, DG1G1 returns
``(..., n, d1, d1)`` with entry ``[.., i, j] = DG1_i(x) G1_j(x)``, and G2
returns ``(..., n, d2)``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline

from .errors import ConstraintError, ModelError
from .hilbert_scale import SpectralOperator, norm_gamma


@dataclass(frozen=True, eq=False)
class ModelSpec:
    op: SpectralOperator
    F1: Callable
    F2: Callable
    G1: Callable
    DG1G1: Callable
    G2: Callable
    L_F2: float
    L_G2: float
    d1: int
    d2: int
    f1_bound: Optional[float] = None
    alpha: float = 0.45
    gamma: float = 0.0
    name: str = "custom"
    fbar: Optional[Callable] = field(default=None, repr=False)
    G1_jacobian: Optional[Callable] = field(default=None, repr=False)
    params: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        margin = self.h5_margin
        if margin <= 0:
            raise ConstraintError(
                "H5 margin nonpositive",
                f"{self.op.lambda_min:g} - L_F2 - 3*L_G2^2 = {margin:g}")
        if self.f1_bound is not None:
            probe = self.probe_f1_sup()
            if probe > self.f1_bound * (1 + 1e-12):
                raise ConstraintError(
                    "F1 bound",
                    f"sup of |F1|_(gamma-alpha) over probes is {probe:g} > declared {self.f1_bound:g}")

    @property
    def h5_margin(self):
        return self.op.lambda_min - self.L_F2 - 3 * self.L_G2 ** 2

    @property
    def ergodic_rate(self):
        """lambda_1 - L_F2 - L_G2^2, the exponential mixing rate of the frozen equation."""
        return self.op.lambda_min - self.L_F2 - self.L_G2 ** 2

    def probe_f1_sup(self, n_probe=256, seed=0):
        rng = np.random.default_rng(seed)
        n = self.op.n_modes
        scales = np.array([0.1, 1.0, 10.0, 1e3])
        x = rng.standard_normal((n_probe, n)) * np.repeat(scales, n_probe // scales.size)[:, None]
        y = rng.standard_normal((n_probe, n)) * np.repeat(scales[::-1], n_probe // scales.size)[:, None]
        try:
            vals = np.asarray(self.F1(x, y), dtype=float)
        except Exception as exc:
            raise ModelError(f"F1 evaluation failed: {exc}") from exc
        return float(np.max(norm_gamma(vals, self.op, self.gamma - self.alpha)))


def _mode_index(op):
    return np.arange(1, op.n_modes + 1, dtype=float)


def default_model(op=None, L_F2=0.25, L_G2=0.25, d1=2, d2=1, g_scale=0.5, c=0.5,
                  couple_y=True, alpha=0.45, gamma=0.0):
    """Bounded tanh/sin coefficients satisfying the standing hypotheses.

    F1_n = a_n tanh(x_n) + b_n tanh(y_n),  a_n = 1/n^2, b_n = 1/n (0 if not ``couple_y``)
    F2_n = a_n tanh(x_n) + L_F2 sin(y_n)
    G1 column i: g_{n,i} tanh(x_n),        g_{n,i} = g_scale / ((i+1) n^2)
    G2 column j: c + L_G2 sin(y_n) / sqrt(d2)
    """
    op = SpectralOperator.dirichlet_laplacian(8) if op is None else op
    n = _mode_index(op)
    a = 1.0 / n ** 2
    b = 1.0 / n if couple_y else np.zeros_like(n)
    g = g_scale / (n[:, None] ** 2 * np.arange(1, d1 + 1, dtype=float)[None, :])
    lg = L_G2 / np.sqrt(d2)

    def F1(x, y):
        return a * np.tanh(x) + b * np.tanh(y)

    def F2(x, y):
        return a * np.tanh(x) + L_F2 * np.sin(y)

    def G1(x):
        return g * np.tanh(x)[..., None]

    def DG1G1(x):
        th = np.tanh(x)
        sech2 = 1.0 - th ** 2
        return (g[:, :, None] * g[:, None, :]) * (sech2 * th)[..., None, None]

    def G1_jacobian(x):
        sech2 = 1.0 - np.tanh(x) ** 2
        diag = g * sech2[..., None]                      # (..., n, d1)
        eye = np.eye(op.n_modes)
        return diag[..., :, :, None] * eye[:, None, :]   # (..., n, d1, n)

    def G2(x, y):
        return np.broadcast_to((c + lg * np.sin(y))[..., None], y.shape + (d2,)).copy()

    bound = float(np.sqrt(np.sum(op.weights(gamma - alpha) ** 2 * (np.abs(a) + np.abs(b)) ** 2)))
    params = dict(a=a, b=b, g=g, c=c, L_F2=L_F2, L_G2=L_G2, d2=d2, kind="default" if couple_y else "null")
    def diffusion(y):
        return d2 * (c + lg * np.sin(y)) ** 2

    if couple_y and abs(c) <= lg * (1 + 1e-12):
        # degenerate noise: no density to integrate, the closed form is unavailable
        fbar = None
    elif couple_y:
        table = StationaryMeanTable(op, a, L_F2=L_F2, diffusion=diffusion)

        def fbar(x):
            return a * np.tanh(x) + b * table(np.tanh(x))
    else:
        def fbar(x):
            return F1(x, np.zeros_like(x))

    return ModelSpec(op, F1, F2, G1, DG1G1, G2, L_F2, L_G2, d1, d2, f1_bound=bound,
                     alpha=alpha, gamma=gamma, name=params["kind"], fbar=fbar,
                     G1_jacobian=G1_jacobian, params=params)


def null_coupling_model(op=None, **kwargs):
    """Default model with F1 independent of the fast variable."""
    return default_model(op, couple_y=False, **kwargs)


def ou_fast_model(op=None, c=0.5, d1=2, d2=1, **kwargs):
    """Default slow coefficients with a linear Ornstein-Uhlenbeck fast equation.

    F2 = 0 and G2 = c in every column, so each fast mode has stationary law
    N(0, d2 c^2 / (2 lambda_n)).
    """
    base = default_model(op, L_F2=0.0, L_G2=0.0, d1=d1, d2=d2, **kwargs)
    op = base.op
    a = base.params["a"]

    def F2(x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def G2(x, y):
        return np.full(np.shape(y) + (d2,), float(c))

    def fbar(x):
        # tanh is odd and the stationary law is centred, so E tanh(y_n) = 0.
        return a * np.tanh(x)

    params = dict(base.params, kind="ou", c=c, L_F2=0.0, L_G2=0.0)
    return ModelSpec(op, base.F1, F2, base.G1, base.DG1G1, G2, 0.0, 0.0, d1, d2,
                     f1_bound=base.f1_bound, alpha=base.alpha, gamma=base.gamma, name="ou",
                     fbar=fbar, G1_jacobian=base.G1_jacobian, params=params)


def zero_model(op=None, d1=1, d2=1):
    """F = G = 0: the slow and fast paths are pure semigroup orbits."""
    op = SpectralOperator.dirichlet_laplacian(8) if op is None else op

    def zeros_xy(x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    return ModelSpec(
        op, zeros_xy, zeros_xy,
        lambda x: np.zeros(np.shape(x) + (d1,)),
        lambda x: np.zeros(np.shape(x) + (d1, d1)),
        lambda x, y: np.zeros(np.shape(y) + (d2,)),
        0.0, 0.0, d1, d2, f1_bound=0.0, name="zero",
        fbar=lambda x: np.zeros(np.shape(x)),
        G1_jacobian=lambda x: np.zeros(np.shape(x) + (d1, np.shape(x)[-1])),
        params=dict(kind="zero"))


MODEL_KINDS = {
    "default": default_model,
    "null": null_coupling_model,
    "ou": ou_fast_model,
    "zero": zero_model,
}


class StationaryMeanTable:
    """E[tanh(y_n)] under the stationary law of each decoupled fast mode.

    Mode n of the frozen equation is the scalar diffusion

        dy = (-lambda_n y + a_n xi + L_F2 sin y) dt + sqrt(s2(y)) dW,

    whose invariant density is proportional to exp(int_0^y 2 mu / s2) / s2.
    Means are tabulated by quadrature on a grid of ``xi = tanh(x_n)`` in
    [-1, 1] and interpolated with cubic splines.
    """

    def __init__(self, op, a, L_F2, diffusion, n_xi=201, n_y=4001, observable=np.tanh):
        self.op = op
        self.xi = np.linspace(-1.0, 1.0, n_xi)
        lam = op.eigenvalues
        sig_max = np.sqrt(np.max(diffusion(np.linspace(-np.pi, np.pi, 721))))
        self.splines = []
        for n in range(op.n_modes):
            rate = lam[n] - L_F2
            half = 12.0 * sig_max / np.sqrt(2.0 * rate) + 2.0 * abs(a[n]) / rate + 0.5
            y = np.linspace(-half, half, n_y)
            s2 = diffusion(y)
            mu = -lam[n] * y[None, :] + a[n] * self.xi[:, None] + L_F2 * np.sin(y)[None, :]
            u = cumulative_trapezoid(2.0 * mu / s2, y, axis=1, initial=0.0)
            u -= u.max(axis=1, keepdims=True)
            dens = np.exp(u) / s2
            means = trapezoid(dens * observable(y), y, axis=1) / trapezoid(dens, y, axis=1)
            self.splines.append(CubicSpline(self.xi, means))

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        for n, spline in enumerate(self.splines):
            out[..., n] = spline(xi[..., n])
        return out
