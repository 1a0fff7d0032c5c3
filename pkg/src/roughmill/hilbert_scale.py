"""Spectral Hilbert scale H_gamma and the diagonal analytic semigroup.

Elements of the scale are stored as coefficient arrays in the eigenbasis of
``-L``; the last axis indexes modes and any leading axes are batch axes.
Linear maps R^d -> H_gamma carry the mode axis first, followed by column
axes, e.g. shape ``(..., n_modes, d)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, UndefinedRatioError

# Coefficient arrays double as elements of H_gamma for every gamma.
ScaleVector = np.ndarray

_SERIES_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SpectralOperator:
    """Eigenvalues ``lambda_1 <= lambda_2 <= ...`` of ``-L`` on a truncation.

    ``allow_zero`` admits a zero eigenvalue (identity semigroup), which is
    only used for oracle runs; production operators must be strictly
    positive.
    """

    eigenvalues: np.ndarray
    allow_zero: bool = field(default=False, compare=False)

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).reshape(-1)
        if lam.size == 0:
            raise DimensionError("at least one mode is required")
        if not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite")
        if np.any(np.diff(lam) < 0):
            raise DomainError("eigenvalues must be nondecreasing")
        if self.allow_zero:
            if lam[0] < 0:
                raise DomainError("eigenvalues must be nonnegative")
        elif lam[0] <= 0:
            raise DomainError("-L must be positive definite (lambda_1 > 0)")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def dirichlet_laplacian(cls, n_modes=8):
        """-d^2/dx^2 on (0, pi) with Dirichlet conditions: lambda_n = n^2."""
        if n_modes < 1:
            raise DomainError("n_modes must be positive")
        return cls(np.arange(1, n_modes + 1, dtype=float) ** 2)

    @property
    def n_modes(self):
        return self.eigenvalues.size

    @property
    def lambda_min(self):
        return float(self.eigenvalues[0])

    def weights(self, gamma):
        """Per-mode factors lambda_n^gamma (zero modes get weight 1 at gamma = 0)."""
        with np.errstate(divide="ignore"):
            return np.power(self.eigenvalues, gamma)

    def basis_vector(self, k):
        """The k-th eigenvector (0-based)."""
        e = np.zeros(self.n_modes)
        e[k] = 1.0
        return e


def scale_vector(coeffs, op=None):
    """Validate and return coefficients as a float array."""
    x = np.asarray(coeffs, dtype=float)
    if x.ndim == 0:
        raise DimensionError("a scale vector needs a mode axis")
    if op is not None and x.shape[-1] != op.n_modes:
        raise DimensionError(f"expected {op.n_modes} modes, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise DomainError("scale vector entries must be finite")
    return x


def _check_modes(arr, op, mode_axis):
    if arr.shape[mode_axis] != op.n_modes:
        raise DimensionError(
            f"expected {op.n_modes} modes, got {arr.shape[mode_axis]}")


def norm_gamma(x, op, gamma):
    """|x|_gamma = (sum_n lambda_n^(2 gamma) x_n^2)^(1/2) over the last axis."""
    x = np.asarray(x, dtype=float)
    _check_modes(x, op, -1)
    return np.sqrt(np.sum((op.weights(gamma) * x) ** 2, axis=-1))


def operator_norm(a, op, gamma, ncols=1):
    """Norm of a linear map into H_gamma stored as ``(..., n_modes, *cols)``.

    ``ncols`` is the number of trailing column axes.  With no columns this
    is :func:`norm_gamma`; otherwise the columns are flattened and the
    spectral norm of the weighted ``n_modes x prod(cols)`` matrix is
    returned, i.e. the operator norm for the Euclidean (Frobenius) norm on
    the domain.
    """
    a = np.asarray(a, dtype=float)
    if ncols == 0:
        return norm_gamma(a, op, gamma)
    mode_axis = a.ndim - 1 - ncols
    _check_modes(a, op, mode_axis)
    lead = a.shape[:mode_axis]
    m = a.reshape(lead + (op.n_modes, -1))
    m = op.weights(gamma)[:, None] * m
    if m.shape[-1] == 1:
        return np.sqrt(np.sum(m[..., 0] ** 2, axis=-1))
    gram = np.einsum("...ni,...nj->...ij", m, m)
    top = np.linalg.eigvalsh(gram)[..., -1]
    return np.sqrt(np.maximum(top, 0.0))


def semigroup_factor(op, t):
    """Diagonal of S_t, i.e. exp(-lambda_n t)."""
    if np.any(np.asarray(t) < 0):
        raise DomainError(f"semigroup time must be nonnegative, got {t}")
    return np.exp(-op.eigenvalues * t)


def semigroup_apply(op, t, x):
    """S_t x computed componentwise as exp(-lambda_n t) x_n."""
    x = np.asarray(x, dtype=float)
    _check_modes(x, op, -1)
    return semigroup_factor(op, t) * x


def drift_weight(op, t):
    """Exact per-mode integral of exp(-lambda_n s) over [0, t].

    Equals (1 - exp(-lambda t)) / lambda; below ``lambda t < 1e-8`` a
    three-term Taylor series avoids cancellation.
    """
    if t <= 0:
        raise DomainError(f"drift weight needs t > 0, got {t}")
    lam = op.eigenvalues
    z = lam * t
    small = z < _SERIES_THRESHOLD
    out = np.empty_like(lam)
    out[small] = t * (1.0 - z[small] / 2.0 + z[small] ** 2 / 6.0)
    zs = z[~small]
    out[~small] = -np.expm1(-zs) / lam[~small]
    return out


def noise_weight(op, t):
    """Per-mode standard deviation factor of the stochastic convolution.

    ``sqrt((1 - exp(-2 lambda t)) / (2 lambda t))`` so that
    ``noise_weight * dW`` with ``Var dW = t`` has the exact variance of
    ``int_0^t exp(-lambda (t - s)) dW_s``.
    """
    if t <= 0:
        raise DomainError(f"noise weight needs t > 0, got {t}")
    return np.sqrt(drift_weight(op, 2.0 * t) / (2.0 * t))


def smoothing_constant(sigma, t):
    """sup over lambda >= 0 of lambda^sigma exp(-lambda t) = (sigma/(e t))^sigma."""
    if t <= 0:
        raise DomainError("t must be positive")
    if sigma == 0:
        return 1.0
    return (sigma / (np.e * t)) ** sigma


def interpolation_check(x, op, gamma1, gamma2, gamma3):
    """Ratio |x|_2^(g3-g1) / (|x|_1^(g3-g2) |x|_3^(g2-g1)); at most 1 here."""
    if not gamma1 <= gamma2 <= gamma3:
        raise DomainError("need gamma1 <= gamma2 <= gamma3")
    x = scale_vector(x, op)
    if not np.any(x):
        raise UndefinedRatioError("interpolation ratio undefined for the zero vector")
    n1, n2, n3 = (norm_gamma(x, op, g) for g in (gamma1, gamma2, gamma3))
    # Logs keep large exponents of large norms finite.
    log_ratio = ((gamma3 - gamma1) * np.log(n2)
                 - (gamma3 - gamma2) * np.log(n1)
                 - (gamma2 - gamma1) * np.log(n3))
    return float(np.exp(log_ratio))
