"""Random and deterministic rough-path drivers.

Seeds are counter based: every ``(master_seed, replica_id, stream_id)``
triple addresses its own Philox stream, so replicas can be generated in any
order or in parallel and still reproduce bit for bit.
"""
import numpy as np

from .errors import ConfigError, DimensionError
from .rough_path import GridRoughPath

STREAM_B = 0
STREAM_W = 1
STREAM_FROZEN = 2
STREAM_AUX = 3


def stream_rng(master_seed, replica_id=0, stream_id=0):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replica_id), int(stream_id)))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed):
    """Accept a Generator, an int, or a ``(master, replica, stream)`` tuple."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return stream_rng(*seed)
    return stream_rng(seed)


def _grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DimensionError("grid must be strictly increasing with at least two points")
    return grid


def ito_step_areas(fine_increments, dt, total=None):
    """Itô areas per step from ``(K, M, d)`` substep increments.

    Off-diagonal entries are left-point sums over the substeps, diagonal
    entries are set exactly to ((dW^i)^2 - dt)/2 with dW = ``total`` (the
    summed substeps by default).
    """
    fine = np.asarray(fine_increments, dtype=float)
    running = np.cumsum(fine, axis=1) - fine  # W_{t_k, tau_j} at left points
    areas = np.einsum("kmi,kmj->kij", running, fine)
    total = fine.sum(axis=1) if total is None else np.asarray(total)
    diag = 0.5 * (total ** 2 - np.asarray(dt)[:, None])
    k_idx, d_idx = np.meshgrid(np.arange(fine.shape[0]), np.arange(fine.shape[2]), indexing="ij")
    areas[k_idx, d_idx, d_idx] = diag
    return areas


def coarsen_substeps(fine_increments, factor):
    """Merge groups of ``factor`` consecutive substeps."""
    fine = np.asarray(fine_increments)
    k, m, d = fine.shape
    if m % factor:
        raise ConfigError(f"{factor} does not divide {m} substeps")
    return fine.reshape(k, m // factor, factor, d).sum(axis=2)


def sample_ito_brownian_lift(seed, grid, d, substeps=32):
    """Itô Brownian rough path on ``grid`` with ``substeps`` per step."""
    if substeps < 1:
        raise ConfigError(f"need at least one substep, got {substeps}")
    grid = _grid(grid)
    rng = as_rng(seed)
    dt = np.diff(grid)
    k = dt.size
    fine = rng.standard_normal((k, substeps, d)) * np.sqrt(dt / substeps)[:, None, None]
    values = np.zeros((k + 1, d))
    np.cumsum(fine.sum(axis=1), axis=0, out=values[1:])
    # diagonal areas use the increments the path actually stores
    areas = ito_step_areas(fine, dt, total=np.diff(values, axis=0))
    return GridRoughPath(grid, values, areas, fine_increments=fine)


def _gauss_nodes(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def canonical_smooth_lift(f, grid, order=8, derivative=None):
    """Canonical lift of a smooth path ``f: R -> R^d``.

    Step areas are Gauss-Legendre quadratures of int f_{t_k, r} (x) f'(r) dr;
    ``f'`` falls back to central differences when ``derivative`` is absent.
    ``f`` must accept an array of times and return shape ``(len, d)`` (or
    ``(len,)`` for d = 1).
    """
    grid = _grid(grid)

    def call(fn, t):
        out = np.asarray(fn(t), dtype=float)
        return out.reshape(t.size, -1)

    if derivative is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(grid))))

        def derivative(t):
            return (call(f, t + h) - call(f, t - h)) / (2 * h)

    at_grid = call(f, grid)
    nodes, weights = _gauss_nodes(order)
    dt = np.diff(grid)
    r = grid[:-1, None] + dt[:, None] * nodes[None, :]
    k, q = r.shape
    fr = call(f, r.ravel()).reshape(k, q, -1)
    dfr = call(derivative, r.ravel()).reshape(k, q, -1)
    rel = fr - at_grid[:-1, None, :]
    areas = np.einsum("q,kqi,kqj->kij", weights, rel, dfr) * dt[:, None, None]
    return GridRoughPath(grid, at_grid - at_grid[0], areas)


def build_mixed_lift(b_path, w_path):
    """Joint lift M = (B, W) over R^(d1 + d2) with Itô cross areas.

    Both inputs must carry the substep records they were sampled from.
    I[B, W] is the left-point substep sum of B_{t_k, tau} (x) dW_tau, and
    I[W, B] is fixed by integration by parts:
    I[W, B]^{ij} = W^i B^j - I[B, W]^{ji} on every step.
    """
    if not np.array_equal(b_path.times, w_path.times):
        raise DimensionError("B and W must share the time grid")
    if b_path.fine_increments is None or w_path.fine_increments is None:
        raise ConfigError("mixed lift needs substep records for both drivers")
    fb, fw = b_path.fine_increments, w_path.fine_increments
    if fb.shape[:2] != fw.shape[:2]:
        raise ConfigError("B and W substep records must use the same substep count")
    d1, d2 = b_path.dim, w_path.dim
    running_b = np.cumsum(fb, axis=1) - fb
    i_bw = np.einsum("kmi,kmj->kij", running_b, fw)
    db = b_path.step_increments
    dw = w_path.step_increments
    i_wb = dw[:, :, None] * db[:, None, :] - np.swapaxes(i_bw, 1, 2)
    k = b_path.n_steps
    areas = np.zeros((k, d1 + d2, d1 + d2))
    areas[:, :d1, :d1] = b_path.step_areas
    areas[:, :d1, d1:] = i_bw
    areas[:, d1:, :d1] = i_wb
    areas[:, d1:, d1:] = w_path.step_areas
    values = np.concatenate([b_path.values, w_path.values], axis=1)
    return GridRoughPath(b_path.times, values, areas,
                         np.concatenate([fb, fw], axis=2))


def sample_mixed_lift(master_seed, replica_id, grid, d1, d2, substeps=32):
    """Sample B and W from disjoint streams and assemble their mixed lift."""
    b = sample_ito_brownian_lift((master_seed, replica_id, STREAM_B), grid, d1, substeps)
    w = sample_ito_brownian_lift((master_seed, replica_id, STREAM_W), grid, d2, substeps)
    return b, w, build_mixed_lift(b, w)


def smooth_test_path(d):
    """A fixed smooth path t -> (sin(t), t^2, cos(2t) - 1, ...) and its derivative."""
    def f(t):
        t = np.asarray(t, dtype=float)
        cols = []
        for i in range(d):
            kind = i % 3
            if kind == 0:
                cols.append(np.sin((i // 3 + 1) * t))
            elif kind == 1:
                cols.append(t ** 2)
            else:
                cols.append(np.cos(2 * t) - 1.0)
        return np.stack(cols, axis=-1)

    def df(t):
        t = np.asarray(t, dtype=float)
        cols = []
        for i in range(d):
            kind = i % 3
            if kind == 0:
                cols.append((i // 3 + 1) * np.cos((i // 3 + 1) * t))
            elif kind == 1:
                cols.append(2 * t)
            else:
                cols.append(-2 * np.sin(2 * t))
        return np.stack(cols, axis=-1)

    return f, df
