"""Named experiment suites with pass/fail checks against fixed thresholds."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..averaging import averaging_error_sweep, ergodicity_decay
from ..controlled import ControlledPath
from ..convolution import rough_convolve
from ..drivers import canonical_smooth_lift, sample_ito_brownian_lift, sample_mixed_lift, \
    smooth_test_path
from ..hilbert_scale import SpectralOperator, norm_gamma
from ..models import null_coupling_model
from ..rough_path import max_chen_residual
from ..slowfast import increment_experiment, initial_state
from .config import RunConfig, build_model
from .io import write_csv

CHEN_TOL = 1e-12
CONVOLVE_TOL = 1e-3
CONVOLVE_LAMBDAS = (1.0, 4.0, 9.0)
ITO_GAP_TOL = 0.05
INCREMENT_SLOPE_MIN = 1.6
ERGODIC_FRACTION = 0.5
NULL_TOL = 1e-4
HALVING = 0.5


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str
    passed: bool

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.6g} {self.relation} {self.threshold:.6g}"


@dataclass
class Report:
    name: str
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold, relation):
        ok = {"<=": value <= threshold, ">=": value >= threshold, "==": value == threshold}[relation]
        self.checks.append(Check(name, float(value), float(threshold), relation, bool(ok)))

    def summary(self):
        lines = [f"experiment: {self.name}"] + [c.line() for c in self.checks] + self.notes
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


# -- lift-check ----------------------------------------------------------------

def lift_check(run, out):
    seed = run.solver.seed
    k = run.experiment.lift_steps
    grid = np.linspace(0.0, 1.0, k + 1)
    f, df = smooth_test_path(3)
    smooth = canonical_smooth_lift(f, grid, derivative=df)
    brown = sample_ito_brownian_lift((seed, 0, 0), grid, 2, run.solver.area_substeps)
    _, _, mixed = sample_mixed_lift(seed, 0, grid, 2, 1, run.solver.area_substeps)
    rep = Report("lift-check")
    rows = []
    for name, p in (("smooth", smooth), ("brownian", brown), ("mixed", mixed)):
        r = max_chen_residual(p)
        rows.append((name, p.dim, k, r, CHEN_TOL, r <= CHEN_TOL))
        rep.add(f"chen residual {name}", r, CHEN_TOL, "<=")
    rep.files.append(write_csv(Path(out) / "lift_check.csv",
                               ["lift", "dim", "steps", "max_residual", "threshold", "pass"], rows,
                               meta={"seed": seed}))
    return rep


# -- convolve-check ------------------------------------------------------------

def linear_path_convolution(lam, depth):
    """Rough convolution of Y = 1 against X_t = t on [0, 1]."""
    k = 2 ** depth
    grid = np.linspace(0.0, 1.0, k + 1)
    x = canonical_smooth_lift(lambda t: t, grid, derivative=lambda t: np.ones_like(t))
    op = SpectralOperator(np.array([lam]))
    cp = ControlledPath(grid, np.ones((k + 1, 1, 1)), np.zeros((k + 1, 1, 1, 1)))
    return float(rough_convolve(op, cp, x, k, depth)[0])


def sine_integrand(op, driver):
    """Y[n, i] = sin(X^i) / n^2 with Y'[n, i, j] = delta_ij cos(X^i) / n^2."""
    g = 1.0 / np.arange(1, op.n_modes + 1) ** 2
    x = driver.values
    d = driver.dim
    y = g[None, :, None] * np.sin(x)[:, None, :]
    yp = np.zeros(y.shape + (d,))
    idx = np.arange(d)
    yp[:, :, idx, idx] = g[None, :, None] * np.cos(x)[:, None, :]
    return ControlledPath(driver.times, y, yp)


def cauchy_differences(op, driver, depths):
    """|I_{j+1} - I_j|_0 for consecutive depths j of the compensated sum."""
    cp = sine_integrand(op, driver)
    vals = [rough_convolve(op, cp, driver, driver.n_steps, j) for j in depths]
    return np.array([norm_gamma(b - a, op, 0.0) for a, b in zip(vals[:-1], vals[1:])])


def cauchy_ratio(diffs):
    """Successive ratios of root-mean-square differences over seeds, averaged over depths.

    ``diffs`` has one row per seed.  Per-seed ratios of two random norms are
    heavy tailed, so the ratio is taken after the seed average.
    """
    rms = np.sqrt(np.mean(np.asarray(diffs) ** 2, axis=0))
    return float(np.mean(rms[1:] / rms[:-1]))


def ito_gap(op, driver):
    """Compensated sum versus the left-point Ito-Euler sum on the driver's own grid."""
    cp = sine_integrand(op, driver)
    k = driver.n_steps
    rough = rough_convolve(op, cp, driver, k, int(np.log2(k)))
    u = np.arange(k)
    decay = np.exp(-op.eigenvalues[None, :] * (driver.times[-1] - driver.times[u])[:, None])
    euler = np.sum(decay * np.einsum("lnd,ld->ln", cp.Y[u], driver.step_increments), axis=0)
    return rough, euler


def cauchy_threshold(alpha=0.45):
    return 2.0 ** (-(3 * alpha - 1)) + 0.1


def convolve_check(run, out):
    exp = run.experiment
    seed = run.solver.seed
    depth = exp.convolve_depth
    rep = Report("convolve-check")
    rows = []
    for lam in CONVOLVE_LAMBDAS:
        val = linear_path_convolution(lam, depth)
        exact = (1 - np.exp(-lam)) / lam
        rows.append(("oracle", lam, val, exact, abs(val - exact)))
        rep.add(f"smooth oracle lambda={lam:g}", abs(val - exact), CONVOLVE_TOL, "<=")

    op = SpectralOperator.dirichlet_laplacian(run.model.n_modes)
    k = 2 ** depth
    grid = np.linspace(0.0, 1.0, k + 1)
    diffs = []
    for s in range(exp.cauchy_seeds):
        drv = sample_ito_brownian_lift((seed, s, 0), grid, 2, run.solver.area_substeps)
        diffs.append(cauchy_differences(op, drv, range(depth - 4, depth + 1)))
    rms = np.sqrt(np.mean(np.array(diffs) ** 2, axis=0))
    for j, v in enumerate(rms):
        rows.append(("cauchy_rms_diff", depth - 4 + j, v, np.nan, np.nan))
    mean_ratio = cauchy_ratio(diffs)
    rep.add("sewing Cauchy ratio", mean_ratio, cauchy_threshold(run.solver.alpha), "<=")

    gaps, sizes = [], []
    for s in range(exp.ito_replicas):
        drv = sample_ito_brownian_lift((seed, s, 1), grid, 2, run.solver.area_substeps)
        rough, euler = ito_gap(op, drv)
        gaps.append(norm_gamma(rough - euler, op, 0.0) ** 2)
        sizes.append(norm_gamma(euler, op, 0.0) ** 2)
    rel = float(np.sqrt(np.mean(gaps) / np.mean(sizes)))
    rows.append(("ito", exp.ito_replicas, rel, np.nan, np.nan))
    rep.add("Ito consistency relative RMS gap", rel, ITO_GAP_TOL, "<=")
    rep.files.append(write_csv(Path(out) / "convolve_check.csv",
                               ["check", "parameter", "value", "reference", "abs_error"], rows,
                               meta={"seed": seed, "depth": depth}))
    return rep


# -- Monte-Carlo suites ------------------------------------------------------------

def increments(run, out):
    model = run.build_model()
    cfg = run.solver
    exp = run.experiment
    tab = increment_experiment(model.op, model, cfg, exp.deltas, exp.increment_replicas,
                               threads=exp.threads)
    rep = Report("increments")
    rows = [(d, m, s, tab.replicas, cfg.seed) for d, m, s in zip(tab.deltas, tab.mean, tab.stderr)]
    rep.files.append(write_csv(Path(out) / "increments.csv",
                               ["delta", "mean_sup_fourth", "stderr", "replicas", "seed"], rows,
                               meta={"slope": tab.slope}))
    rep.add("log-log increment slope", tab.slope, INCREMENT_SLOPE_MIN, ">=")
    return rep


def ergodicity(run, out):
    model = run.build_model()
    exp = run.experiment
    x, _ = initial_state(model.op, run.solver)
    h = exp.ergodic_h
    t_grid = np.arange(int(round(exp.ergodic_t_max / h / 10)) + 1) * (10 * h)
    res = ergodicity_decay(model.op, model, x, np.full(model.op.n_modes, exp.ergodic_y), t_grid,
                           exp.ergodic_replicas, run.solver.seed, h=h, threads=exp.threads)
    rep = Report("ergodicity")
    sm = np.concatenate([np.full(2, np.nan), res.smoothed, np.full(2, np.nan)])
    rows = list(zip(res.times, res.curve, sm))
    rep.files.append(write_csv(Path(out) / "ergodicity.csv", ["t", "abs_mean_gap", "smoothed"], rows,
                               meta={"rate": res.rate, "theoretical_rate": res.theoretical_rate,
                                     "phi_rate": res.phi_rate, "replicas": exp.ergodic_replicas,
                                     "seed": run.solver.seed}))
    rep.files.append(write_csv(Path(out) / "ergodicity_phi.csv",
                               ["s"] + [f"r={t:.6g}" for t in res.phi_times],
                               [[t, *row] for t, row in zip(res.phi_times, res.phi)]))
    rep.add("fitted decay rate", res.rate, ERGODIC_FRACTION * res.theoretical_rate, ">=")
    rep.add("smoothed curve nonincreasing", float(res.nonincreasing), 1.0, "==")
    rep.add("Phi Cauchy-Schwarz", float(res.cauchy_schwarz_ok), 1.0, "==")
    if not res.fit_ok:
        rep.notes.append(f"diagnostic: {res.diagnostic}")
    return rep


SWEEP_COLUMNS = ["epsilon", "delta", "mean_sq_sup_error", "stderr", "replicas", "seed"]


def averaging(run, out):
    model = run.build_model()
    cfg = run.solver
    exp = run.experiment
    rep = Report("averaging")
    tab = averaging_error_sweep(model.op, model, cfg, exp.epsilons, exp.replicas, threads=exp.threads)
    rep.files.append(write_csv(Path(out) / "averaging.csv", SWEEP_COLUMNS, tab.rows()))
    rep.add("error strictly decreasing beyond pooled SE", float(tab.strictly_decreasing()), 1.0, "==")
    rep.add("last/first error ratio", tab.mean[-1] / tab.mean[0], HALVING, "<=")

    null = null_coupling_model(model.op, L_F2=model.L_F2, L_G2=model.L_G2, d1=model.d1, d2=model.d2,
                               g_scale=run.model.g_scale, c=run.model.c, alpha=cfg.alpha, gamma=cfg.gamma)
    ntab = averaging_error_sweep(null.op, null, cfg, exp.epsilons, exp.replicas, threads=exp.threads)
    rep.files.append(write_csv(Path(out) / "averaging_null.csv", SWEEP_COLUMNS, ntab.rows()))
    sup_diff = float(np.sqrt(np.max(ntab.per_replica)))
    rep.add("null coupling sup difference", sup_diff, NULL_TOL, "<=")
    return rep


SUITES = {
    "lift-check": lift_check,
    "convolve-check": convolve_check,
    "increments": increments,
    "ergodicity": ergodicity,
    "averaging": averaging,
}


def run_experiment(name, run=None, out="."):
    """Run a suite, write its CSVs and ``<name>_summary.txt`` under ``out``."""
    if name not in SUITES:
        raise KeyError(f"unknown experiment {name!r}; choose from {sorted(SUITES)}")
    run = RunConfig() if run is None else run
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rep = SUITES[name](run, out)
    summary = out / f"{name}_summary.txt"
    summary.write_text(rep.summary())
    rep.files.append(summary)
    return rep
