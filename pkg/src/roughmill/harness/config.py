"""Flat ``section.key = value`` configuration files.

Lines starting with ``#`` are comments.  Sections are ``model``, ``solver``
and ``experiment``.  Any key can be overridden from the environment with
``ROUGHMILL_<SECTION>__<KEY>`` (e.g. ``ROUGHMILL_SOLVER__EPSILON=0.01``).
"""
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..errors import ConfigError
from ..hilbert_scale import SpectralOperator
from ..models import MODEL_KINDS
from ..slowfast import SolverConfig, derived_delta

ENV_PREFIX = "ROUGHMILL_"
HEADER = "# roughmill config v1"


@dataclass(frozen=True)
class ModelParams:
    kind: str = "default"
    n_modes: int = 8
    L_F2: float = 0.25
    L_G2: float = 0.25
    d1: int = 2
    d2: int = 1
    g_scale: float = 0.5
    c: float = 0.5


@dataclass(frozen=True)
class ExperimentParams:
    replicas: int = 100
    threads: int = 1
    epsilons: tuple = (0.05, 0.01, 0.002)
    deltas: tuple = (0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625)
    increment_replicas: int = 200
    ergodic_replicas: int = 1000
    ergodic_h: float = 0.01
    ergodic_t_max: float = 6.0
    ergodic_y: float = 2.0
    lift_steps: int = 64
    convolve_depth: int = 12
    cauchy_seeds: int = 20
    ito_replicas: int = 100
    trajectory: bool = False


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)

    def build_model(self):
        return build_model(self.model, self.solver)


SECTIONS = {"model": ModelParams, "solver": SolverConfig, "experiment": ExperimentParams}


def build_model(params, solver=None):
    solver = SolverConfig() if solver is None else solver
    if params.kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {sorted(MODEL_KINDS)}, got {params.kind!r}")
    op = SpectralOperator.dirichlet_laplacian(params.n_modes)
    if params.kind == "zero":
        return MODEL_KINDS["zero"](op, d1=params.d1, d2=params.d2)
    if params.kind == "ou":
        return MODEL_KINDS["ou"](op, c=params.c, d1=params.d1, d2=params.d2, g_scale=params.g_scale,
                                 alpha=solver.alpha, gamma=solver.gamma)
    return MODEL_KINDS[params.kind](op, L_F2=params.L_F2, L_G2=params.L_G2, d1=params.d1, d2=params.d2,
                                    g_scale=params.g_scale, c=params.c, alpha=solver.alpha,
                                    gamma=solver.gamma)


# -- value codecs --------------------------------------------------------------

def _field_types(cls):
    defaults = cls()
    return {f.name: (f.type, getattr(defaults, f.name)) for f in fields(cls)}


def _parse_value(section, key, raw, annotation, default):
    raw = raw.strip()
    name = f"{section}.{key}"
    try:
        if key == "delta" and section == "solver":
            return None if raw.lower() in ("auto", "none", "") else float(raw)
        if key == "micro_substeps" and section == "solver":
            return None if raw.lower() in ("auto", "none", "") else int(raw)
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None


def _format_value(section, key, value, solver=None):
    if section == "solver" and key == "delta" and solver is not None:
        if value == derived_delta(solver.epsilon, solver.alpha):
            return "auto"
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


# -- parsing -------------------------------------------------------------------

def parse_pairs(text):
    """Split config text into ``{(section, key): raw}``; later lines win."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        lhs, rhs = line.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            raise ConfigError(f"line {lineno}: key {lhs!r} lacks a section prefix")
        section, key = lhs.split(".", 1)
        pairs[(section, key)] = rhs.split(" #", 1)[0].strip()
    return pairs


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        section = section.lower()
        if section not in SECTIONS:
            continue
        # keys are case-insensitive in the environment
        lookup = {f.name.lower(): f.name for f in fields(SECTIONS[section])}
        if key.lower() not in lookup:
            raise ConfigError(f"{name}: unknown key {section}.{key.lower()}")
        out[(section, lookup[key.lower()])] = value
    return out


def build_run_config(pairs):
    values = {s: {} for s in SECTIONS}
    for (section, key), raw in pairs.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r} (expected one of {sorted(SECTIONS)})")
        types = _field_types(SECTIONS[section])
        if key not in types:
            raise ConfigError(f"unknown key {section}.{key}")
        annotation, default = types[key]
        values[section][key] = _parse_value(section, key, raw, annotation, default)
    solver = SolverConfig(**values["solver"])
    return RunConfig(ModelParams(**values["model"]), solver, ExperimentParams(**values["experiment"]))


def _read_text(source):
    if isinstance(source, Path):
        return source.read_text()
    if "\n" not in source and "=" not in source:
        try:
            return Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc}") from exc
    return source


def load_run_config(source=None, environ=None, use_env=True, **overrides):
    """Parse a config file or inline text, then apply environment and keyword overrides.

    ``overrides`` use ``section__key`` names (e.g. ``solver__seed=7``).
    """
    pairs = parse_pairs(_read_text(source)) if source is not None else {}
    if use_env:
        pairs.update(env_overrides(environ))
    for name, value in overrides.items():
        if value is None:
            continue
        section, key = name.split("__", 1)
        pairs[(section, key)] = _format_value(section, key, value)
    return build_run_config(pairs)


def parse_config(source, environ=None, use_env=True):
    """Return ``(ModelSpec, SolverConfig)`` with every constraint checked."""
    run = load_run_config(source, environ, use_env)
    return run.build_model(), run.solver


def emit_config(run=None):
    run = RunConfig() if run is None else run
    lines = [HEADER]
    for section, obj in (("model", run.model), ("solver", run.solver), ("experiment", run.experiment)):
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(section, f.name, getattr(obj, f.name), run.solver)}")
    return "\n".join(lines) + "\n"


def with_overrides(run, seed: Optional[int] = None, replicas: Optional[int] = None,
                   threads: Optional[int] = None):
    solver = run.solver if seed is None else run.solver.replace(seed=int(seed), delta=run.solver.delta)
    exp = run.experiment
    if replicas is not None:
        n = int(replicas)
        exp = replace(exp, replicas=n, increment_replicas=n, ergodic_replicas=n, ito_replicas=n)
    if threads is not None:
        exp = replace(exp, threads=int(threads))
    return RunConfig(run.model, solver, exp)
