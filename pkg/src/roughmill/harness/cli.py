"""Command-line entry point: ``roughmill [options] <command>``."""
import argparse
import sys
from pathlib import Path

import numpy as np

from ..errors import RoughmillError
from ..slowfast import solve_coupled, sample_drivers, drivers_from_paths
from ..averaging import solve_averaged
from ..drivers import STREAM_B, sample_ito_brownian_lift
from .config import emit_config, load_run_config, with_overrides
from .experiments import SUITES, run_experiment
from .io import read_driver, write_driver, write_trajectory


def _common(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default, help="flat key=value config file")
    parser.add_argument("--seed", type=int, metavar="U64", default=default, help="master seed")
    parser.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS if suppress else ".",
                        help="output directory")
    parser.add_argument("--replicas", type=int, metavar="N", default=default,
                        help="replica count for every Monte-Carlo suite")
    parser.add_argument("--threads", type=int, metavar="N", default=default, help="worker threads")


def build_parser():
    p = argparse.ArgumentParser(prog="roughmill", description="Rough slow-fast averaging experiments.")
    _common(p)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment suite")
    r.add_argument("experiment", choices=sorted(SUITES) + ["all"])
    _common(r, suppress=True)

    e = sub.add_parser("emit-config", help="print the effective configuration")
    _common(e, suppress=True)

    s = sub.add_parser("simulate", help="write one replica's trajectories and driver replay")
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--epsilon", type=float, default=None)
    _common(s, suppress=True)

    rp = sub.add_parser("replay", help="re-run the slow-fast system from a driver replay file")
    rp.add_argument("driver", help="driver-B CSV written by 'simulate'")
    rp.add_argument("--epsilon", type=float, default=None)
    _common(rp, suppress=True)
    return p


def _load(args):
    run = load_run_config(args.config)
    return with_overrides(run, args.seed, args.replicas, args.threads)


def cmd_run(args, run):
    names = sorted(SUITES) if args.experiment == "all" else [args.experiment]
    ok = True
    for name in names:
        rep = run_experiment(name, run, args.out)
        sys.stdout.write(rep.summary())
        ok &= rep.passed
    return 0 if ok else 1


def cmd_simulate(args, run):
    model = run.build_model()
    cfg = run.solver if args.epsilon is None else run.solver.replace(epsilon=args.epsilon)
    out = Path(args.out)
    drv = sample_drivers(cfg, model, [args.replica])
    path = solve_coupled(model.op, model, cfg, drv)
    xbar = solve_averaged(model.op, model, None, cfg, drv)
    b = sample_ito_brownian_lift((cfg.seed, args.replica, STREAM_B), cfg.macro_times, model.d1,
                                 cfg.area_substeps)
    files = [write_trajectory(out / "slow.csv", path.times, path.X[0], "x"),
             write_trajectory(out / "fast.csv", path.times, path.Y[0], "y"),
             write_trajectory(out / "averaged.csv", path.times, xbar[0], "x"),
             write_driver(out / "driver.csv", b, drv.dW[0], drv.micro_per_macro)]
    for f in files:
        print(f)
    return 0


def cmd_replay(args, run):
    model = run.build_model()
    cfg = run.solver if args.epsilon is None else run.solver.replace(epsilon=args.epsilon)
    b, dw, m = read_driver(args.driver)
    if dw is None:
        raise RoughmillError("replay needs the companion W file")
    drv = drivers_from_paths([b], dw, m)
    cfg = cfg.replace(T=float(b.times[-1]), macro_steps=b.n_steps, delta=cfg.delta)
    path = solve_coupled(model.op, model, cfg, drv)
    out = Path(args.out)
    print(write_trajectory(out / "replay_slow.csv", path.times, path.X[0], "x"))
    print(write_trajectory(out / "replay_fast.csv", path.times, path.Y[0], "y"))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run = _load(args)
        if args.command == "emit-config":
            sys.stdout.write(emit_config(run))
            return 0
        if args.command == "run":
            return cmd_run(args, run)
        if args.command == "simulate":
            return cmd_simulate(args, run)
        return cmd_replay(args, run)
    except (RoughmillError, OSError) as exc:
        print(f"roughmill: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
