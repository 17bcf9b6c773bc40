"""Command line entry point: ``sttr {run,mc,sweep,obsv} --config FILE --out DIR``.

Exit status is 0 on success, 2 for configuration problems and 3 when a
numerical failure stops the simulation.
"""

import argparse
import logging
import os
import sys
import time

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .estimators import NumericalError
from .geometry import GeometryError
from .sim import compute_metrics, monte_carlo, observability_series, parameter_sweep, parse_grid
from .sim import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("sttr")


def _load(args):
    if args.config is None:
        return ScenarioConfig()
    return load_config(args.config)


def _outdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    return path


def cmd_run(args):
    from . import report

    cfg = _load(args)
    out = _outdir(args.out)
    seed = cfg.seed if args.seed is None else args.seed
    trace = run_scenario(cfg, seed)
    metrics = compute_metrics(trace)
    report.write_trace(os.path.join(out, "trace.csv"), trace)
    report.write_run_metrics(os.path.join(out, "metrics.csv"), metrics)
    report.write_topology(os.path.join(out, "topology.csv"), trace.neighbors)
    report.write_observability(os.path.join(out, "observability.csv"), trace.obs_singular_values)
    table = report.metrics_table(metrics)
    report.write_summary(os.path.join(out, "summary.txt"),
                         f"single run, seed {seed}, {trace.n_steps} steps", table, cfg)
    if not args.no_plots:
        from . import plots

        plots.run_figures(trace, out)
    print(table)


def cmd_mc(args):
    from . import report

    cfg = _load(args)
    out = _outdir(args.out)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    t0 = time.perf_counter()
    result = monte_carlo(cfg, args.trials, chunk=args.chunk)
    elapsed = time.perf_counter() - t0
    report.write_mc(out, result)
    table = report.mc_table(result)
    report.write_summary(os.path.join(out, "summary.txt"),
                         f"Monte Carlo, {args.trials} trials from seed {cfg.seed} "
                         f"({elapsed:.1f} s)", table, cfg)
    if not args.no_plots:
        from . import plots

        plots.rmse_bars(result, os.path.join(out, "rmse.png"))
    print(table)


def _grid(items):
    spec = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep:
            raise ConfigError(f"--grid {item!r}: expected estimator.parameter=v1,v2,...")
        spec[key.strip()] = values
    try:
        grid = parse_grid(spec)
    except ValueError as exc:
        raise ConfigError(f"--grid: {exc}") from exc
    return grid


def cmd_sweep(args):
    from . import report

    cfg = _load(args)
    out = _outdir(args.out)
    if not args.grid:
        raise ConfigError("sweep needs at least one --grid entry")
    grid = _grid(args.grid)
    for est, param in grid:
        if est not in cfg.params:
            raise ConfigError(f"--grid: unknown estimator {est!r}")
        if not hasattr(cfg.params[est], param):
            raise ConfigError(f"--grid: {est} has no parameter {param!r}")
    try:
        rows = parameter_sweep(cfg, grid, trials=args.trials, chunk=args.chunk)
    except GeometryError:
        raise
    except (TypeError, ValueError) as exc:  # rejected parameter values
        raise ConfigError(f"sweep: {exc}") from exc
    report.write_sweep(os.path.join(out, "sweep.csv"), rows)
    lines = [f"{r:>4}  {row.estimator:<6} {row.score:10.4f}  {row.point}"
             for r, row in enumerate(rows, start=1)]
    body = "rank  est         score  point\n" + "\n".join(lines)
    report.write_summary(os.path.join(out, "summary.txt"),
                         f"parameter sweep, {args.trials} trials per point", body, cfg)
    if not args.no_plots:
        from . import plots

        plots.sweep_scores(rows, os.path.join(out, "sweep.png"))
    print(body)


def cmd_obsv(args):
    from . import report

    cfg = _load(args)
    out = _outdir(args.out)
    seed = cfg.seed if args.seed is None else args.seed
    times, sv = observability_series(cfg, seed, empirical=args.empirical)
    report.write_observability(os.path.join(out, "observability.csv"), sv)
    from .observability import numeric_rank

    ranks = numeric_rank(sv)
    body = (f"steps: {len(times)}  observers: {sv.shape[1]}\n"
            f"full-rank fraction: {float((ranks == 6).mean()):.4f}\n"
            f"minimum rank: {int(ranks.min())}")
    mode = "measured" if args.empirical else "true"
    report.write_summary(os.path.join(out, "summary.txt"),
                         f"single-step observability from {mode} geometry, seed {seed}", body,
                         cfg)
    if not args.no_plots:
        from . import plots

        plots.observability_margin(times, sv, os.path.join(out, "observability.png"))
    print(body)


def build_parser():
    parser = argparse.ArgumentParser(prog="sttr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario file (defaults are used when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")

    p = sub.add_parser("run", help="single scenario with full trace")
    common(p)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mc", help="Monte Carlo over seeds seed..seed+trials-1")
    common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--chunk", type=int, default=25, help="trials simulated per batch")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="grid search over estimator parameters")
    common(p)
    p.add_argument("--grid", action="append", default=[],
                   help="estimator.parameter=v1,v2,... (repeatable)")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--chunk", type=int, default=25)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("obsv", help="per-step single-step observability report")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--empirical", action="store_true",
                   help="use measured rather than true bearings and rates")
    p.set_defaults(func=cmd_obsv)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, GeometryError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
