"""Command line entry point: ``lmg-battery {run,sweep,verify,recipe,fit}``."""

import argparse
import json
import logging
import os
import sys
import time

from . import io
from .analysis import (WORKERS_ENV, NonPositiveDataError, fit_scaling, run_protocol,
                       sweep)
from .config import ConfigError, RunConfig, SweepConfig, config_to_dict, load_config, render_config
from .model import PROTOCOLS
from .observables import annotate
from .oracle import verification_suite
from .recipes import RECIPES, UnknownRecipe, recipe

log = logging.getLogger("lmg_battery")


def _out_dir(args, cfg, config_path):
    if args.out:
        return os.path.normpath(args.out)
    # relative output directories are taken relative to the config file
    base = os.path.dirname(os.path.abspath(config_path))
    return os.path.normpath(os.path.join(base, cfg.output.directory))


def _stem(cfg, config_path):
    return cfg.output.stem or os.path.splitext(os.path.basename(config_path))[0]


def _load(path, kind):
    cfg = load_config(path)
    if not isinstance(cfg, kind):
        other = "sweep" if kind is RunConfig else "run"
        raise ConfigError("", f"{path} describes a {other}, use `lmg-battery {other}`")
    return cfg


def execute_run(cfg: RunConfig, directory, stem=None, plot=None):
    start = time.perf_counter()
    traj, maxima = run_protocol(cfg.params, cfg.grid, n_a=cfg.subsystem, scheme=cfg.scheme)
    annotate(traj, n_a=cfg.subsystem)
    manifest = io.build_manifest(config_to_dict(cfg), "run", time.perf_counter() - start,
                                 {"maxima": io.maxima_dict(maxima)})
    return io.write_outputs(traj, manifest, directory, stem or cfg.output.stem or "run",
                            cfg.output.plot if plot is None else plot)


def execute_sweep(cfg: SweepConfig, directory, stem=None, plot=None, workers=None):
    start = time.perf_counter()
    table = sweep(cfg.spec, workers)
    failed = [r for r in table.rows if r.error]
    manifest = io.build_manifest(config_to_dict(cfg), "sweep", time.perf_counter() - start,
                                 {"failed_points": len(failed)})
    paths = io.write_outputs(table, manifest, directory, stem or cfg.output.stem or "sweep",
                             cfg.output.plot if plot is None else plot)
    return paths, failed


def cmd_run(args):
    cfg = _load(args.config, RunConfig)
    paths = execute_run(cfg, _out_dir(args, cfg, args.config), _stem(cfg, args.config),
                        plot=args.plot or None)
    for p in paths:
        print(p)
    return 0


def cmd_sweep(args):
    cfg = _load(args.config, SweepConfig)
    paths, failed = execute_sweep(cfg, _out_dir(args, cfg, args.config), _stem(cfg, args.config),
                                  plot=args.plot or None, workers=args.workers)
    for p in paths:
        print(p)
    for r in failed:
        log.warning("%s at %s=%g failed: %s", r.protocol, r.parameter, r.value, r.error)
    return 0


def cmd_verify(args):
    checks = verification_suite(range(2, args.max_n + 1), args.steps_per_period, args.seed)
    bad = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        bad += not c.passed
        print(f"{status} N={c.n_spins:<2d} {c.name}: {c.value:.3e} (tol {c.tolerance:.0e})")
    print(f"{len(checks) - bad}/{len(checks)} checks passed")
    return 1 if bad else 0


def cmd_recipe(args):
    r = recipe(args.name)
    os.makedirs(args.out, exist_ok=True)
    for stem, cfg in r.configs.items():
        path = os.path.join(args.out, f"{stem}.toml")
        with open(path, "w") as fh:
            fh.write(render_config(cfg))
    with open(os.path.join(args.out, f"{r.name}.recipe.json"), "w") as fh:
        json.dump(r.describe(), fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(r.configs)} configs for {r.name} to {args.out}")
    if not args.execute:
        return 0
    for stem, cfg in r.configs.items():
        log.info("running %s", stem)
        if isinstance(cfg, SweepConfig):
            execute_sweep(cfg, args.out, stem, workers=args.workers)
        else:
            execute_run(cfg, args.out, stem)
    for f in r.fits:
        table = io.read_sweep_csv(os.path.join(args.out, f"{f.table}.csv"))
        _print_fit(f.table, f.protocol, f.quantity, fit_scaling(table, f.quantity, f.n_range,
                                                                  f.protocol))
    return 0


def _print_fit(label, protocol, quantity, fit):
    print(f"{label} {protocol} {quantity}: alpha={fit.exponent:.4f} "
          f"R2={fit.r_squared:.4f} points={fit.n_points} "
          f"N=[{fit.n_range[0]:g},{fit.n_range[1]:g}]")


def cmd_fit(args):
    table = io.read_sweep_csv(args.table)
    protocols = [args.protocol] if args.protocol else sorted(
        {r.protocol for r in table.rows}, key=PROTOCOLS.index)
    for proto in protocols:
        fit = fit_scaling(table, args.quantity, tuple(args.range), proto)
        _print_fit(os.path.basename(args.table), proto, args.quantity, fit)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lmg-battery",
                                     description="LMG quantum battery charging simulations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one charging run from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep from a TOML config")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--workers", type=int, default=None,
                   help=f"process pool size (default: ${WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="cross-check the Dicke engine against the full-space oracle")
    p.add_argument("--max-n", type=int, default=8)
    p.add_argument("--steps-per-period", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("recipe", help="write the configs that regenerate a figure or table")
    p.add_argument("name", choices=RECIPES)
    p.add_argument("--out", default=".")
    p.add_argument("--execute", action="store_true", help="run every config and apply the fits")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_recipe)

    p = sub.add_parser("fit", help="power-law fit of a sweep table over N")
    p.add_argument("table")
    p.add_argument("--quantity", default="P_max", choices=("C_max", "P_max", "dW_max", "cost_max"))
    p.add_argument("--range", nargs=2, type=float, default=(3, 50), metavar=("LO", "HI"))
    p.add_argument("--protocol", choices=PROTOCOLS, default=None)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownRecipe, NonPositiveDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
