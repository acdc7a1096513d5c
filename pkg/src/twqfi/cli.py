"""Command line entry point: ``twqfi {run,list,diagnose,oracle}``.

Exit codes: 0 success, 1 numerical failure (escaped trajectories, truncation,
failed diagnostics), 2 usage or configuration error.
"""
import argparse
import os
import sys

import yaml

from . import config as cfgmod
from .diagnostics import run_checks
from .dynamics import IntegrationError
from .estimator import EstimationError
from .fock import TruncationError
from .phase_space import SpecError
from .scenarios import build, manifest_for, oracle_table, run_scenario, write_csv, write_manifest

OUTPUT_ENV = "TWQFI_OUTPUT_DIR"
EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _load_raw(source):
    if source in cfgmod.SCENARIOS:
        return {"scenario": source}
    if not os.path.isfile(source):
        raise cfgmod.ConfigError(f"{source!r} is neither a config file nor a scenario name "
                                 f"({', '.join(cfgmod.SCENARIOS)})")
    with open(source, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise cfgmod.ConfigError(f"{source}: not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise cfgmod.ConfigError(f"{source}: top level must be a mapping")
    return raw


def _config(args):
    raw = _load_raw(args.config)
    numerics = dict(raw.get("numerics") or {})
    for key, value in (("seed", args.seed), ("workers", getattr(args, "workers", None)),
                       ("n_trajectories", getattr(args, "trajectories", None)),
                       ("backend", getattr(args, "backend", None))):
        if value is not None:
            numerics[key] = value
    if numerics:
        raw["numerics"] = numerics
    return cfgmod.validate(raw)


def _out_path(args, cfg, suffix=""):
    outdir = args.out or os.environ.get(OUTPUT_ENV) or "results"
    path = os.path.join(outdir, cfg["output"]["path"])
    if suffix:
        stem, ext = os.path.splitext(path)
        path = stem + suffix + ext
    return path


def cmd_list(args):
    if args.scenario is None:
        for name, s in cfgmod.SCENARIOS.items():
            print(f"{name:<16} {s['description']}")
    else:
        print(cfgmod.describe_schema(args.scenario))
    return EXIT_OK


def cmd_run(args):
    cfg = _config(args)
    table = run_scenario(cfg)
    path = _out_path(args, cfg)
    write_csv(path, table)
    write_manifest(os.path.splitext(path)[0] + ".manifest.json", manifest_for(cfg, table, path))
    print(f"wrote {len(table.rows)} rows to {path}")
    if table.extra.get("nonfinite_rows"):
        print(f"error: {table.extra['nonfinite_rows']} rows contain non-finite values", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_oracle(args):
    cfg = _config(args)
    table = oracle_table(cfg)
    path = _out_path(args, cfg, "-oracle")
    write_csv(path, table)
    print(f"wrote {len(table.rows)} oracle rows to {path}")
    return EXIT_OK


def cmd_diagnose(args):
    cfg = _config(args)
    nm = cfg["numerics"]
    failed = 0
    t1_values = sorted({cfg["protocol"]["t1"][0], cfg["protocol"]["t1"][-1]})
    for t1 in t1_values:
        spec, p = build(cfg, t1)
        print(f"{cfg['scenario']} t1={t1:g}")
        for c in run_checks(spec, p, n_fd=min(nm["n_trajectories"], args.fd_trajectories),
                            seed=nm["seed"], backend=nm["backend"], delta=nm["delta"]):
            print("  " + c.line())
            failed += not c.passed
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _common(p, workers=True):
    p.add_argument("config", help="YAML config file or a scenario name (uses its defaults)")
    p.add_argument("--seed", type=int, help="override numerics.seed")
    p.add_argument("--trajectories", type=int, help="override numerics.n_trajectories")
    p.add_argument("--backend", choices=("numba", "numpy"), help="override numerics.backend")
    if workers:
        p.add_argument("--workers", type=int, help="override numerics.workers")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")


def parser():
    ap = argparse.ArgumentParser(prog="twqfi", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("list", help="list scenarios or show one scenario's config schema")
    p.add_argument("scenario", nargs="?", choices=list(cfgmod.SCENARIOS))
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("run", help="run a scenario and write CSV plus manifest")
    _common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("oracle", help="write exact Fock-basis reference rows")
    _common(p, workers=False)
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("diagnose", help="step-order, reversibility, drift and delta checks")
    _common(p)
    p.add_argument("--fd-trajectories", type=int, default=20000,
                   help="trajectories per delta in the finite-difference scan")
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None):
    args = parser().parse_args(argv)
    # numerical errors are caught first; remaining ValueErrors are bad input
    try:
        return args.func(args)
    except (EstimationError, IntegrationError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (cfgmod.ConfigError, SpecError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
