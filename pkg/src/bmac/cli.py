"""Command-line entry point: ``bmac <kind> --config FILE``."""

import argparse
import os
import sys
import time

from .harness.config import KINDS, ConfigError, load_config, parse_config
from .harness.experiments import run_experiment, write_csv


def _parser():
    p = argparse.ArgumentParser(prog="bmac", description="Run B-MAC covariance optimization experiments.")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", required=True, help="YAML experiment file")
        s.add_argument("--seeds", help="comma-separated seeds overriding the config")
        s.add_argument("--out-dir", help="directory for the CSV (default: config 'output' or '.')")
        s.add_argument("--solver", help="solver override (A, B, PR, PR1)")
        s.add_argument("--tol", type=float, help="tolerance override")
        s.add_argument("--workers", type=int, help="parallel worker processes")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"config is a {cfg.kind} experiment, not {args.kind}")
        data = dict(cfg.data)
        if args.seeds:
            data["seeds"] = [int(s) for s in args.seeds.split(",")]
        if args.solver:
            data["solvers"] = [args.solver]
        if args.tol is not None:
            data["tol"] = args.tol
        if args.workers is not None:
            data["workers"] = args.workers
        cfg = parse_config(data)
    except (OSError, ConfigError) as exc:
        print(f"bmac: {exc}", file=sys.stderr)
        return 2
    out_name = os.path.basename(cfg.get("output") or f"{cfg.kind}.csv")
    out_dir = args.out_dir or os.path.dirname(cfg.get("output") or "") or "."
    t0 = time.perf_counter()
    columns, rows = run_experiment(cfg)
    path = write_csv(cfg, columns, rows, os.path.join(out_dir, out_name))
    print(f"wrote {len(rows)} rows to {path} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
