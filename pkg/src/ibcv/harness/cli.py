"""Command line entry point: ``ibcv run | list-cases | validate``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigurationError, GeometryError, NumericalFailure, StateError
from .cases import builtin_cases, builtin_tree, scale_tree
from .config import CaseConfig, load_config
from .run import run_case

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser():
    p = argparse.ArgumentParser(prog="ibcv", description="Immersed boundary flow solver with CV and LM force diagnostics")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a builtin case or a config file")
    r.add_argument("--case", help="builtin case name")
    r.add_argument("--config", help="YAML case file (overrides --case)")
    r.add_argument("--scale", type=float, default=1.0, help="grid and duration scale factor")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--methods", help="comma separated subset of cv,noca,lm")
    r.add_argument("--checkpoint-every", type=int, default=None, help="write a checkpoint every N steps")
    r.add_argument("--restart", help="checkpoint file to resume from")
    r.add_argument("--plot", action="store_true", help="render PNG figures next to the CSV output")

    sub.add_parser("list-cases", help="list builtin cases")

    v = sub.add_parser("validate", help="validate a YAML case file")
    v.add_argument("--config", required=True)
    return p


def _load(args) -> CaseConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.scale != 1.0:
            cfg = CaseConfig.from_dict(scale_tree(cfg.to_dict(), args.scale))
        return cfg
    if not args.case:
        raise ConfigurationError("run needs --case or --config", keys=["case"])
    return CaseConfig.from_dict(builtin_tree(args.case, args.scale))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list-cases":
            for name, desc in builtin_cases().items():
                print(f"{name:28s} {desc}")
            return EXIT_OK
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"{args.config}: valid case {cfg.name!r}")
            return EXIT_OK
        cfg = _load(args)
        methods = None
        if args.methods:
            methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        if args.checkpoint_every is not None and args.checkpoint_every < 0:
            raise ConfigurationError("--checkpoint-every must be non-negative", keys=["checkpoint_every"])
        res = run_case(cfg, args.out, methods=methods, checkpoint_every=args.checkpoint_every,
                       restart=args.restart, plot=args.plot)
        print(f"forces:   {res.forces_csv}")
        if res.momentum_csv:
            print(f"momentum: {res.momentum_csv}")
        print(f"summary:  {res.summary_path}")
        for path in res.figures:
            print(f"figure:   {path}")
        if res.warnings:
            print(f"warnings: {len(res.warnings)} multi-body CV events (see summary)")
        return EXIT_OK
    except (ConfigurationError, GeometryError) as exc:
        keys = getattr(exc, "keys", None)
        print(f"configuration error: {exc}", file=sys.stderr)
        if keys:
            print("offending keys: " + ", ".join(keys), file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, StateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
