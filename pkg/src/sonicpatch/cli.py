"""Command line: ``sonicpatch <trace|solve|march|diagnose|verify|all> --config FILE``.

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 threshold violation under ``--strict``.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import SolverConfig, load_config
from .errors import ConfigError, SonicPatchError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_STRICT = 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sonicpatch",
                                 description="Semi-hyperbolic patch solver and identity checker.")
    ap.add_argument("command", choices=list(pipeline.STAGES) + ["all"])
    ap.add_argument("--config", help="key = value config file (defaults if omitted)")
    ap.add_argument("--out", help="output directory (overrides the config's 'out')")
    ap.add_argument("--strict", action="store_true",
                    help="exit 4 if a diagnostic threshold is violated")
    ap.add_argument("--refine", type=int, help="global refinement multiplier")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else SolverConfig()
        if args.refine is not None:
            if args.refine < 1:
                raise ConfigError(f"--refine = {args.refine}: must be >= 1")
            cfg = cfg.with_refine(args.refine)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out
    try:
        res = pipeline.execute(args.command, cfg, out, strict=args.strict)
    except SonicPatchError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for p in res["artifacts"]:
        print(p)
    if res["violations"]:
        print("threshold violations: " + ", ".join(res["violations"]), file=sys.stderr)
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
