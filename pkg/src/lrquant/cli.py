"""Command-line entry point: ``lrquant {verify,spectrum,report} CONFIG``."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError
from .runner import run_jobs, write_outputs

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrquant",
        description="Verify operator relations and compute spectra of twisted quantizations.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "run verify-* and equivalence jobs",
        "spectrum": "run spectrum and sweep jobs",
        "report": "run every job",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (default: 1)")
        p.add_argument("--seed", type=int, default=0, help="seed for sampled points (default: 0)")
        p.add_argument("--strict-tolerance", action="store_true",
                       help="also enforce convergence-rate windows and fail inconclusive verdicts")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp line at the top of each CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = run_jobs(cfg, args.command, seed=args.seed, workers=max(1, args.jobs),
                       strict=args.strict_tolerance)
    write_outputs(cfg, results, args.out, timestamp=not args.no_timestamp)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        extra = f"  ({r.error})" if r.error else ""
        print(f"{status}  {r.job.name}  [{r.job.kind}]{extra}")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} jobs passed; outputs in {args.out}")
    return EXIT_OK if failed == 0 else EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
