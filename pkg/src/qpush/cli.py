"""Command line: ``qpush verify <experiment>`` and ``qpush report``.

Exit codes: 0 when no check failed (inconclusive is not a failure), 1 when a
check failed, 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="suite JSON: {\"experiments\": {name: params}, \"seed\": s}")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit); overrides the config")
    common.add_argument("--out", type=Path, default=Path("qpush-out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--precision-bits", type=int, help="working precision for extended arithmetic")

    ap = argparse.ArgumentParser(prog="qpush", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run one experiment")
    v.add_argument("experiment", choices=harness.EXPERIMENTS)
    sub.add_parser("report", parents=[common], help="run every experiment in the config")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        text = args.config.read_text() if args.config else None
        only = args.experiment if args.command == "verify" else None
        configs = harness.load_suite(text, args.seed, args.precision_bits, only)
    except (OSError, harness.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report, tables, timings = harness.run_all(configs, args.threads)
    path = harness.emit_report(report, args.out, tables, timings)
    for v in report.verdicts:
        print(f"[{v.status:>12}] {v.experiment}: {v.check}")
    print(f"report written to {path}")
    return 1 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
