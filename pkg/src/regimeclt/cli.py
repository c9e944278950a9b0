"""Command-line entry point.

regimeclt run --scenario path.json [--out DIR] [--seed U64] [--replicates N] [--threads N]
regimeclt verify-all --suite DIR [--out DIR] [--threads N]

The default output directory comes from $REGIMECLT_OUT, falling back to
./regimeclt-out. --threads is accepted for interface stability; results are
deterministic and identical for every thread count. Exit codes: 0 success,
1 invalid configuration, 2 theoretical bound violated, 3 internal error.
Failures print one machine-readable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import BoundViolated, ConfigInvalid
from .runner import run, verify_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regimeclt",
        description="Simulation and verification lab for regime-switching sequences: "
        "mixing certificates, near-independence gaps, characteristic-function "
        "factorization checks, and normal-convergence measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario file")
    run_p.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    run_p.add_argument("--out", default=None, help="output directory (default: $REGIMECLT_OUT or ./regimeclt-out)")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed base")
    run_p.add_argument("--replicates", type=int, default=None, help="override the replicates parameter")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker count; accepted for compatibility, never changes results")

    verify_p = sub.add_parser("verify-all", help="run every scenario in a directory")
    verify_p.add_argument("--suite", required=True, help="directory of scenario JSON files")
    verify_p.add_argument("--out", default=None, help="output directory (default: $REGIMECLT_OUT or ./regimeclt-out)")
    verify_p.add_argument("--threads", type=int, default=1,
                          help="worker count; accepted for compatibility, never changes results")
    return parser


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _out_dir(arg: str | None) -> str:
    return arg or os.environ.get("REGIMECLT_OUT") or "regimeclt-out"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            result = run(
                args.scenario,
                _out_dir(args.out),
                seed=args.seed,
                replicates=args.replicates,
                threads=args.threads,
            )
            print(f"{result.scenario.name}: ok ({result.report_path})")
            return 0
        summary = verify_all(args.suite, _out_dir(args.out), threads=args.threads)
        for entry in summary.entries:
            state = "ok" if entry["status"] == 0 else f"FAIL({entry['status']})"
            print(f"{entry['file']}: {state} {entry['detail']}".rstrip())
        print(f"{len(summary.entries)} scenario(s), {summary.n_failed} failed")
        return summary.exit_code
    except ConfigInvalid as exc:
        _fail("config-invalid", str(exc))
        return 1
    except BoundViolated as exc:
        _fail("bound-violated", str(exc))
        return 2
    except Exception as exc:  # noqa: BLE001 -- CLI boundary maps everything to exit 3
        _fail("internal", f"{type(exc).__name__}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
