"""``qualm-lab`` command-line entry point."""

from __future__ import annotations

import argparse
import os
import sys

from .errors import QualmError
from .experiments import COMMANDS, load_config, run

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qualm-lab", description="Desk-scale experiments on coherent versus incoherent lab access.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "ell", "k", "trials", "output_dir")}
    try:
        cfg = load_config(args.command, args.config, overrides)
        if args.threads < 1:
            raise QualmError("threads must be at least 1")
        records, ok, path = run(args.command, cfg, args.threads)
    except (QualmError, OSError) as e:
        print(f"qualm-lab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    failed = [r for r in records if r.passed is False]
    for r in failed:
        print(f"FAILED {r.group or '-'} ell={r.ell} {r.metric}={r.value:.6g} (reference {r.reference})", file=sys.stderr)
    print(f"{args.command}: {'pass' if ok else 'FAIL'} -> {path}")
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
