"""Command line entry point.

    qidg run --config FILE [--out DIR]
    qidg converge --config FILE --levels N1,N2,... [--out DIR]
    qidg check

Exit codes: 0 success, 1 usage or configuration error (and failed checks),
2 Newton nonconvergence.
"""
import argparse
import sys

from .config import parse_config
from .errors import ConfigError, InvalidSpecError, QidgError


def _levels(text):
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}")
    if not out or any(n < 1 for n in out):
        raise argparse.ArgumentTypeError("levels must be positive integers")
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="qidg", description="DG phase-field flow solver")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (default: config 'output')")
    run.add_argument("--quiet", action="store_true")
    conv = sub.add_parser("converge", help="steady-profile convergence table")
    conv.add_argument("--config", required=True)
    conv.add_argument("--levels", required=True, type=_levels)
    conv.add_argument("--out", default=None)
    conv.add_argument("--quiet", action="store_true")
    sub.add_parser("check", help="run the built-in property suite")
    return ap


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    log = None if getattr(args, "quiet", False) else print

    if args.command == "check":
        from .checks import run_checks
        results = run_checks()
        bad = [r for r in results if not r.passed]
        print(f"{len(results) - len(bad)}/{len(results)} checks passed")
        return 1 if bad else 0

    try:
        cfg = _load(args.config)
    except (ConfigError, InvalidSpecError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 1

    from .drivers import run_convergence, run_simulation
    try:
        if args.command == "run":
            status, _ = run_simulation(cfg, args.out, log=log)
        else:
            status, rows = run_convergence(cfg, args.levels, args.out, log=log)
    except (ValueError, QidgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
