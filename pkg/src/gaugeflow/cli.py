"""Command-line runner: ``gaugeflow <command> --config FILE [options]``.

Exit codes: 0 ok, 1 verification failed, 2 configuration error, 3 flow hit
``t_max``, 4 numerical failure, 5 gauge fixing did not converge.
"""
from __future__ import annotations

import argparse
import os
import sys

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_TMAX, EXIT_NUMERIC, EXIT_GAUGEFIX = range(6)
COMMANDS = ("flow", "gauge-fix", "spectrum", "ls-estimate", "verify", "vortex")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser():
    p = argparse.ArgumentParser(prog="gaugeflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment configuration file")
    p.add_argument("--input", help="input checkpoint (trajectory CSV for ls-estimate)")
    p.add_argument("--ref", help="reference checkpoint for gauge-fix")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, help="BLAS threads; GAUGEFLOW_THREADS overrides")
    return p


def _set_threads(requested):
    env = os.environ.get("GAUGEFLOW_THREADS")
    n = env if env else requested
    if n is None:
        return None
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be positive")
    # only effective when numpy has not been imported yet in this process
    for var in _THREAD_VARS:
        os.environ[var] = str(n)
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
    except ValueError as exc:
        print(f"config error: threads: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from . import commands
    from .config import load
    from .errors import ConfigError

    try:
        cfg = load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc} (key: {exc.key})", file=sys.stderr)
        return EXIT_CONFIG
    handler = getattr(commands, "cmd_" + args.command.replace("-", "_"))
    return handler(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
