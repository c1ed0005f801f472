"""Command-line entry point: ``semelec simulate | list-presets | validate``.

Exit codes: 0 success, 2 config error, 3 non-convergence or solver failure,
4 output I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError
from .config import MODES, load_config
from .experiments import manifest, run
from .outputs import OutputError, preflight, write_outputs
from .presets import DESCRIPTIONS, PRESETS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _parser():
    p = argparse.ArgumentParser(prog="semelec", description="Semiconductor-electrolyte drift-diffusion simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment and write CSV, SVG and manifest")
    sim.add_argument("--config", required=True, help="JSON config file")
    sim.add_argument("--preset", help="preset to use as the base (overrides the file's 'preset')")
    sim.add_argument("--mode", choices=MODES, help="override experiment.mode")
    sim.add_argument("--out", help="output directory (overrides experiment.output_dir)")
    sim.add_argument("--threads", type=int, default=1, help="worker processes for I-V sweeps")
    sim.add_argument("--no-plots", action="store_true", help="skip SVG figures")

    sub.add_parser("list-presets", help="list the built-in presets")

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--preset")
    return p


def _simulate(args, out):
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    spec = load_config(args.config, preset=args.preset)
    over = {}
    if args.mode:
        over["mode"] = args.mode
    if args.out:
        over["output_dir"] = args.out
    if over:
        spec = spec.with_overrides({"experiment": over})
    preflight(spec.output_dir)
    result = run(spec, threads=args.threads)
    files = write_outputs(result, spec.output_dir, manifest(spec, args.threads), plots=not args.no_plots)
    print(f"wrote {len(files)} files to {spec.output_dir}", file=out)
    for msg in result.failures:
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_SOLVER


def main(argv=None, out=None):
    out = out or sys.stdout
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        if args.command == "list-presets":
            for name in PRESETS:
                print(f"{name:24s} {DESCRIPTIONS[name]}", file=out)
            return EXIT_OK
        if args.command == "validate":
            spec = load_config(args.config, preset=args.preset)
            print(json.dumps({"preset": spec.preset, "mode": spec.mode, "valid": True}), file=out)
            return EXIT_OK
        return _simulate(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


__all__ = ["main"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
