"""Command-line entry point.

    fqhd-sim run <config.json> [--out DIR] [--threads N]
    fqhd-sim presets
    fqhd-sim report <run_dir>

Exit codes: 0 on success/converged, 2 on solver failure, 1 on configuration
or usage errors.  FQHD_SIM_LOG in {error, info, debug} controls verbosity.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .experiments import ConfigError, parse_config, run_experiment

log = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    raw = os.environ.get("FQHD_SIM_LOG", "error").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        level = logging.ERROR
        print(
            f"warning: FQHD_SIM_LOG={raw!r} not in {sorted(_LOG_LEVELS)}; using 'error'",
            file=sys.stderr,
        )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _cmd_run(args):
    config_path = Path(args.config)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config {config_path}: {exc}", file=sys.stderr)
        return 1
    try:
        spec = parse_config(text)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = args.out or spec.output_dir or Path(f"fqhd_{spec.kind}_out")
    spec = replace(spec, output_dir=Path(out_dir))
    summary = run_experiment(spec, threads=args.threads)
    status = "converged" if summary.converged else "failed"
    print(
        f"{spec.kind}: {status} in {summary.wall_time:.2f} s "
        f"(residual {summary.residual:.3e}); outputs in {spec.output_dir}"
    )
    if summary.error:
        print(f"solver error: {summary.error}", file=sys.stderr)
    return 0 if summary.converged else 2


def _cmd_presets(args):
    base = resources.files("fqhdsim").joinpath("presets")
    for entry in sorted(base.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            print(f"{entry.name:36s} {entry}")
    return 0


def _cmd_report(args):
    from .report import render_run

    try:
        written = render_run(Path(args.run_dir))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def main(argv=None):
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="fqhd-sim",
        description="Quantum hydrodynamic semiconductor model: solvers and studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment description")
    p_run.add_argument("--out", type=Path, default=None, help="output directory")
    p_run.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
    p_run.set_defaults(fn=_cmd_run)

    p_presets = sub.add_parser("presets", help="list the built-in scenario files")
    p_presets.set_defaults(fn=_cmd_presets)

    p_report = sub.add_parser("report", help="render figures for a finished run")
    p_report.add_argument("run_dir", help="directory holding summary.json and CSV output")
    p_report.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
