"""Command-line entry point: ``ghostbohm run|presets|validate|plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import BlowUpError, ConfigError, GhostBohmError
from .export import read_series
from .plot import emit_plot
from .runner import OUT_DIR_ENV, run_scenario
from .scenario import PRESETS, load_scenario, with_overrides

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3

log = logging.getLogger("ghostbohm")


def _parser():
    p = argparse.ArgumentParser(prog="ghostbohm", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or built-in preset")
    run.add_argument("scenario", help="preset name or path to a JSON scenario")
    run.add_argument("--out-dir", help=f"output directory (default: scenario value, ${OUT_DIR_ENV}, ./out)")
    run.add_argument("--seed", type=int)
    run.add_argument("--step", type=float)
    run.add_argument("--t-end", type=float)
    run.add_argument("--ensemble-size", type=int)
    run.add_argument("--format", choices=("csv", "json"), action="append",
                     help="series format; repeat for both (an SVG plot is always written)")
    run.add_argument("--no-plot", action="store_true")
    run.add_argument("--biham-convention", choices=("canonical", "halved"))
    run.add_argument("--workers", type=int, default=1)

    pre = sub.add_parser("presets", help="list built-in presets")
    pre.add_argument("--show", metavar="NAME", help="print one preset as JSON")

    val = sub.add_parser("validate", help="run the invariant suite on the built-in presets")
    val.add_argument("--summary", default="validation.json", help="where to write the JSON summary")
    val.add_argument("--check", action="append", help="run only the named check (repeatable)")

    plt = sub.add_parser("plot", help="render an SVG from an exported CSV/JSON series")
    plt.add_argument("series")
    plt.add_argument("-o", "--output", help="SVG path (default: alongside the series)")
    return p


def _run(args):
    scn = load_scenario(args.scenario)
    formats = None
    if args.format or args.no_plot:
        formats = list(dict.fromkeys(args.format or ["csv"])) + ([] if args.no_plot else ["svg"])
    scn = with_overrides(scn, seed=args.seed, step=args.step, t_end=args.t_end, ensemble_size=args.ensemble_size,
                         convention=args.biham_convention, formats=formats)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1", [("workers", "must be >= 1")])
    report = run_scenario(scn, out_dir=args.out_dir, workers=args.workers)
    print(json.dumps({"scenario": report.scenario, "regime": report.regime, "truncated": report.truncated,
                      "manifest": report.manifest, "wall_time_s": round(report.wall_time, 3)}, indent=2))
    if report.partial:
        log.error("run hit the overflow guard (%g); outputs are truncated", scn.thresholds.overflow_guard)
        return EXIT_BLOWUP
    return EXIT_OK


def _presets(args):
    if args.show:
        print(load_scenario(args.show).to_json())
        return EXIT_OK
    for name, scn in PRESETS.items():
        print(f"{name:12s} {scn.description}")
        for note in scn.notes:
            print(f"{'':12s}   note: {note}")
    return EXIT_OK


def _validate(args):
    from .validate import validate

    ok, results = validate(args.summary, args.check)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.module:13s} {r.name:30s} {r.tolerance}")
        if r.detail:
            print(f"      {r.detail}")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed; summary in {args.summary}")
    return EXIT_OK if ok else EXIT_VALIDATION


def _plot(args):
    src = Path(args.series)
    bundle = read_series(src)
    out = Path(args.output) if args.output else src.with_suffix(".svg")
    emit_plot(bundle, out, src.stem)
    print(out)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    handler = {"run": _run, "presets": _presets, "validate": _validate, "plot": _plot}[args.command]
    try:
        return handler(args)
    except ConfigError as err:
        log.error("%s", err)
        return EXIT_CONFIG
    except BlowUpError as err:
        log.error("%s", err)
        return EXIT_BLOWUP
    except (GhostBohmError, OSError, ValueError) as err:
        log.error("%s", err)
        return EXIT_BLOWUP if isinstance(err, ArithmeticError) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
