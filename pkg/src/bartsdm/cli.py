"""Command-line entry points.

Verbs: ``validate`` a config, ``run`` the full analysis, ``predict``
rasters from a saved model artifact, and ``serve`` the HTTP job API.
Exit codes: 0 ok, 1 validation errors, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .bart import load_model
from .errors import BartSdmError
from .export import export_results
from .grids import RasterStack, load_ascii_grid
from .pipeline import load_config, run_analysis, validate_inputs
from .projection import SUMMARY_NAMES, predict_stack


def _print_table(table, quiet=False):
    if quiet:
        return
    for row in table.rows:
        print(f"[{row.status:7s}] {row.item} :: {row.check}"
              + (f" :: {row.message}" if row.message else ""))


def _apply_overrides(config, args):
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "output", None) is not None:
        config.output_dir = args.output
    return config


def cmd_validate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    table = validate_inputs(config)
    _print_table(table, args.quiet)
    return 1 if table.has_errors else 0


def cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    table = validate_inputs(config)
    _print_table(table, args.quiet)
    if table.has_errors:
        return 1

    def progress(species, stage, fraction):
        if not args.quiet:
            print(f"[{fraction:6.1%}] {species} :: {stage}")

    bundle = run_analysis(config, progress=progress)
    out_dir = config.resolve(config.output_dir)
    export_results(bundle, out_dir)
    if not args.quiet:
        print(f"results written to {out_dir}")
        for name, res in bundle.species.items():
            status = "ok" if res.ok else f"FAILED ({res.error})"
            print(f"  {name}: {status}")
    return 2 if bundle.failed_species else 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    stack_dir = Path(args.stack_dir)
    layers = {p.stem: load_ascii_grid(p) for p in sorted(stack_dir.glob("*.asc"))}
    if not layers:
        print(f"no .asc layers found in {stack_dir}", file=sys.stderr)
        return 2
    stack = RasterStack(layers)
    cutoff = args.cutoff if args.cutoff is not None else (model.cutoff or 0.5)
    prediction = predict_stack(model, stack, cutoff)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    prefix = Path(args.model).stem
    from .grids import write_ascii_grid

    for summary in SUMMARY_NAMES:
        write_ascii_grid(prediction.layer(summary), out / f"{prefix}_{summary}.asc")
    if not args.quiet:
        print(f"wrote {len(SUMMARY_NAMES)} rasters to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    workspace = Path(doc.get("workspace", "service-workspace"))
    workers = args.workers if args.workers is not None else int(doc.get("workers", 1))
    app = create_app(workspace=workspace, workers=workers, frontend_dir=doc.get("frontend"))
    uvicorn.run(app, host=doc.get("host", "127.0.0.1"), port=int(doc.get("port", 8000)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bartsdm",
        description="Species distribution modeling with Bayesian additive regression trees",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and its inputs")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the full analysis and export results")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", help="predict rasters from a saved model")
    p.add_argument("model")
    p.add_argument("stack_dir")
    p.add_argument("--output")
    p.add_argument("--cutoff", type=float)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="start the HTTP job service")
    p.add_argument("config", nargs="?")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BartSdmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
