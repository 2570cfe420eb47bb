"""Command line entry point: ``idiomspan {run,grid,locate,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import load_corpus
from .eval_report import EvaluationReport, emit_table
from .harness import ExperimentConfig, GridSpec, load_config_file, run_experiment, run_grid, summarize
from .span_locator import DEFAULT_MAX_NORM_DISTANCE, MWENotFound, char_span_to_word_span, locate_mwe

# flag dest -> ExperimentConfig field
_FLAG_FIELDS = {
    "model": "model",
    "layer": "layer",
    "repr_type": "repr_type",
    "setting": "setting",
    "epochs": "epochs",
    "lr": "lr",
    "dropout": "dropout",
    "batch_size": "batch_size",
    "seed": "seed",
    "context_mode": "context_mode",
    "data_dir": "data_dir",
    "out_dir": "out_dir",
    "offline": "offline",
    "registry_dir": "registry_dir",
    "device": "device",
    "frozen": "encoder_trainable",
}


def _add_experiment_flags(p: argparse.ArgumentParser, grid: bool = False) -> None:
    p.add_argument("--config", type=Path, help="YAML / key = value file mirroring the flags")
    if not grid:
        p.add_argument("--model", help="mbert, xlmr, xlmr-large or mock")
        p.add_argument("--layer", type=int)
        p.add_argument("--repr-type", help="xy, xy-diff, xy-prod, xy-prod-diff, self-attentive, max-pooling")
        p.add_argument("--setting", help="zero_shot or one_shot")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--context-mode", choices=["target", "context"])
    p.add_argument("--data-dir")
    p.add_argument("--out-dir")
    p.add_argument("--registry-dir", help="directory holding local copies of the encoders")
    p.add_argument("--device")
    p.add_argument("--offline", action="store_true", default=None, help="never touch the network")
    p.add_argument("--frozen", action="store_true", default=None, help="train the probe only, encoder frozen")


def _config_from_args(args) -> tuple[dict, dict]:
    """(experiment fields, grid-only fields) with flags overriding the config file."""
    values = load_config_file(args.config) if args.config else {}
    grid_keys = {k: values.pop(k) for k in ("models", "repr_types", "settings", "layers", "workers") if k in values}
    for dest, name in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is None:
            continue
        values[name] = (not v) if dest == "frozen" else v
    return values, grid_keys


def cmd_run(args) -> int:
    values, _ = _config_from_args(args)
    result = run_experiment(ExperimentConfig.from_dict(values))
    for name, report in result.reports.items():
        for w in report.warnings:
            print(w, file=sys.stderr)
        print(f"[{name}]")
        print(emit_table([report], "markdown"))
    if result.checkpoint:
        print(f"checkpoint: {result.checkpoint}")
    return 0


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_grid(args) -> int:
    values, grid_values = _config_from_args(args)
    grid = GridSpec()
    if args.models or "models" in grid_values:
        grid.models = args.models or grid_values["models"]
    if args.repr_types or "repr_types" in grid_values:
        grid.repr_types = args.repr_types or grid_values["repr_types"]
    if args.settings or "settings" in grid_values:
        grid.settings = args.settings or grid_values["settings"]
    if args.layers:
        grid.layers = {m: args.layers for m in grid.models}
    elif "layers" in grid_values:
        grid.layers = grid_values["layers"]
    workers = args.workers or grid_values.get("workers", 1)
    base = ExperimentConfig.from_dict(values)
    result = run_grid(grid, base, workers=workers)
    for setting, text in result.summaries.items():
        print(f"## {setting}\n")
        print(text)
    return 1 if result.failures and not result.reports else 0


def cmd_locate(args) -> int:
    records = load_corpus(args.corpus)
    print("\t".join(["ID", "MWE", "Match", "Start", "End", "Distance", "Normalized", "FirstWord", "LastWord"]))
    failures = 0
    for r in records:
        try:
            span = locate_mwe(r.mwe, r.target, args.max_norm_distance)
        except MWENotFound as exc:
            failures += 1
            best = exc.best
            detail = "NOTFOUND" if best is None else f"NOTFOUND best={best.text(r.target)!r} d={best.distance}"
            print(f"{r.id}\t{r.mwe}\t{detail}")
            continue
        ws = char_span_to_word_span(span, r.target)
        print(
            f"{r.id}\t{r.mwe}\t{span.text(r.target)}\t{span.start}\t{span.end}\t{span.distance}\t"
            f"{span.normalized_distance:.3f}\t{ws.first_word}\t{ws.last_word}"
        )
    print(f"# located {len(records) - failures}/{len(records)}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    paths = []
    for p in args.reports:
        p = Path(p)
        paths += sorted(p.rglob("report_*.json")) if p.is_dir() else [p]
    reports = [EvaluationReport.from_json(p.read_text(encoding="utf-8")) for p in paths]
    if args.split:
        reports = [r for r in reports if r.split == args.split]
    if args.highlight:
        print(summarize(reports, format=args.format), end="")
    else:
        print(emit_table(reports, args.format), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idiomspan", description="Span-based idiomaticity detection experiments")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train and evaluate one configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="run a model x layer x representation grid")
    _add_experiment_flags(p, grid=True)
    p.add_argument("--models", type=_csv_list)
    p.add_argument("--repr-types", type=_csv_list)
    p.add_argument("--settings", type=_csv_list)
    p.add_argument("--layers", type=lambda s: [int(x) for x in _csv_list(s)], help="same layers for every model")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("locate", help="print located MWE spans for a corpus file")
    p.add_argument("corpus", type=Path)
    p.add_argument("--max-norm-distance", type=float, default=DEFAULT_MAX_NORM_DISTANCE)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("report", help="re-emit result tables from report JSON files")
    p.add_argument("reports", nargs="+", help="report JSON files or run directories")
    p.add_argument("--format", choices=["markdown", "tsv"], default="markdown")
    p.add_argument("--split", help="only reports of this split (dev/test)")
    p.add_argument("--highlight", action="store_true", help="mark per-model and global maxima")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
