"""Single experiments and model x layer x representation grids."""

from __future__ import annotations

import csv
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .checkpoint import save_checkpoint
from .classifier import TrainConfig
from .corpus import Partition, Setting, build_split, load_corpus
from .encoder import PROBE_LAYERS, EncoderSpec, ModelName
from .eval_report import EvaluationReport, build_report, emit_table
from .featurize import ContextMode, prepare_all
from .pipeline import build_estimator, predict, train
from .span_locator import DEFAULT_MAX_NORM_DISTANCE
from .span_repr import ReprType

logger = logging.getLogger(__name__)

DATA_FILES = {
    "train_zero_shot": "train_zero_shot.csv",
    "train_one_shot": "train_one_shot.csv",
    "dev": "dev.csv",
    "test": "test.csv",
}


@dataclass
class ExperimentConfig:
    model: str = "mbert"
    layer: int = 12
    repr_type: str = "xy"
    setting: str = "zero_shot"
    context_mode: str = "target"
    epochs: int = 10
    lr: float = 5e-5
    dropout: float = 0.5
    batch_size: int = 32
    seed: int = 42
    encoder_trainable: bool = True
    weight_decay: float = 0.01
    max_norm_distance: float = DEFAULT_MAX_NORM_DISTANCE
    unlocated_ceiling: float = 0.05
    data_dir: str = "data"
    out_dir: str = "runs"
    registry_dir: Optional[str] = None
    offline: bool = False
    device: str = "cpu"
    mock_layers: int = 2
    mock_width: int = 8
    files: dict = field(default_factory=lambda: dict(DATA_FILES))

    def __post_init__(self):
        self.model = ModelName.parse(self.model).value
        self.repr_type = ReprType.parse(self.repr_type).value
        self.setting = Setting.parse(self.setting).value
        self.context_mode = ContextMode.parse(self.context_mode).value
        spec = self.encoder_spec()
        if not 1 <= self.layer <= spec.num_layers:
            raise ValueError(f"layer {self.layer} invalid for {self.model} (1..{spec.num_layers})")

    def encoder_spec(self) -> EncoderSpec:
        if self.model == ModelName.MOCK.value:
            return EncoderSpec.for_model("mock", num_layers=self.mock_layers, hidden_width=self.mock_width, seed=self.seed)
        return EncoderSpec.for_model(self.model, trainable=self.encoder_trainable)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.lr,
            dropout_prob=self.dropout,
            batch_size=self.batch_size,
            seed=self.seed,
            encoder_trainable=self.encoder_trainable,
            weight_decay=self.weight_decay,
        )

    @property
    def name(self) -> str:
        return f"{self.setting}-{self.model}-L{self.layer}-{self.repr_type}"

    def to_dict(self) -> dict:
        return asdict(self)

    def describe(self) -> dict:
        """Report-facing summary (no paths, so reports compare across machines)."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("data_dir", "out_dir", "registry_dir", "device", "files")}
        d["model_display"] = ModelName.parse(self.model).display
        d["repr_display"] = ReprType.parse(self.repr_type).display
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config_file(path) -> dict:
    """Flat key-value mapping from a YAML (or simple ``key = value``) file."""
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text.replace(" = ", ": ")) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a key-value mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def load_split(config: ExperimentConfig):
    data_dir = Path(config.data_dir)
    setting = Setting.parse(config.setting)

    def path_of(key):
        return data_dir / config.files[key]

    train_keys = ["train_zero_shot"] + (["train_one_shot"] if setting is Setting.ONE_SHOT else [])
    records = []
    for key in train_keys:
        p = path_of(key)
        if not p.exists():
            raise FileNotFoundError(f"missing training file {p}")
        default = Setting.ONE_SHOT if key == "train_one_shot" else Setting.ZERO_SHOT
        records += load_corpus(p, partition=Partition.TRAIN, default_setting=default)
    if not path_of("dev").exists():
        raise FileNotFoundError(f"missing dev file {path_of('dev')}")
    records += load_corpus(path_of("dev"), partition=Partition.DEV, default_setting=setting)
    if path_of("test").exists():
        records += load_corpus(path_of("test"), partition=Partition.TEST, default_setting=setting)
    return build_split(records, setting)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: dict[str, EvaluationReport]
    checkpoint: Optional[Path]
    history: list[dict]


def _evaluate(records, estimator, config: ExperimentConfig, split_name: str, extra_warnings=()) -> EvaluationReport:
    preds = predict(records, estimator)
    prepared = prepare_all(records, config.context_mode, config.max_norm_distance)
    unlocated = [r.id for r, p in zip(records, prepared) if p is None]
    report = build_report(records, preds, config.describe(), split=split_name, unlocated=unlocated)
    report.warnings.extend(extra_warnings)
    rate = len(unlocated) / len(records)
    if rate > config.unlocated_ceiling:
        report.warnings.insert(
            0,
            f"WARNING: MWE span not located for {len(unlocated)}/{len(records)} rows ({rate:.1%}), "
            f"above the {config.unlocated_ceiling:.0%} ceiling",
        )
    return report


def write_predictions(path: Path, records, preds) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ID", "Language", "Setting", "Label"])
        for r, p in zip(records, preds):
            writer.writerow([r.id, r.language.value, r.setting_tag.value, int(p)])


def run_experiment(config: ExperimentConfig, save: bool = True) -> ExperimentResult:
    """Train on the setting's training rows, evaluate on dev (and labeled test), persist outputs."""
    split = load_split(config)
    estimator = build_estimator(
        config.encoder_spec(),
        config.layer,
        config.repr_type,
        config.train_config(),
        config.context_mode,
        config.max_norm_distance,
        config.registry_dir,
        config.offline,
        config.device,
    )
    train_prepared = prepare_all(split.train, config.context_mode, config.max_norm_distance)
    excluded = sum(p is None for p in train_prepared)
    estimator, history = train(split, estimator)

    warnings = list(split.warnings)
    if excluded:
        warnings.append(f"{excluded} training rows excluded: MWE span not located")
    reports = {}
    out = Path(config.out_dir) / config.name
    labeled_dev = [r for r in split.dev if r.labeled]
    if labeled_dev:
        reports["dev"] = _evaluate(labeled_dev, estimator, config, "dev", warnings)
        reports["dev"].history = history
    if split.test:
        if all(r.labeled for r in split.test):
            reports["test"] = _evaluate(split.test, estimator, config, "test", warnings)
        elif save:
            out.mkdir(parents=True, exist_ok=True)
            write_predictions(out / "test_predictions.csv", split.test, predict(split.test, estimator))

    checkpoint = None
    if save:
        out.mkdir(parents=True, exist_ok=True)
        checkpoint = save_checkpoint(out / "checkpoint", estimator, config.train_config(), {"experiment": config.describe()})
        for name, report in reports.items():
            (out / f"report_{name}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    for name, report in reports.items():
        logger.info("%s %s: pooled macro-F1 %.4f %s", config.name, name, report.pooled, report.per_language)
    return ExperimentResult(config, reports, checkpoint, history)


# ----------------------------------------------------------------------------- grid


@dataclass
class GridSpec:
    models: Sequence[str] = ("mbert", "xlmr", "xlmr-large")
    repr_types: Sequence[str] = tuple(r.value for r in ReprType)
    settings: Sequence[str] = ("zero_shot",)
    layers: Optional[dict] = None  # model -> layers; defaults to PROBE_LAYERS

    def layers_for(self, model: str, base: ExperimentConfig) -> Sequence[int]:
        if self.layers and model in self.layers:
            return self.layers[model]
        name = ModelName.parse(model)
        if name is ModelName.MOCK:
            return tuple(range(1, base.mock_layers + 1))
        return PROBE_LAYERS[name]

    def expand(self, base: ExperimentConfig) -> list[ExperimentConfig]:
        cells = []
        for setting, model in product(self.settings, self.models):
            for layer, repr_type in product(self.layers_for(model, base), self.repr_types):
                cells.append(replace(base, model=model, layer=layer, repr_type=repr_type, setting=setting))
        return cells


@dataclass
class GridResult:
    reports: list[EvaluationReport]
    failures: list[dict]
    summaries: dict[str, str]


def _run_cell(config: ExperimentConfig) -> dict:
    try:
        result = run_experiment(config)
        report = result.reports.get("dev") or next(iter(result.reports.values()), None)
        if report is None:
            raise RuntimeError("no labeled evaluation set")
        return {"ok": True, "report": report.to_dict()}
    except Exception as exc:  # a failed cell must not abort the grid
        return {
            "ok": False,
            "cell": config.name,
            "setting": config.setting,
            "error": f"{type(exc).__name__}: {exc}",
            "trace": traceback.format_exc(),
        }


def summarize(reports: Sequence[EvaluationReport], failures: Sequence[dict] = (), format: str = "markdown") -> str:
    text = emit_table(reports, format=format, highlight=True)
    if failures and format == "markdown":
        text += "\nFailed cells:\n" + "".join(f"- {f['cell']}: {f['error']}\n" for f in failures)
    return text


def run_grid(grid: GridSpec, base: ExperimentConfig, workers: int = 1) -> GridResult:
    cells = grid.expand(base)
    logger.info("running %d grid cells with %d worker(s)", len(cells), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]
    reports, failures = [], []
    for cell, outcome in zip(cells, outcomes):
        if outcome["ok"]:
            reports.append(EvaluationReport.from_dict(outcome["report"]))
        else:
            logger.error("cell %s failed: %s", cell.name, outcome["error"])
            failures.append({k: outcome[k] for k in ("cell", "setting", "error", "trace")})
    summaries = {}
    out = Path(base.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for setting in dict.fromkeys(c.setting for c in cells):
        subset = [r for r in reports if r.config.get("setting") == setting]
        setting_failures = [f for f in failures if f["setting"] == setting]
        summaries[setting] = summarize(subset, setting_failures)
        (out / f"summary_{setting}.md").write_text(summaries[setting], encoding="utf-8")
        (out / f"summary_{setting}.tsv").write_text(emit_table(subset, "tsv", highlight=True), encoding="utf-8")
    (out / "grid_failures.json").write_text(json.dumps(failures, indent=2), encoding="utf-8")
    return GridResult(reports, failures, summaries)
