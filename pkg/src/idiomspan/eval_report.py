"""Macro-F1 scoring, per-language reports and result tables."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import ExampleRecord, Language

LANGUAGES = (Language.EN, Language.PT, Language.GL)
TABLE_COLUMNS = ("Model", "Type", "Layer", "EN", "PT", "GL", "Avg")


def confusion(gold, pred) -> np.ndarray:
    """2x2 counts, rows gold, columns predicted."""
    gold = np.asarray(gold, dtype=int)
    pred = np.asarray(pred, dtype=int)
    if gold.shape != pred.shape:
        raise ValueError(f"gold has {gold.size} labels, pred has {pred.size}")
    if gold.size == 0:
        raise ValueError("cannot score an empty label list")
    if not (np.isin(gold, (0, 1)).all() and np.isin(pred, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return np.bincount(2 * gold + pred, minlength=4).reshape(2, 2)


def macro_f1_from_confusion(cm: np.ndarray) -> float:
    scores = []
    for c in (0, 1):
        tp = cm[c, c]
        fp = cm[1 - c, c]
        fn = cm[c, 1 - c]
        # 2PR/(P+R) == 2tp/(2tp+fp+fn), and 0 when the class is never gold nor predicted
        denom = 2 * tp + fp + fn
        scores.append(0.0 if tp == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


def macro_f1(gold, pred) -> float:
    """Unweighted mean of the class-0 and class-1 F1 scores."""
    return macro_f1_from_confusion(confusion(gold, pred))


@dataclass
class EvaluationReport:
    per_language: dict[str, float]
    pooled: float
    counts: dict[str, int]
    config: dict = field(default_factory=dict)
    split: str = "dev"
    misclassified: list[str] = field(default_factory=list)
    unlocated: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    @property
    def model(self) -> str:
        return self.config.get("model_display", self.config.get("model", "-"))

    @property
    def repr_display(self) -> str:
        return self.config.get("repr_display", self.config.get("repr_type", "-"))

    @property
    def layer(self):
        return self.config.get("layer", "-")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))


def build_report(
    records: Sequence[ExampleRecord],
    preds,
    config: Optional[dict] = None,
    split: str = "dev",
    unlocated: Iterable[str] = (),
) -> EvaluationReport:
    preds = np.asarray(preds, dtype=int)
    if len(records) != len(preds):
        raise ValueError(f"{len(records)} records but {len(preds)} predictions")
    gold = []
    for r in records:
        if r.label is None:
            raise ValueError(f"row {r.id} has no gold label")
        if not isinstance(r.language, Language):
            raise ValueError(f"row {r.id}: unknown language {r.language!r}")
        gold.append(int(r.label))
    gold = np.asarray(gold)
    langs = np.array([r.language.value for r in records])
    per_language, counts = {}, {}
    for lang in LANGUAGES:
        sel = langs == lang.value
        if sel.any():
            per_language[lang.value] = macro_f1(gold[sel], preds[sel])
            counts[lang.value] = int(sel.sum())
    return EvaluationReport(
        per_language=per_language,
        pooled=macro_f1(gold, preds),
        counts=counts,
        config=dict(config or {}),
        split=split,
        misclassified=[r.id for r, g, p in zip(records, gold, preds) if g != p],
        unlocated=list(unlocated),
    )


# ----------------------------------------------------------------------------- tables

MODEL_ORDER = ("mBERT", "XLM-R", "XLM-R-L", "MOCK")
TYPE_ORDER = ("x,y", "x,y,x-y", "x,y,x*y", "x,y,x*y,x-y", "SelfAttentive", "MaxPooling")


def _order(value, ordering):
    return (ordering.index(value), "") if value in ordering else (len(ordering), str(value))


def row_key(report: EvaluationReport):
    layer = report.layer
    return (
        _order(report.model, MODEL_ORDER),
        layer if isinstance(layer, int) else -1,
        _order(report.repr_display, TYPE_ORDER),
    )


def _cells(report: EvaluationReport) -> list[Optional[float]]:
    return [report.per_language.get(lang.value) for lang in LANGUAGES] + [report.pooled]


def highlight_marks(reports: Sequence[EvaluationReport]) -> dict[tuple[int, int], str]:
    """Map (row, score column) to ``"bold"`` for the global column maximum and
    ``"underline"`` for the maximum within the row's model block."""
    marks: dict[tuple[int, int], str] = {}
    if not reports:
        return marks
    values = [_cells(r) for r in reports]
    for col in range(len(LANGUAGES) + 1):
        column = [(i, v[col]) for i, v in enumerate(values) if v[col] is not None]
        if not column:
            continue
        for model in {r.model for r in reports}:
            part = [(i, v) for i, v in column if reports[i].model == model]
            if part:
                best = max(v for _, v in part)
                marks.update({(i, col): "underline" for i, v in part if v == best})
        best = max(v for _, v in column)
        marks.update({(i, col): "bold" for i, v in column if v == best})
    return marks


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def emit_table(reports: Sequence[EvaluationReport], format: str = "markdown", highlight: bool = False) -> str:
    """One row per (model, type, layer), sorted by model, layer, type; scores x100."""
    fmt = format.lower()
    if fmt not in ("markdown", "tsv"):
        raise ValueError(f"unknown table format {format!r}")
    reports = sorted(reports, key=row_key)
    marks = highlight_marks(reports) if highlight else {}
    rows = []
    for i, r in enumerate(reports):
        cells = []
        for col, value in enumerate(_cells(r)):
            text = _fmt(value)
            mark = marks.get((i, col))
            if mark == "bold":
                text = f"**{text}**" if fmt == "markdown" else f"{text}*"
            elif mark == "underline":
                text = f"<u>{text}</u>" if fmt == "markdown" else f"{text}_"
            cells.append(text)
        rows.append([str(r.model), str(r.repr_display), str(r.layer)] + cells)
    if fmt == "tsv":
        return "\n".join("\t".join(row) for row in [list(TABLE_COLUMNS)] + rows) + "\n"
    lines = ["| " + " | ".join(TABLE_COLUMNS) + " |", "|" + "---|" * len(TABLE_COLUMNS)]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


_MARKUP = re.compile(r"\*\*|<u>|</u>|[*_]$")


def parse_table(text: str) -> list[dict]:
    """Rows of an emitted table as dicts; scores come back as fractions."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    if lines[0].startswith("|"):
        split = [[c.strip() for c in ln.strip().strip("|").split("|")] for ln in lines if not ln.startswith("|---")]
    else:
        split = [ln.split("\t") for ln in lines]
    header, body = split[0], split[1:]
    out = []
    for row in body:
        item = dict(zip(header, row))
        for lang in [l.value for l in LANGUAGES] + ["Avg"]:
            raw = _MARKUP.sub("", item[lang])
            item[lang] = None if raw == "-" else float(raw) / 100.0
        item["Layer"] = int(item["Layer"]) if item["Layer"].lstrip("-").isdigit() else item["Layer"]
        out.append(item)
    return out


# Reference rows (macro-F1 x100, languages EN/PT/GL then pooled Avg)
BASELINE = {
    "zero_shot": {"EN": 70.70, "PT": 68.03, "GL": 50.65, "Avg": 65.40},
    "one_shot": {"EN": 88.62, "PT": 86.37, "GL": 81.62, "Avg": 86.46},
}
PUBLISHED = {
    ("zero_shot", "mbert", 12, "xy-diff"): {"EN": 76.24, "PT": 72.27, "GL": 64.27, "Avg": 72.85},
    ("zero_shot", "xlmr", 8, "xy"): {"EN": 77.62, "PT": 71.61, "GL": 64.88, "Avg": 72.68},
    ("zero_shot", "xlmr-large", 24, "xy-diff"): {"EN": 75.22, "PT": 75.80, "GL": 69.01, "Avg": 74.66},
    ("one_shot", "mbert", 8, "max-pooling"): {"EN": 86.59, "PT": 85.82, "GL": 85.77, "Avg": 86.63},
    ("one_shot", "xlmr", 8, "max-pooling"): {"EN": 89.49, "PT": 83.71, "GL": 82.19, "Avg": 86.17},
    ("one_shot", "xlmr-large", 24, "xy-prod-diff"): {"EN": 91.26, "PT": 86.96, "GL": 89.06, "Avg": 89.79},
}


def reference_report(values: dict, model="mBERT", repr_display="-", layer=12) -> EvaluationReport:
    """A report carrying published percentages, for baseline rows in tables."""
    return EvaluationReport(
        per_language={k: v / 100.0 for k, v in values.items() if k != "Avg"},
        pooled=values["Avg"] / 100.0,
        counts={},
        config={"model_display": model, "repr_display": repr_display, "layer": layer, "reference": True},
        split="reference",
    )
