"""Subtask-A corpus records: loading, saving and zero-/one-shot splits."""

from __future__ import annotations

import csv
import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)


class Language(str, enum.Enum):
    EN = "EN"
    PT = "PT"
    GL = "GL"


class Label(enum.IntEnum):
    IDIOMATIC = 0
    NON_IDIOMATIC = 1


class Setting(str, enum.Enum):
    ZERO_SHOT = "zero_shot"
    ONE_SHOT = "one_shot"

    @classmethod
    def parse(cls, value) -> "Setting":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        key = {"zeroshot": "zero_shot", "oneshot": "one_shot"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown setting {value!r}") from None


class Partition(str, enum.Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class SchemaError(ValueError):
    """A corpus file is missing a required column."""


class RecordValidationError(ValueError):
    """A corpus row carries an invalid value."""


@dataclass(frozen=True)
class ExampleRecord:
    id: str
    language: Language
    mwe: str
    target: str
    label: Optional[Label] = None
    previous: str = ""
    next: str = ""
    setting_tag: Setting = Setting.ZERO_SHOT
    partition: Partition = Partition.TRAIN

    def __post_init__(self):
        if not self.target:
            raise RecordValidationError(f"row {self.id}: empty Target")
        if not self.mwe:
            raise RecordValidationError(f"row {self.id}: empty MWE")
        if not isinstance(self.language, Language):
            object.__setattr__(self, "language", _parse_language(self.language, self.id))
        if self.label is not None and not isinstance(self.label, Label):
            object.__setattr__(self, "label", _parse_label(self.label, self.id))

    @property
    def labeled(self) -> bool:
        return self.label is not None


def _parse_language(value, row_id) -> Language:
    try:
        return Language(str(value).strip().upper())
    except ValueError:
        raise RecordValidationError(f"row {row_id}: unknown language {value!r}") from None


def _parse_label(value, row_id) -> Optional[Label]:
    if value is None:
        return None
    text = str(value).strip()
    if text == "":
        return None
    if text in ("0", "1"):
        return Label(int(text))
    raise RecordValidationError(f"row {row_id}: label {value!r} not in {{0, 1, empty}}")


# field name -> accepted header names, first one is used when writing
DEFAULT_COLUMNS: dict[str, tuple[str, ...]] = {
    "id": ("ID", "DataID"),
    "language": ("Language",),
    "mwe": ("MWE",),
    "setting": ("Setting",),
    "previous": ("Previous",),
    "target": ("Target",),
    "next": ("Next",),
    "label": ("Label",),
}
REQUIRED_FIELDS = ("id", "language", "mwe", "target")

_DELIMITERS = {"csv": ",", "tsv": "\t"}


def _format_of(path: Path, fmt: Optional[str]) -> str:
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    if fmt not in _DELIMITERS:
        raise ValueError(f"unsupported corpus format {fmt!r}")
    return fmt


def _resolve_columns(header: Sequence[str], column_map: Optional[Mapping[str, str]]):
    columns = {}
    for name, aliases in DEFAULT_COLUMNS.items():
        if column_map and name in column_map:
            aliases = (column_map[name],)
        found = next((a for a in aliases if a in header), None)
        if found is None and name in REQUIRED_FIELDS:
            raise SchemaError(f"missing column {aliases[0]!r} (have {list(header)})")
        columns[name] = found
    return columns


def load_corpus(
    path,
    format: Optional[str] = None,
    *,
    partition: Partition | str = Partition.TRAIN,
    default_setting: Setting | str = Setting.ZERO_SHOT,
    column_map: Optional[Mapping[str, str]] = None,
) -> list[ExampleRecord]:
    """Read a Subtask-A CSV/TSV file into records, preserving row order.

    ``column_map`` maps field names (``id``, ``language``, ``mwe``, ``setting``,
    ``previous``, ``target``, ``next``, ``label``) to header names when the file
    does not use the shared-task headers.
    """
    path = Path(path)
    fmt = _format_of(path, format)
    partition = Partition(partition)
    default_setting = Setting.parse(default_setting)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=_DELIMITERS[fmt])
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        cols = _resolve_columns(header, column_map)
        index = {name: header.index(col) for name, col in cols.items() if col is not None}
        records = []
        for row in reader:
            if not any(cell.strip() for cell in row):
                continue

            def get(name):
                i = index.get(name)
                return row[i].strip() if i is not None and i < len(row) else ""

            row_id = get("id")
            setting = Setting.parse(get("setting")) if get("setting") else default_setting
            records.append(
                ExampleRecord(
                    id=row_id,
                    language=_parse_language(get("language"), row_id),
                    mwe=get("mwe"),
                    target=get("target"),
                    label=_parse_label(get("label"), row_id),
                    previous=get("previous"),
                    next=get("next"),
                    setting_tag=setting,
                    partition=partition,
                )
            )
    return records


_SETTING_TEXT = {Setting.ZERO_SHOT: "zero_shot", Setting.ONE_SHOT: "one_shot"}


def save_corpus(records: Iterable[ExampleRecord], path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = _format_of(path, format)
    header = [aliases[0] for aliases in DEFAULT_COLUMNS.values()]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=_DELIMITERS[fmt], lineterminator="\n")
        writer.writerow(header)
        for r in records:
            row = [
                r.id,
                r.language.value,
                r.mwe,
                _SETTING_TEXT[r.setting_tag],
                r.previous,
                r.target,
                r.next,
                "" if r.label is None else str(int(r.label)),
            ]
            if fmt == "tsv" and any("\t" in cell or "\n" in cell for cell in row):
                raise RecordValidationError(f"row {r.id}: TSV cells may not contain tabs or newlines")
            writer.writerow(row)


@dataclass
class CorpusSplit:
    train: list[ExampleRecord]
    dev: list[ExampleRecord]
    test: list[ExampleRecord]
    setting: Setting
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.train) + len(self.dev) + len(self.test)


def mwe_key(mwe: str) -> str:
    return mwe.casefold()


def build_split(records: Sequence[ExampleRecord], setting: Setting | str) -> CorpusSplit:
    """Route records to train/dev/test by partition and check the setting's invariant.

    Zero-shot training only accepts zero-shot tagged rows; one-shot training takes
    both. Invariant violations are returned as warnings on the split.
    """
    setting = Setting.parse(setting)
    parts: dict[Partition, list[ExampleRecord]] = {p: [] for p in Partition}
    for r in records:
        if (
            r.partition is Partition.TRAIN
            and setting is Setting.ZERO_SHOT
            and r.setting_tag is Setting.ONE_SHOT
        ):
            raise ValueError(f"row {r.id}: one-shot tagged training row in a zero-shot split")
        parts[r.partition].append(r)
    split = CorpusSplit(parts[Partition.TRAIN], parts[Partition.DEV], parts[Partition.TEST], setting)

    unlabeled = [r.id for r in split.train if not r.labeled]
    if unlabeled:
        logger.info("%d unlabeled training rows will be ignored for training", len(unlabeled))

    held_out = split.dev + split.test
    if setting is Setting.ZERO_SHOT:
        train_mwes = {mwe_key(r.mwe) for r in split.train}
        overlap = sorted({r.mwe for r in held_out if mwe_key(r.mwe) in train_mwes}, key=mwe_key)
        for mwe in overlap:
            split.warnings.append(f"zero-shot MWE overlap between train and dev/test: {mwe!r}")
    else:
        seen = defaultdict(set)
        for r in split.train:
            if r.labeled:
                seen[mwe_key(r.mwe)].add(r.label)
        missing = sorted(
            {r.mwe for r in held_out if len(seen[mwe_key(r.mwe)]) < 2}, key=mwe_key
        )
        for mwe in missing:
            got = sorted(int(x) for x in seen[mwe_key(mwe)])
            split.warnings.append(f"one-shot MWE {mwe!r} lacks both labels in train (has {got})")
    for w in split.warnings:
        logger.warning(w)
    return split
