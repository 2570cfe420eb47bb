"""Input checks shared by the estimators."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .corpus import ExampleRecord


def check_spans(X, width: Optional[int] = None) -> list[Optional[np.ndarray]]:
    """Normalize a batch of ``(m, d)`` span matrices; ``None`` marks an unlocated row."""
    if isinstance(X, np.ndarray) and X.dtype != object:
        if X.ndim == 2:
            X = X[:, None, :]
        if X.ndim != 3:
            raise ValueError(f"expected a batch of (m, d) spans, got array of shape {X.shape}")
    out = []
    for i, span in enumerate(X):
        if span is None:
            out.append(None)
            continue
        span = np.asarray(span, dtype=float)
        if span.ndim == 1:
            span = span[None, :]
        if span.ndim != 2 or span.shape[0] == 0:
            raise ValueError(f"row {i}: span must be a non-empty (m, d) array, got shape {span.shape}")
        if width is not None and span.shape[1] != width:
            raise ValueError(f"row {i}: span width {span.shape[1]} != expected {width}")
        if not np.all(np.isfinite(span)):
            raise ValueError(f"row {i}: span contains non-finite values")
        out.append(span)
    if not out:
        raise ValueError("empty batch")
    widths = {s.shape[1] for s in out if s is not None}
    if len(widths) > 1:
        raise ValueError(f"inconsistent span widths {sorted(widths)}")
    return out


def check_binary_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(int)


def check_records(X) -> list[ExampleRecord]:
    records = list(X)
    for i, r in enumerate(records):
        if not isinstance(r, ExampleRecord):
            raise TypeError(f"item {i} is {type(r).__name__}, expected ExampleRecord")
    if not records:
        raise ValueError("no records")
    return records


def labels_of(records: Sequence[ExampleRecord]) -> np.ndarray:
    missing = [r.id for r in records if r.label is None]
    if missing:
        raise ValueError(f"{len(missing)} records have no gold label (first: {missing[0]!r})")
    return np.array([int(r.label) for r in records])
