"""Fixed-width span representations built from the word vectors of an MWE span."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ReprType(str, enum.Enum):
    XY = "xy"
    XY_DIFF = "xy-diff"
    XY_PROD = "xy-prod"
    XY_PROD_DIFF = "xy-prod-diff"
    SELF_ATTENTIVE = "self-attentive"
    MAX_POOLING = "max-pooling"

    @classmethod
    def parse(cls, value) -> "ReprType":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        key = _TABLE_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown representation type {value!r}; choose from {[r.value for r in cls]}") from None

    def width(self, d: int) -> int:
        return _WIDTH_FACTOR[self] * d

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @property
    def uses_scorer(self) -> bool:
        return self is ReprType.SELF_ATTENTIVE


_WIDTH_FACTOR = {
    ReprType.XY: 2,
    ReprType.XY_DIFF: 3,
    ReprType.XY_PROD: 3,
    ReprType.XY_PROD_DIFF: 4,
    ReprType.SELF_ATTENTIVE: 1,
    ReprType.MAX_POOLING: 1,
}
_DISPLAY = {
    ReprType.XY: "x,y",
    ReprType.XY_DIFF: "x,y,x-y",
    ReprType.XY_PROD: "x,y,x*y",
    ReprType.XY_PROD_DIFF: "x,y,x*y,x-y",
    ReprType.SELF_ATTENTIVE: "SelfAttentive",
    ReprType.MAX_POOLING: "MaxPooling",
}
_TABLE_ALIASES = {v.lower(): k.value for k, v in _DISPLAY.items()}
_TABLE_ALIASES.update({"selfattentive": "self-attentive", "maxpooling": "max-pooling"})


@dataclass
class AttentiveScorer:
    weights: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "AttentiveScorer":
        return cls(np.zeros(d))


@dataclass(frozen=True)
class SpanRepresentation:
    vector: np.ndarray
    repr_type: ReprType
    layer: Optional[int] = None


def attention_weights(span: np.ndarray, scorer: AttentiveScorer) -> np.ndarray:
    """Softmax over the span words of ``weights . h_j``."""
    scores = span @ scorer.weights
    scores = scores - scores.max()
    e = np.exp(scores)
    return e / e.sum()


def combine(span: np.ndarray, repr_type: ReprType, scorer: Optional[AttentiveScorer] = None) -> np.ndarray:
    """The representation vector of one ``(m, d)`` span."""
    span = np.asarray(span, dtype=float)
    if span.ndim != 2 or span.shape[0] == 0:
        raise ValueError(f"span must be a non-empty (m, d) array, got shape {span.shape}")
    if repr_type.uses_scorer != (scorer is not None):
        raise ValueError(f"{repr_type.value} {'needs' if repr_type.uses_scorer else 'takes no'} scorer")
    x, y = span[0], span[-1]
    if repr_type is ReprType.XY:
        return np.concatenate([x, y])
    if repr_type is ReprType.XY_DIFF:
        return np.concatenate([x, y, x - y])
    if repr_type is ReprType.XY_PROD:
        return np.concatenate([x, y, x * y])
    if repr_type is ReprType.XY_PROD_DIFF:
        return np.concatenate([x, y, x * y, x - y])
    if repr_type is ReprType.MAX_POOLING:
        return span.max(axis=0)
    if scorer.weights.shape != (span.shape[1],):
        raise ValueError(f"scorer width {scorer.weights.shape} does not match span width {span.shape[1]}")
    return attention_weights(span, scorer) @ span


def represent(
    span_vectors,
    repr_type: ReprType | str,
    scorer: Optional[AttentiveScorer] = None,
    layer: Optional[int] = None,
) -> SpanRepresentation:
    repr_type = ReprType.parse(repr_type)
    return SpanRepresentation(combine(span_vectors, repr_type, scorer), repr_type, layer)
