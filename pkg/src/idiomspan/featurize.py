"""Records to layer-k span matrices: locate, window, encode, slice."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .alignment import LayeredWordVectors
from .corpus import ExampleRecord
from .encoder import EncoderSpec, fit_window, make_encoder, select_layer
from .span_locator import (
    DEFAULT_MAX_NORM_DISTANCE,
    CharSpan,
    MWENotFound,
    WordSpan,
    char_span_to_word_span,
    locate_mwe,
    whitespace_words,
)
from .validation import check_records

logger = logging.getLogger(__name__)


class ContextMode(str, enum.Enum):
    TARGET_ONLY = "target"
    WITH_CONTEXT = "context"

    @classmethod
    def parse(cls, value) -> "ContextMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        key = {"target-only": "target", "with-context": "context"}.get(key, key)
        return cls(key)


@dataclass(frozen=True)
class PreparedRecord:
    record_id: str
    words: tuple[str, ...]
    span: WordSpan
    char_span: CharSpan


def prepare_record(
    record: ExampleRecord,
    context_mode: ContextMode = ContextMode.TARGET_ONLY,
    max_norm_distance: float = DEFAULT_MAX_NORM_DISTANCE,
) -> PreparedRecord:
    """Encoder words and the MWE word span; raises :class:`MWENotFound`."""
    char_span = locate_mwe(record.mwe, record.target, max_norm_distance)
    span = char_span_to_word_span(char_span, record.target)
    words = whitespace_words(record.target)
    if ContextMode.parse(context_mode) is ContextMode.WITH_CONTEXT:
        before = whitespace_words(record.previous)
        words = before + words + whitespace_words(record.next)
        span = span.shift(len(before))
    return PreparedRecord(record.id, tuple(words), span, char_span)


def window_to_capacity(prepared: PreparedRecord, encoder) -> PreparedRecord:
    """Trim words outside the span until the piece count fits the encoder."""
    pieces = encoder.pieces(prepared.words)
    if len(pieces) <= encoder.capacity:
        return prepared
    counts = np.bincount([w for _, w in pieces], minlength=len(prepared.words)).tolist()
    try:
        lo, hi = fit_window(counts, prepared.span.first_word, prepared.span.last_word, encoder.capacity)
    except ValueError as exc:
        raise type(exc)(f"row {prepared.record_id}: {exc}") from None
    logger.warning(
        "row %s: %d pieces exceed capacity %d, keeping words %d..%d",
        prepared.record_id, len(pieces), encoder.capacity, lo, hi - 1,
    )
    return PreparedRecord(prepared.record_id, prepared.words[lo:hi], prepared.span.shift(-lo), prepared.char_span)


def prepare_all(records, context_mode, max_norm_distance, encoder=None) -> list[Optional[PreparedRecord]]:
    """Prepared records, ``None`` where the MWE could not be located."""
    out = []
    for r in records:
        try:
            p = prepare_record(r, context_mode, max_norm_distance)
        except MWENotFound as exc:
            logger.warning("row %s: %s", r.id, exc)
            out.append(None)
            continue
        out.append(p if encoder is None else window_to_capacity(p, encoder))
    return out


class SpanFeaturizer(TransformerMixin, BaseEstimator):
    """Map records to ``(m, d)`` layer-``layer`` span matrices (object array).

    Rows whose MWE cannot be located come out as ``None``. Encodings of all
    layers are cached per word sequence, so one featurizer can serve several
    layers on a frozen encoder.
    """

    def __init__(
        self,
        encoder_spec: Optional[EncoderSpec] = None,
        layer=12,
        context_mode="target",
        max_norm_distance=DEFAULT_MAX_NORM_DISTANCE,
        registry_dir=None,
        offline=False,
        device="cpu",
    ):
        self.encoder_spec = encoder_spec
        self.layer = layer
        self.context_mode = context_mode
        self.max_norm_distance = max_norm_distance
        self.registry_dir = registry_dir
        self.offline = offline
        self.device = device

    def fit(self, X=None, y=None):
        spec = self.encoder_spec or EncoderSpec.for_model("mock")
        if not 0 <= self.layer <= spec.num_layers:
            raise ValueError(f"layer {self.layer} out of range for {spec.name.value} (0..{spec.num_layers})")
        if getattr(self, "encoder_", None) is None or self.encoder_.spec != spec.with_trainable(False):
            self.encoder_ = make_encoder(spec.with_trainable(False), self.registry_dir, self.offline, self.device)
            self._cache: dict[tuple[str, ...], LayeredWordVectors] = {}
        self.context_mode_ = ContextMode.parse(self.context_mode)
        return self

    def encode(self, words: Sequence[str]) -> LayeredWordVectors:
        key = tuple(words)
        if key not in self._cache:
            self._cache[key] = self.encoder_.encode(words)
        return self._cache[key]

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        records = check_records(X)
        prepared = prepare_all(records, self.context_mode_, self.max_norm_distance, self.encoder_)
        out = np.empty(len(records), dtype=object)
        for i, p in enumerate(prepared):
            if p is None:
                continue
            layer_vectors = select_layer(self.encode(p.words), self.layer)
            out[i] = layer_vectors[p.span.first_word : p.span.last_word + 1]
        return out
