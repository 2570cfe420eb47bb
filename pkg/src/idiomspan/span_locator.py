"""Locate an MWE inside its target sentence by character edit distance.

Candidates are substrings that start and end on token boundaries, where tokens
are runs of word characters or single punctuation marks, so trailing
punctuation ("beans.") does not cost anything. Candidate token counts stay
within ``WINDOW`` of the MWE's own token count.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

DEFAULT_MAX_NORM_DISTANCE = 0.5
WINDOW = 2

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_WORD_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class CharSpan:
    start: int
    end: int
    distance: int
    normalized_distance: float

    def text(self, sentence: str) -> str:
        return sentence[self.start : self.end]


@dataclass(frozen=True)
class WordSpan:
    first_word: int
    last_word: int

    def __post_init__(self):
        if not 0 <= self.first_word <= self.last_word:
            raise ValueError(f"invalid word span ({self.first_word}, {self.last_word})")

    @property
    def word_count(self) -> int:
        return self.last_word - self.first_word + 1

    def shift(self, offset: int) -> "WordSpan":
        return WordSpan(self.first_word + offset, self.last_word + offset)


class MWENotFound(LookupError):
    """No candidate is within the normalized distance threshold."""

    def __init__(self, mwe: str, sentence: str, best: Optional[CharSpan], threshold: float):
        self.mwe = mwe
        self.sentence = sentence
        self.best = best
        self.threshold = threshold
        if best is None:
            detail = "no candidates"
        else:
            detail = (
                f"best {best.text(sentence)!r} at [{best.start}, {best.end}) "
                f"distance {best.distance} (normalized {best.normalized_distance:.3f})"
            )
        super().__init__(f"MWE {mwe!r} not found within {threshold}: {detail}")


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert, delete and substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def tokenize(text: str) -> list[tuple[int, int]]:
    """Character extents of the locating tokens in ``text``."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def whitespace_words(text: str) -> list[str]:
    return _WORD_RE.findall(text)


def word_boundaries(text: str) -> list[tuple[int, int]]:
    """Character extents of whitespace-delimited words."""
    return [m.span() for m in _WORD_RE.finditer(text)]


def normalize_mwe(mwe: str) -> str:
    return " ".join(mwe.split()).casefold()


def candidate_lengths(n_mwe_tokens: int, window: int = WINDOW) -> range:
    return range(max(1, n_mwe_tokens - window), n_mwe_tokens + window + 1)


def _sort_key(span: CharSpan):
    return (span.distance, span.start, span.end - span.start)


def best_candidate(mwe: str, sentence: str, window: int = WINDOW) -> Optional[CharSpan]:
    """Minimum-distance candidate span, ties broken leftmost then shortest.

    For each start token one Levenshtein table is filled with the MWE along one
    axis and the sentence from that start along the other; the distance of
    every candidate ending at a later token boundary is read off that table.
    """
    target = normalize_mwe(mwe)
    if not target:
        return None
    tokens = tokenize(sentence)
    lengths = candidate_lengths(len(tokenize(target)), window)
    norm = max(len(target), 1)
    best = None
    for i, (start, _) in enumerate(tokens):
        ends = {}
        for n in lengths:
            if i + n <= len(tokens):
                ends[tokens[i + n - 1][1]] = n
        if not ends:
            continue
        last_end = max(ends)
        # column over the MWE characters, advanced one (case-folded) sentence char at a time
        column = list(range(len(target) + 1))
        consumed = 0
        for pos in range(start, last_end):
            for ch in sentence[pos].casefold():
                consumed += 1
                nxt = [consumed]
                for j, ct in enumerate(target, 1):
                    nxt.append(min(column[j] + 1, nxt[j - 1] + 1, column[j - 1] + (ch != ct)))
                column = nxt
            if pos + 1 in ends:
                d = column[-1]
                cand = CharSpan(start, pos + 1, d, d / norm)
                if best is None or _sort_key(cand) < _sort_key(best):
                    best = cand
    return best


def locate_mwe(
    mwe: str,
    sentence: str,
    max_norm_distance: float = DEFAULT_MAX_NORM_DISTANCE,
    window: int = WINDOW,
) -> CharSpan:
    if not sentence or not sentence.strip():
        raise ValueError("sentence is empty")
    if not mwe or not mwe.strip():
        raise ValueError("mwe is empty")
    if not 0.0 <= max_norm_distance <= 1.0:
        raise ValueError(f"max_norm_distance must lie in [0, 1], got {max_norm_distance}")
    best = best_candidate(mwe, sentence, window)
    if best is None or best.normalized_distance > max_norm_distance:
        raise MWENotFound(mwe, sentence, best, max_norm_distance)
    return best


def char_span_to_word_span(
    span: CharSpan, sentence: str, boundaries: Optional[Sequence[tuple[int, int]]] = None
) -> WordSpan:
    """Smallest interval of words whose extent contains ``span``."""
    if boundaries is None:
        boundaries = word_boundaries(sentence)
    if not 0 <= span.start < span.end <= len(sentence):
        raise ValueError(f"span [{span.start}, {span.end}) outside sentence of length {len(sentence)}")
    touched = [i for i, (s, e) in enumerate(boundaries) if s < span.end and e > span.start]
    assert touched, f"span [{span.start}, {span.end}) crosses no word"
    return WordSpan(touched[0], touched[-1])
