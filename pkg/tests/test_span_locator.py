import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idiomspan.span_locator import (
    CharSpan,
    MWENotFound,
    WordSpan,
    char_span_to_word_span,
    edit_distance,
    locate_mwe,
    word_boundaries,
)
from oracles import brute_force_locate, levenshtein_table


def test_oracle_table_on_textbook_pair():
    assert levenshtein_table("kitten", "sitting") == 3
    assert levenshtein_table("flaw", "lawn") == 2


@pytest.mark.parametrize(
    "a, b, expected",
    [("", "abc", 3), ("same", "same", 0), ("kitten", "sitting", levenshtein_table("kitten", "sitting"))],
)
def test_edit_distance_examples(a, b, expected):
    assert edit_distance(a, b) == expected


@settings(max_examples=300)
@given(st.text(max_size=12), st.text(max_size=12))
def test_edit_distance_matches_table(a, b):
    assert edit_distance(a, b) == levenshtein_table(a, b)


def test_exact_substring():
    s = "Don't spill the beans now."
    span = locate_mwe("spill the beans", s)
    assert (span.start, span.end, span.distance) == (6, 21, 0)
    assert span.text(s) == "spill the beans"


def test_inflected_matches_oracle():
    s = "He spilled the beans."
    span = locate_mwe("spill the beans", s)
    d, start, end = brute_force_locate("spill the beans", s)
    assert (span.distance, span.start, span.end) == (d, start, end)
    assert span.text(s) == "spilled the beans"


def test_absent_is_not_found_with_best_candidate():
    with pytest.raises(MWENotFound) as info:
        locate_mwe("spill the beans", "Completely unrelated text.", 0.4)
    assert info.value.best is not None
    assert info.value.best.normalized_distance > 0.4


def test_case_folded_leftmost():
    s = "Big Fish and big fish."
    span = locate_mwe("big fish", s)
    assert (span.start, span.distance) == (0, 0)


def test_diacritics_are_not_stripped():
    span = locate_mwe("pão duro", "Ele é um pao duro.")
    assert span.distance == 1


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        locate_mwe("", "text")
    with pytest.raises(ValueError):
        locate_mwe("a", "   ")


def test_char_span_to_word_span_examples():
    s = "Don't spill the beans now."
    assert char_span_to_word_span(CharSpan(6, 21, 0, 0.0), s) == WordSpan(1, 3)
    ws = char_span_to_word_span(CharSpan(6, 11, 0, 0.0), s)
    assert ws == WordSpan(1, 1) and ws.word_count == 1


def test_char_span_to_word_span_middle_words():
    s = "w0 w1 alpha beta gamma w5"
    bounds = word_boundaries(s)
    start, end = bounds[2][0], bounds[4][1]
    ws = char_span_to_word_span(CharSpan(start, end, 0, 0.0), s, bounds)
    assert (ws.first_word, ws.last_word, ws.word_count) == (2, 4, 3)
    # oracle scan: words whose extent overlaps the span
    assert [i for i, (a, b) in enumerate(bounds) if a < end and b > start] == [2, 3, 4]


def test_word_span_partial_word_expands():
    s = "He spilled the beans."
    span = locate_mwe("spill the beans", s)
    assert char_span_to_word_span(span, s) == WordSpan(1, 3)


VOCAB = ["the", "cat", "sat", "on", "mat", "big", "fish", "spill", "beans", "cold", "feet", "red", "tape", "a"]


def _random_case(rng):
    words = [rng.choice(VOCAB) for _ in range(rng.randint(1, 40))]
    mwe_words = [rng.choice(VOCAB) for _ in range(rng.randint(1, 4))]
    kind = rng.random()
    if kind < 0.4:
        pos = rng.randint(0, len(words))
        inserted = list(mwe_words)
        if rng.random() < 0.5:
            inserted[-1] = inserted[-1] + rng.choice(["s", "ed", "ing"])
        words[pos:pos] = inserted
    elif kind < 0.5:
        words = [w.upper() if rng.random() < 0.3 else w for w in words]
    sentence = " ".join(words)
    if rng.random() < 0.5:
        sentence += rng.choice([".", "!", "?"])
    return " ".join(mwe_words), sentence


def test_matches_brute_force_on_random_fixtures():
    rng = random.Random(7)
    for _ in range(150):
        mwe, sentence = _random_case(rng)
        d, start, end = brute_force_locate(mwe, sentence)
        try:
            span = locate_mwe(mwe, sentence, max_norm_distance=1.0)
        except MWENotFound as exc:
            span = exc.best
        assert (span.distance, span.start, span.end) == (d, start, end), (mwe, sentence)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_threshold_monotone(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    mwe, sentence = _random_case(rng)
    lo = data.draw(st.floats(0, 1))
    hi = data.draw(st.floats(lo, 1))
    try:
        locate_mwe(mwe, sentence, lo)
    except MWENotFound:
        return
    locate_mwe(mwe, sentence, hi)


@settings(max_examples=200)
@given(st.text(max_size=8), st.text(max_size=8), st.text(max_size=8))
def test_metric_properties(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert (edit_distance(a, b) == 0) == (a == b)
