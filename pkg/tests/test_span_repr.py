import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from idiomspan.span_repr import AttentiveScorer, ReprType, attention_weights, represent
from oracles import mean_loop, repr_loop


def test_endpoint_examples():
    span = [[1, 2], [3, 4]]
    assert represent(span, "xy").vector.tolist() == [1, 2, 3, 4]
    assert represent(span, "xy-diff").vector.tolist() == [1, 2, 3, 4, -2, -2]
    assert represent(span, "xy-prod").vector.tolist() == [1, 2, 3, 4, 3, 8]
    assert represent(span, "xy-prod-diff").vector.tolist() == [1, 2, 3, 4, 3, 8, -2, -2]


def test_max_pooling_example():
    assert represent([[1, 5], [3, 2]], ReprType.MAX_POOLING).vector.tolist() == [3, 5]


def test_zero_scorer_gives_mean():
    rng = np.random.default_rng(1)
    span = rng.normal(size=(3, 4))
    out = represent(span, "self-attentive", AttentiveScorer.zeros(4)).vector
    np.testing.assert_allclose(out, mean_loop(span.tolist()), atol=1e-12)


def test_attentive_matches_scalar_oracle():
    rng = np.random.default_rng(2)
    span = rng.normal(size=(3, 4))
    w = rng.normal(size=4)
    out = represent(span, "self-attentive", AttentiveScorer(w)).vector
    np.testing.assert_allclose(out, repr_loop(span.tolist(), "self-attentive", w.tolist()), atol=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        represent(np.zeros((0, 3)), "xy")
    with pytest.raises(ValueError):
        represent(np.ones((2, 3)), "self-attentive")
    with pytest.raises(ValueError):
        represent(np.ones((2, 3)), "xy", AttentiveScorer.zeros(3))
    with pytest.raises(ValueError, match="scorer width"):
        represent(np.ones((2, 3)), "self-attentive", AttentiveScorer.zeros(4))


def test_names_parse_from_table_labels():
    assert ReprType.parse("x,y,x*y,x-y") is ReprType.XY_PROD_DIFF
    assert ReprType.parse("MaxPooling") is ReprType.MAX_POOLING
    assert ReprType.parse("self_attentive") is ReprType.SELF_ATTENTIVE
    assert [r.value for r in ReprType] == ["xy", "xy-diff", "xy-prod", "xy-prod-diff", "self-attentive", "max-pooling"]


spans = st.integers(1, 5).flatmap(
    lambda m: st.integers(1, 8).flatmap(
        lambda d: arrays(np.float64, (m, d), elements=st.floats(-5, 5, allow_nan=False))
    )
)


@settings(max_examples=200)
@given(spans, st.sampled_from(list(ReprType)), st.data())
def test_width_contract_and_oracle(span, kind, data):
    d = span.shape[1]
    scorer = None
    if kind.uses_scorer:
        scorer = AttentiveScorer(data.draw(arrays(np.float64, (d,), elements=st.floats(-3, 3))))
    out = represent(span, kind, scorer).vector
    assert out.shape == (kind.width(d),)
    ref = repr_loop(span.tolist(), kind.value, None if scorer is None else scorer.weights.tolist())
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=100)
@given(spans, st.data())
def test_attention_weights_convex(span, data):
    d = span.shape[1]
    w = data.draw(arrays(np.float64, (d,), elements=st.floats(-3, 3)))
    alpha = attention_weights(span, AttentiveScorer(w))
    assert np.all(alpha > 0) or span.shape[0] == 1
    assert abs(alpha.sum() - 1.0) < 1e-6
    out = represent(span, "self-attentive", AttentiveScorer(w)).vector
    assert np.all(out >= span.min(axis=0) - 1e-9) and np.all(out <= span.max(axis=0) + 1e-9)


@settings(max_examples=100)
@given(spans)
def test_max_pool_dominates(span):
    out = represent(span, "max-pooling").vector
    assert np.all(out >= span)
    if span.shape[0] == 1:
        np.testing.assert_array_equal(out, span[0])


@given(arrays(np.float64, (1, 4), elements=st.floats(-5, 5)))
def test_single_word_endpoints(span):
    out = represent(span, "xy-diff").vector
    np.testing.assert_array_equal(out[:4], out[4:8])
    assert np.all(out[8:] == 0)


@settings(max_examples=50)
@given(spans, st.floats(-20, 20))
def test_softmax_shift_invariance(span, c):
    # a constant feature column turns a scorer change on that column into a uniform score shift
    rng = np.random.default_rng(0)
    augmented = np.hstack([span, np.ones((span.shape[0], 1))])
    w = rng.normal(size=augmented.shape[1])
    shifted = w.copy()
    shifted[-1] += c
    np.testing.assert_allclose(
        attention_weights(augmented, AttentiveScorer(shifted)), attention_weights(augmented, AttentiveScorer(w)), atol=1e-9
    )
