import hashlib
import subprocess
import sys

import numpy as np
import pytest

from idiomspan.encoder import (
    EncoderCapacityError,
    EncoderSpec,
    EncoderUnavailable,
    HFEncoder,
    ModelName,
    MockEncoder,
    fit_window,
    make_encoder,
    select_layer,
)


def mock_value(word, layer, dim, seed=0):
    digest = hashlib.blake2b(f"{word}\x1f{layer}\x1f{dim}".encode(), key=str(seed).encode(), digest_size=8).digest()
    return 2.0 * int.from_bytes(digest, "big") / 2.0**64 - 1.0


def test_mock_values_follow_documented_hash():
    enc = MockEncoder(EncoderSpec.for_model("mock", num_layers=2, hidden_width=4))
    out = enc.encode(["a", "b"])
    assert out.vectors.shape == (3, 2, 4)
    for k in range(3):
        for i, w in enumerate(["a", "b"]):
            for j in range(4):
                assert out.vectors[k, i, j] == mock_value(w, k, j)
    assert np.all(np.abs(out.vectors) <= 1.0)


def test_mock_long_word_is_mean_of_pieces():
    enc = MockEncoder(EncoderSpec.for_model("mock", num_layers=1, hidden_width=3))
    assert enc.pieces(["unhappy"]) == [("unha", 0), ("##ppy", 0)]
    out = enc.encode(["unhappy"])
    expected = [(mock_value("unha", 1, j) + mock_value("##ppy", 1, j)) / 2 for j in range(3)]
    np.testing.assert_allclose(out.vectors[1, 0], expected, atol=1e-15)


def test_mock_deterministic_and_seeded():
    spec = EncoderSpec.for_model("mock", num_layers=2, hidden_width=4)
    a = make_encoder(spec).encode(["x", "yy"]).vectors
    b = make_encoder(spec).encode(["x", "yy"]).vectors
    assert a.tobytes() == b.tobytes()
    c = make_encoder(EncoderSpec.for_model("mock", num_layers=2, hidden_width=4, seed=1)).encode(["x", "yy"]).vectors
    assert not np.array_equal(a, c)


def test_mock_identical_across_processes():
    code = (
        "from idiomspan.encoder import *;import sys;"
        "sys.stdout.write(make_encoder(EncoderSpec.for_model('mock',num_layers=2,hidden_width=4)).encode(['ab','c']).vectors.tobytes().hex())"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    here = make_encoder(EncoderSpec.for_model("mock", num_layers=2, hidden_width=4)).encode(["ab", "c"]).vectors
    assert out == here.tobytes().hex()


def test_spec_shapes_for_released_models():
    assert (EncoderSpec.for_model("mbert").num_layers, EncoderSpec.for_model("mbert").hidden_width) == (12, 768)
    assert EncoderSpec.for_model("xlmr").num_layers == 12
    assert (EncoderSpec.for_model("XLM-R-L").num_layers, EncoderSpec.for_model("xlmr-large").hidden_width) == (24, 1024)
    with pytest.raises(ValueError):
        EncoderSpec(name="mock", num_layers=0, hidden_width=3)


def test_select_layer_range():
    v = make_encoder(EncoderSpec.for_model("mock", num_layers=3, hidden_width=2)).encode(["a"])
    assert v.layers == 3
    np.testing.assert_array_equal(select_layer(v, 3), v.vectors[3])
    np.testing.assert_array_equal(select_layer(v, 0), v.vectors[0])
    with pytest.raises(IndexError, match="0..3"):
        select_layer(v, 4)


def test_mock_capacity_error():
    enc = make_encoder(EncoderSpec.for_model("mock", num_layers=1, hidden_width=2, max_pieces=3))
    with pytest.raises(EncoderCapacityError):
        enc.encode(["a", "b", "c", "d"])


def test_fit_window_keeps_span():
    counts = [1, 2, 1, 1, 3, 1]
    lo, hi = fit_window(counts, 2, 3, capacity=4)
    assert lo <= 2 and hi > 3 and sum(counts[lo:hi]) <= 4
    assert (lo, hi) == (1, 4)
    with pytest.raises(EncoderCapacityError):
        fit_window(counts, 1, 4, capacity=5)


def test_hf_encoder_from_registry(tiny_registry, tiny_spec):
    enc = HFEncoder(tiny_spec, registry_dir=tiny_registry, offline=True)
    words = ["He", "spilled", "the", "beans", "."]
    out = enc.encode(words)
    assert out.vectors.shape == (3, 5, 16)
    # "spilled" splits into several pieces; its vector is their mean at every layer
    pieces = enc.pieces(words)
    assert sum(1 for _, w in pieces if w == 1) > 1
    again = enc.encode(words)
    assert out.vectors.tobytes() == again.vectors.tobytes()


def test_hf_encoder_word_vectors_average_pieces(tiny_registry, tiny_spec):
    import torch

    enc = HFEncoder(tiny_spec, registry_dir=tiny_registry, offline=True)
    words = ["spilled", "beans"]
    batch = enc.tokenizer(words, is_split_into_words=True, return_tensors="pt")
    with torch.no_grad():
        states = enc.model(**batch, output_hidden_states=True).hidden_states
    ids = batch.word_ids(0)
    k = 2
    expected = np.stack([
        states[k][0, [i for i, w in enumerate(ids) if w == word]].mean(0).numpy() for word in range(2)
    ])
    np.testing.assert_allclose(select_layer(enc.encode(words), k), expected, rtol=1e-6, atol=1e-6)


def test_hf_encoder_unavailable_offline(tmp_path):
    spec = EncoderSpec.for_model("mbert", model_id="no-such-org/no-such-model")
    with pytest.raises(EncoderUnavailable, match="registry"):
        HFEncoder(spec, registry_dir=tmp_path, offline=True)


def test_hf_shape_mismatch_rejected(tiny_registry):
    spec = EncoderSpec(name=ModelName.MBERT, num_layers=12, hidden_width=768, model_id="tiny-bert")
    with pytest.raises(ValueError, match="layers"):
        HFEncoder(spec, registry_dir=tiny_registry, offline=True)
