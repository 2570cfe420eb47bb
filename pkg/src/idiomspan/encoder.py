"""Multilingual encoders exposing per-layer word vectors.

Two implementations share one duck-typed surface (``spec``, ``num_layers``,
``width``, ``capacity``, ``pieces(words)``, ``encode(words)``):

* :class:`MockEncoder` - deterministic, weight-free, for tests and smoke runs.
* :class:`HFEncoder` - a Hugging Face model loaded from a local registry
  directory or the model hub.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .alignment import LayeredWordVectors, align, pool_words

logger = logging.getLogger(__name__)


class ModelName(str, enum.Enum):
    MBERT = "mbert"
    XLMR_BASE = "xlmr"
    XLMR_LARGE = "xlmr-large"
    MOCK = "mock"

    @classmethod
    def parse(cls, value) -> "ModelName":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"xlm-r": "xlmr", "xlmr-base": "xlmr", "xlm-r-l": "xlmr-large", "xlmr-l": "xlmr-large"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown model {value!r}; choose from {[m.value for m in cls]}") from None

    @property
    def display(self) -> str:
        return {"mbert": "mBERT", "xlmr": "XLM-R", "xlmr-large": "XLM-R-L", "mock": "MOCK"}[self.value]


HUB_IDS = {
    ModelName.MBERT: "bert-base-multilingual-cased",
    ModelName.XLMR_BASE: "xlm-roberta-base",
    ModelName.XLMR_LARGE: "xlm-roberta-large",
}
_SHAPES = {
    ModelName.MBERT: (12, 768),
    ModelName.XLMR_BASE: (12, 768),
    ModelName.XLMR_LARGE: (24, 1024),
}

# layers probed per model in the experiment grid
PROBE_LAYERS = {
    ModelName.MBERT: (4, 8, 12),
    ModelName.XLMR_BASE: (4, 8, 12),
    ModelName.XLMR_LARGE: (8, 12, 24),
}


@dataclass(frozen=True)
class EncoderSpec:
    name: ModelName
    num_layers: int
    hidden_width: int
    trainable: bool = False
    model_id: Optional[str] = None
    seed: int = 0
    max_pieces: int = 512

    def __post_init__(self):
        object.__setattr__(self, "name", ModelName.parse(self.name))
        if self.num_layers < 1 or self.hidden_width < 1:
            raise ValueError("num_layers and hidden_width must be >= 1")

    @classmethod
    def for_model(cls, name, **overrides) -> "EncoderSpec":
        name = ModelName.parse(name)
        if name is ModelName.MOCK:
            layers, width = overrides.pop("num_layers", 2), overrides.pop("hidden_width", 8)
        else:
            layers, width = _SHAPES[name]
        overrides.setdefault("model_id", HUB_IDS.get(name))
        return cls(name=name, num_layers=layers, hidden_width=width, **overrides)

    def with_trainable(self, trainable: bool) -> "EncoderSpec":
        return replace(self, trainable=trainable)


class EncoderUnavailable(RuntimeError):
    pass


class EncoderCapacityError(ValueError):
    pass


def select_layer(vectors: LayeredWordVectors, k: int) -> np.ndarray:
    """Word vectors at layer ``k``; 0 is the embedding output, 1..L the blocks."""
    if not 0 <= k <= vectors.layers:
        raise IndexError(f"layer {k} out of range, valid layers are 0..{vectors.layers}")
    return vectors.vectors[k]


def fit_window(piece_counts: Sequence[int], first: int, last: int, capacity: int) -> tuple[int, int]:
    """Largest word window ``[lo, hi)`` containing words first..last within ``capacity`` pieces.

    Words are trimmed from the end of the sequence first, then from the start.
    """
    if sum(piece_counts[first : last + 1]) > capacity:
        raise EncoderCapacityError(
            f"MWE span (words {first}..{last}) needs {sum(piece_counts[first:last + 1])} pieces, "
            f"encoder capacity is {capacity}"
        )
    lo, hi = 0, len(piece_counts)
    total = sum(piece_counts)
    while total > capacity and hi - 1 > last:
        hi -= 1
        total -= piece_counts[hi]
    while total > capacity and lo < first:
        total -= piece_counts[lo]
        lo += 1
    return lo, hi


# --------------------------------------------------------------------------- mock


class MockEncoder:
    """Deterministic stand-in encoder.

    Words are cut into pieces of at most ``PIECE_CHARS`` characters (continuations
    prefixed ``##``). Component ``j`` of piece ``p`` at layer ``k`` is::

        u = uint64(blake2b(f"{p}\\x1f{k}\\x1f{j}", key=str(seed), digest_size=8), big-endian)
        value = 2 * u / 2**64 - 1

    and a word vector is the mean of its piece vectors, so single-piece words
    carry the hash of the word itself.
    """

    PIECE_CHARS = 4

    def __init__(self, spec: EncoderSpec):
        if spec.name is not ModelName.MOCK:
            raise ValueError("MockEncoder needs a MOCK spec")
        self.spec = spec
        self._key = str(spec.seed).encode()

    @property
    def num_layers(self):
        return self.spec.num_layers

    @property
    def width(self):
        return self.spec.hidden_width

    @property
    def capacity(self):
        return self.spec.max_pieces

    def pieces(self, words: Sequence[str]) -> list[tuple[str, int]]:
        out = []
        for i, word in enumerate(words):
            n = self.PIECE_CHARS
            chunks = [word[s : s + n] for s in range(0, len(word), n)]
            out.extend((c if s == 0 else "##" + c, i) for s, c in enumerate(chunks))
        return out

    def piece_vector(self, piece: str) -> np.ndarray:
        return _mock_piece_vector(self._key, piece, self.num_layers, self.width)

    def encode(self, words: Sequence[str]) -> LayeredWordVectors:
        if not words:
            raise ValueError("encode needs at least one word")
        pieces = self.pieces(words)
        if len(pieces) > self.capacity:
            raise EncoderCapacityError(f"{len(pieces)} pieces exceed capacity {self.capacity}")
        states = np.stack([self.piece_vector(p) for p, _ in pieces], axis=1)
        return LayeredWordVectors(pool_words(states, align(words, pieces)))


@lru_cache(maxsize=65536)
def _mock_piece_vector(key: bytes, piece: str, layers: int, width: int) -> np.ndarray:
    out = np.empty((layers + 1, width))
    for k in range(layers + 1):
        for j in range(width):
            digest = hashlib.blake2b(f"{piece}\x1f{k}\x1f{j}".encode(), key=key, digest_size=8).digest()
            out[k, j] = 2.0 * int.from_bytes(digest, "big") / 2.0**64 - 1.0
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------- hugging face


def resolve_model_path(spec: EncoderSpec, registry_dir=None, offline: bool = False) -> str:
    """Local registry directory for the model if present, else the hub id."""
    model_id = spec.model_id or HUB_IDS.get(spec.name)
    if model_id is None:
        raise EncoderUnavailable(f"no model id for {spec.name.value}")
    if Path(model_id).is_dir():
        return model_id
    if registry_dir is not None:
        for candidate in (Path(registry_dir) / model_id, Path(registry_dir) / model_id.replace("/", "--")):
            if candidate.is_dir():
                return str(candidate)
    if offline:
        logger.info("offline: resolving %s from the local Hugging Face cache only", model_id)
    return model_id


class HFEncoder:
    def __init__(self, spec: EncoderSpec, registry_dir=None, offline: bool = False, device: str = "cpu"):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.spec = spec
        path = resolve_model_path(spec, registry_dir, offline)
        if offline:
            os.environ.setdefault("HF_HUB_OFFLINE", "1")
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(path, use_fast=True, local_files_only=offline)
            self.model = AutoModel.from_pretrained(path, local_files_only=offline)
        except OSError as exc:
            hint = "--offline is set, so only local files were tried; " if offline else ""
            raise EncoderUnavailable(
                f"cannot load encoder {path!r}: {hint}place the model under the registry directory "
                f"(--registry-dir) or allow hub downloads. ({exc})"
            ) from exc
        if not self.tokenizer.is_fast:
            raise EncoderUnavailable(f"{path!r} has no fast tokenizer; word alignment needs one")
        cfg = self.model.config
        if cfg.num_hidden_layers != spec.num_layers or cfg.hidden_size != spec.hidden_width:
            raise ValueError(
                f"{path!r} has {cfg.num_hidden_layers} layers x {cfg.hidden_size}, spec says "
                f"{spec.num_layers} x {spec.hidden_width}"
            )
        self.device = torch.device(device)
        self.model.to(self.device)
        self.model.train(False)
        self.model.requires_grad_(spec.trainable)
        n_special = self.tokenizer.num_special_tokens_to_add(pair=False)
        limit = min(getattr(cfg, "max_position_embeddings", 512), self.tokenizer.model_max_length, spec.max_pieces + n_special)
        if getattr(cfg, "model_type", "") in ("xlm-roberta", "roberta"):
            # position ids start after the padding index
            limit = min(limit, cfg.max_position_embeddings - cfg.pad_token_id - 1)
        self.capacity = limit - n_special

    @property
    def num_layers(self):
        return self.spec.num_layers

    @property
    def width(self):
        return self.spec.hidden_width

    def pieces(self, words: Sequence[str]) -> list[tuple[str, int]]:
        batch = self.tokenizer(list(words), is_split_into_words=True, add_special_tokens=False)
        tokens = batch.tokens()
        return [(t, w) for t, w in zip(tokens, batch.word_ids()) if w is not None]

    def tensorize(self, sentences: Sequence[Sequence[str]]):
        """Padded model inputs plus per-sentence alignments (offset past specials)."""
        batch = self.tokenizer(
            [list(s) for s in sentences],
            is_split_into_words=True,
            padding=True,
            return_tensors="pt",
        )
        alignments = []
        for b, words in enumerate(sentences):
            word_ids = batch.word_ids(b)
            positions = [i for i, w in enumerate(word_ids) if w is not None]
            if positions and len(positions) > self.capacity:
                raise EncoderCapacityError(f"{len(positions)} pieces exceed capacity {self.capacity}")
            offset = positions[0] if positions else 0
            if positions and positions[-1] - offset + 1 != len(positions):
                raise ValueError("content pieces are not contiguous")
            pairs = [(str(i), word_ids[i]) for i in positions]
            alignments.append(align(words, pairs, offset=offset))
        return {k: v.to(self.device) for k, v in batch.items()}, alignments

    def hidden_states(self, inputs):
        out = self.model(**inputs, output_hidden_states=True)
        return out.hidden_states

    def encode(self, words: Sequence[str]) -> LayeredWordVectors:
        import torch

        if not words:
            raise ValueError("encode needs at least one word")
        inputs, (alignment,) = self.tensorize([words])
        with torch.no_grad():
            states = torch.stack(self.hidden_states(inputs), dim=0)[:, 0]
        states = states.detach().cpu().numpy()
        return LayeredWordVectors(pool_words(states, alignment).astype(np.float64))


def make_encoder(spec: EncoderSpec, registry_dir=None, offline: bool = False, device: str = "cpu"):
    if spec.name is ModelName.MOCK:
        return MockEncoder(spec)
    return HFEncoder(spec, registry_dir=registry_dir, offline=offline, device=device)
