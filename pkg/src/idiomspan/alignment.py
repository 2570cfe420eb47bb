"""Word-to-piece alignment and mean pooling of piece vectors into word vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class PieceAlignment:
    word_index: int
    start: int
    end: int

    @property
    def piece_range(self) -> range:
        return range(self.start, self.end)

    def __len__(self):
        return self.end - self.start


@dataclass
class LayeredWordVectors:
    """Per-layer word vectors, ``vectors[k, i]`` is word ``i`` at layer ``k``.

    Layer 0 is the embedding output, layers 1..L the transformer blocks.
    """

    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 3:
            raise ValueError(f"expected (layers+1, words, width) array, got shape {self.vectors.shape}")

    @property
    def layers(self) -> int:
        return self.vectors.shape[0] - 1

    @property
    def num_words(self) -> int:
        return self.vectors.shape[1]

    @property
    def width(self) -> int:
        return self.vectors.shape[2]


def align(
    words: Sequence[str], pieces: Sequence[tuple[str, int]], offset: int = 0
) -> list[PieceAlignment]:
    """Group consecutive pieces by their source word.

    ``pieces`` lists ``(piece, word_index)`` for the content pieces only;
    ``offset`` shifts every range past a begin-of-sequence marker.
    """
    counts = [0] * len(words)
    previous = -1
    for piece, w in pieces:
        if not 0 <= w < len(words):
            raise AlignmentError(f"piece {piece!r} points at word {w}, have {len(words)} words")
        if w < previous:
            raise AlignmentError(f"piece {piece!r} breaks word order ({w} after {previous})")
        previous = w
        counts[w] += 1
    out = []
    pos = offset
    for i, (word, c) in enumerate(zip(words, counts)):
        if c == 0:
            raise AlignmentError(f"word {i} ({word!r}) has no pieces")
        out.append(PieceAlignment(i, pos, pos + c))
        pos += c
    return out


def pool_pieces(piece_vectors) -> np.ndarray:
    piece_vectors = np.asarray(piece_vectors)
    if piece_vectors.ndim != 2 or piece_vectors.shape[0] == 0:
        raise ValueError("pool_pieces needs a non-empty (pieces, width) array")
    if piece_vectors.shape[0] == 1:
        return piece_vectors[0].copy()
    return piece_vectors.mean(axis=0, dtype=piece_vectors.dtype)


def pool_words(piece_states: np.ndarray, alignment: Sequence[PieceAlignment]) -> np.ndarray:
    """Word vectors from a ``(..., pieces, width)`` array of piece states."""
    return np.stack(
        [pool_pieces_last(piece_states[..., a.start : a.end, :]) for a in alignment], axis=-2
    )


def pool_pieces_last(block: np.ndarray) -> np.ndarray:
    if block.shape[-2] == 1:
        return block[..., 0, :].copy()
    return block.mean(axis=-2, dtype=block.dtype)


def pooling_matrix(alignment: Sequence[PieceAlignment], n_pieces: int) -> np.ndarray:
    """``(words, n_pieces)`` averaging matrix; word vectors = matrix @ piece states."""
    m = np.zeros((len(alignment), n_pieces))
    for a in alignment:
        m[a.word_index, a.start : a.end] = 1.0 / len(a)
    return m
