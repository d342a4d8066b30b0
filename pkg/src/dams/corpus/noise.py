"""DAE noise addition and document truncation into short pieces."""

from dataclasses import dataclass

import numpy as np

from .vocab import CLS, MASK

MASK_RATE = 0.15
UNIT_KEEP_PROB = 0.20


@dataclass
class NoisedSequence:
    noisy: np.ndarray
    clean: np.ndarray
    mask_positions: np.ndarray
    untouched: bool


def add_noise(seq, rng, unit_keep_prob=UNIT_KEEP_PROB, mask_rate=MASK_RATE):
    """Mask tokens of one unit, or keep the whole unit unchanged.

    With probability unit_keep_prob the unit is returned untouched;
    otherwise every token except a leading [CLS] is independently replaced
    by [MASK] with probability mask_rate. The clean sequence is always the
    reconstruction target.
    """
    seq = np.asarray(seq, dtype=np.int64)
    if unit_keep_prob > 0.0 and rng.random() < unit_keep_prob:
        return NoisedSequence(seq.copy(), seq, np.empty(0, dtype=np.int64), True)
    maskable = np.ones(len(seq), dtype=bool)
    if len(seq) and seq[0] == CLS:
        maskable[0] = False
    hits = (rng.random(len(seq)) < mask_rate) & maskable
    noisy = np.where(hits, MASK, seq)
    return NoisedSequence(noisy, seq, np.flatnonzero(hits), False)


def truncate_pieces(sentences, rng):
    """Split a document into consecutive pieces of 1 or 2 sentences.

    Piece sizes are drawn uniformly from {1, 2} (expected length 1.5);
    concatenating the pieces reproduces the document.
    """
    pieces = []
    i = 0
    n = len(sentences)
    while i < n:
        size = 1 + int(rng.integers(0, 2))
        size = min(size, n - i)
        pieces.append(sentences[i:i + size])
        i += size
    return pieces
