"""Word-level vocabulary and tokenization.

Tokenization is lowercase with punctuation split into single-char tokens,
so bracketed special markers can never be produced by corpus text.
"""

import re
from collections import Counter

import numpy as np

from ..errors import DataError

PAD, CLS, MASK, BOS, EOS, UNK = 0, 1, 2, 3, 4, 5
SPECIALS = ["[PAD]", "[CLS]", "[MASK]", "[BOS]", "[EOS]", "[UNK]"]

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^a-z0-9\s]")


def tokenize(text):
    """Lowercased word/punctuation tokens of a string."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens):
    return " ".join(tokens)


class Vocab:
    """Bijective token<->id map with the six reserved specials at ids 0-5."""

    def __init__(self, tokens):
        self.id_to_token = list(SPECIALS) + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("vocabulary contains duplicate tokens")

    def __len__(self):
        return len(self.id_to_token)

    def encode(self, tokens):
        get = self.token_to_id.get
        return np.array([get(t, UNK) for t in tokens], dtype=np.int64)

    def encode_text(self, text):
        return self.encode(tokenize(text))

    def decode(self, ids, skip_specials=True):
        toks = []
        for i in ids:
            i = int(i)
            if skip_specials and i < len(SPECIALS):
                continue
            toks.append(self.id_to_token[i])
        return toks

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.id_to_token:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            toks = [line.rstrip("\n") for line in f]
        if toks[: len(SPECIALS)] != SPECIALS:
            raise DataError(f"vocab file {path} does not start with the "
                            "reserved special tokens")
        return cls(toks[len(SPECIALS):])


def build_vocab(token_streams, max_size=2000):
    """Frequency-ranked vocabulary from iterables of token lists.

    Deterministic: ties are broken lexicographically. Tokens beyond
    max_size (including specials) are dropped and encode as [UNK].
    """
    counts = Counter()
    n_records = 0
    for stream in token_streams:
        for tokens in stream:
            n_records += 1
            counts.update(tokens)
    if n_records == 0:
        raise DataError("build_vocab: no records supplied")
    budget = max_size - len(SPECIALS)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocab([tok for tok, _ in ranked[:budget]])


def format_utterance(speaker, text, vocab):
    """Token ids of one speaker turn: [CLS] speaker : text."""
    toks = tokenize(speaker) + [":"] + tokenize(text)
    return np.concatenate([[CLS], vocab.encode(toks)]).astype(np.int64)
