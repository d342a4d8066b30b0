"""Batch collation and the 1:1:1 mixed pretraining stream.

Each pretraining step consumes one batch from every enabled source, so the
per-step source ratio is exactly 1:1:1. Sources shuffle per epoch with a
permutation derived from (seed, source, epoch) and cycle when exhausted;
stream state (per-source epoch/offset plus noise generator states) is tiny
and restores bit-exactly from a checkpoint.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .noise import add_noise
from .vocab import BOS, CLS, EOS, PAD, format_utterance, tokenize

SOURCE_NAMES = ("dialogues", "shorttexts", "articles")


@dataclass
class SeqLimits:
    max_tokens: int = 64      # per sentence/utterance, including [CLS]
    max_sentences: int = 24   # per dialogue/article
    max_target: int = 64      # decoder positions, including BOS/EOS shift


@dataclass
class RecBatch:
    """Flattened utterance units for denoising reconstruction."""
    enc_tokens: np.ndarray   # (N, L) noisy, [CLS] first
    enc_mask: np.ndarray     # (N, L) True at real positions
    dec_in: np.ndarray       # (N, T) [BOS] + clean tokens
    dec_targets: np.ndarray  # (N, T) clean tokens + [EOS]
    dec_mask: np.ndarray     # (N, T)


@dataclass
class Seq2SeqBatch:
    """Sentence-structured inputs with one decoder target per sample."""
    sent_tokens: np.ndarray  # (B, n, L) [CLS] first per sentence
    tok_mask: np.ndarray     # (B, n, L)
    sent_mask: np.ndarray    # (B, n)
    dec_in: np.ndarray       # (B, T)
    dec_targets: np.ndarray  # (B, T)
    dec_mask: np.ndarray     # (B, T)


@dataclass
class StepTriple:
    rec: RecBatch | None
    gen: Seq2SeqBatch | None
    summ: Seq2SeqBatch | None


def pad_stack(seqs, width=None):
    """Stack variable-length int sequences into (N, L) plus a bool mask."""
    n = len(seqs)
    width = width or max(len(s) for s in seqs)
    out = np.full((n, width), PAD, dtype=np.int64)
    mask = np.zeros((n, width), dtype=bool)
    for i, s in enumerate(seqs):
        s = s[:width]
        out[i, :len(s)] = s
        mask[i, :len(s)] = True
    return out, mask


def decoder_pair(target_ids, max_target):
    """(dec_in, dec_target) with BOS shifted in and EOS appended."""
    t = np.asarray(target_ids, dtype=np.int64)[: max_target - 1]
    dec_in = np.concatenate([[BOS], t])
    dec_target = np.concatenate([t, [EOS]])
    return dec_in, dec_target


class TokenizedDialogue:
    """Cached encoding of one dialogue: utterance ids and optional summary."""

    def __init__(self, dialogue, vocab, limits):
        self.utterances = [
            format_utterance(sp, tx, vocab)[: limits.max_tokens]
            for sp, tx in dialogue.utterances[: limits.max_sentences]
        ]
        self.summary = None
        if dialogue.summary is not None:
            self.summary = vocab.encode(tokenize(dialogue.summary))


class TokenizedSentences:
    """Cached encoding of a text piece or article."""

    def __init__(self, sentences, vocab, limits, summary=None):
        self.sentences = [
            np.concatenate([[CLS], vocab.encode(tokenize(s))])[: limits.max_tokens]
            for s in sentences[: limits.max_sentences]
        ]
        self.summary = None
        if summary is not None:
            self.summary = vocab.encode(tokenize(summary))


def collate_rec(dialogues, limits, noise_rng=None):
    """Noised utterance units from a batch of tokenized dialogues."""
    enc, dec_in, dec_tgt = [], [], []
    for d in dialogues:
        for utt in d.utterances:
            if noise_rng is not None:
                ns = add_noise(utt, noise_rng)
                noisy, clean = ns.noisy, ns.clean
            else:
                noisy = clean = utt
            enc.append(noisy)
            di, dt = decoder_pair(clean[1:], limits.max_target)  # drop [CLS]
            dec_in.append(di)
            dec_tgt.append(dt)
    enc_tokens, enc_mask = pad_stack(enc)
    t_width = max(len(s) for s in dec_in)
    di, dm = pad_stack(dec_in, t_width)
    dt, _ = pad_stack(dec_tgt, t_width)
    return RecBatch(enc_tokens, enc_mask, di, dt, dm)


def _stack_sentences(items, limits):
    b = len(items)
    n = max(len(it) for it in items)
    width = max(len(s) for it in items for s in it)
    toks = np.full((b, n, width), PAD, dtype=np.int64)
    toks[:, :, 0] = CLS  # placeholder rows stay well-formed for the encoder
    tok_mask = np.zeros((b, n, width), dtype=bool)
    sent_mask = np.zeros((b, n), dtype=bool)
    for i, it in enumerate(items):
        for j, s in enumerate(it):
            toks[i, j, :len(s)] = s
            tok_mask[i, j, :len(s)] = True
            sent_mask[i, j] = True
    return toks, tok_mask, sent_mask


def collate_gen(pieces, limits, noise_rng=None):
    """Noised piece sentences; the target is the whole clean piece."""
    sent_items, targets = [], []
    for p in pieces:
        if noise_rng is not None:
            keep = noise_rng.random() < 0.20
            noisy = [s if keep else add_noise(s, noise_rng, unit_keep_prob=0.0).noisy
                     for s in p.sentences]
        else:
            noisy = p.sentences
        sent_items.append(noisy)
        targets.append(np.concatenate([s[1:] for s in p.sentences]))
    toks, tok_mask, sent_mask = _stack_sentences(sent_items, limits)
    pairs = [decoder_pair(t, limits.max_target) for t in targets]
    width = max(len(p[0]) for p in pairs)
    di, dm = pad_stack([p[0] for p in pairs], width)
    dt, _ = pad_stack([p[1] for p in pairs], width)
    return Seq2SeqBatch(toks, tok_mask, sent_mask, di, dt, dm)


def collate_seq2seq(items, limits):
    """Clean sentence-to-summary batch (articles or dialogue pairs)."""
    sent_items = []
    targets = []
    for it in items:
        sents = it.utterances if hasattr(it, "utterances") else it.sentences
        sent_items.append(sents)
        targets.append(it.summary)
    toks, tok_mask, sent_mask = _stack_sentences(sent_items, limits)
    pairs = [decoder_pair(t, limits.max_target) for t in targets]
    width = max(len(p[0]) for p in pairs)
    di, dm = pad_stack([p[0] for p in pairs], width)
    dt, _ = pad_stack([p[1] for p in pairs], width)
    return Seq2SeqBatch(toks, tok_mask, sent_mask, di, dt, dm)


class SourceCycler:
    """Epoch-permuted index stream over one source; cycles forever.

    The permutation of epoch e is derived from (seed, source_id, e), so the
    full order is reproducible from (epoch, offset) alone.
    """

    def __init__(self, n, seed, source_id):
        if n < 1:
            raise ConfigError(f"source {SOURCE_NAMES[source_id] if source_id < 3 else source_id} is empty")
        self.n = n
        self.seed = seed
        self.source_id = source_id
        self.epoch = 0
        self.offset = 0
        self._perm = self._permutation(0)

    def _permutation(self, epoch):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([self.seed, self.source_id, epoch])))
        return rng.permutation(self.n)

    def take(self, k):
        out = []
        while len(out) < k:
            room = self.n - self.offset
            grab = min(room, k - len(out))
            out.extend(self._perm[self.offset:self.offset + grab])
            self.offset += grab
            if self.offset == self.n:
                self.epoch += 1
                self.offset = 0
                self._perm = self._permutation(self.epoch)
        return out

    def state(self):
        return {"epoch": self.epoch, "offset": self.offset}

    def load_state(self, st):
        self.epoch = int(st["epoch"])
        self.offset = int(st["offset"])
        self._perm = self._permutation(self.epoch)


def _noise_generator(seed, source_id):
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, source_id, 0xDAE])))


class MixedStream:
    """Step-triple stream over the enabled pretraining sources."""

    def __init__(self, vocab, dialogues=None, shorttexts=None, articles=None,
                 batch_size=8, seed=0, limits=None, noise=True):
        self.vocab = vocab
        self.batch_size = batch_size
        self.limits = limits or SeqLimits()
        self.noise = noise
        for name, data in zip(SOURCE_NAMES, (dialogues, shorttexts, articles)):
            if data is not None and len(data) == 0:
                raise ConfigError(f"pretraining source {name!r} is empty")
        self._dialogues = None
        self._pieces = None
        self._articles = None
        self._cyclers = {}
        self._noise_rngs = {}
        if dialogues is not None:
            self._dialogues = [TokenizedDialogue(d, vocab, self.limits) for d in dialogues]
            self._cyclers["dialogues"] = SourceCycler(len(dialogues), seed, 0)
            self._noise_rngs["dialogues"] = _noise_generator(seed, 0)
        if shorttexts is not None:
            self._pieces = [TokenizedSentences(p.sentences, vocab, self.limits)
                            for p in shorttexts]
            self._cyclers["shorttexts"] = SourceCycler(len(shorttexts), seed, 1)
            self._noise_rngs["shorttexts"] = _noise_generator(seed, 1)
        if articles is not None:
            self._articles = [TokenizedSentences(a.article_sentences, vocab,
                                                 self.limits, a.summary)
                              for a in articles]
            self._cyclers["articles"] = SourceCycler(len(articles), seed, 2)
        if not self._cyclers:
            raise ConfigError("no pretraining sources enabled")

    def next_triple(self):
        rec = gen = summ = None
        if self._dialogues is not None:
            idx = self._cyclers["dialogues"].take(self.batch_size)
            rng = self._noise_rngs["dialogues"] if self.noise else None
            rec = collate_rec([self._dialogues[i] for i in idx], self.limits, rng)
        if self._pieces is not None:
            idx = self._cyclers["shorttexts"].take(self.batch_size)
            rng = self._noise_rngs["shorttexts"] if self.noise else None
            gen = collate_gen([self._pieces[i] for i in idx], self.limits, rng)
        if self._articles is not None:
            idx = self._cyclers["articles"].take(self.batch_size)
            summ = collate_seq2seq([self._articles[i] for i in idx], self.limits)
        return StepTriple(rec, gen, summ)

    def state(self):
        st = {"cyclers": {k: c.state() for k, c in self._cyclers.items()},
              "noise": {k: r.bit_generator.state for k, r in self._noise_rngs.items()}}
        return st

    def load_state(self, st):
        for k, c in self._cyclers.items():
            c.load_state(st["cyclers"][k])
        for k, r in self._noise_rngs.items():
            r.bit_generator.state = st["noise"][k]


def mixed_stream(vocab, dialogues, shorttexts, articles, batch_size, seed,
                 limits=None, noise=True):
    """Flat (source-tag, batch) view of the step-triple stream."""
    ms = MixedStream(vocab, dialogues, shorttexts, articles,
                     batch_size=batch_size, seed=seed, limits=limits, noise=noise)
    while True:
        triple = ms.next_triple()
        yield "dialogues", triple.rec
        yield "shorttexts", triple.gen
        yield "articles", triple.summ
