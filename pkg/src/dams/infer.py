"""Length-controlled beam search over the stacked summarization model."""

from dataclasses import dataclass, field

import numpy as np

from .corpus.stream import SeqLimits, TokenizedDialogue, pad_stack
from .corpus.vocab import BOS, CLS, EOS, detokenize
from .engine import no_grad
from .engine import tensor as T
from .engine.backend import kernels as K
from .engine.tensor import Tensor
from .errors import ConfigError, InvalidBatchError

NEG_INF = -1e30


@dataclass
class DecodeConfig:
    beam_size: int = 3
    min_length: int = 3
    max_length: int = 24
    length_penalty: float = 0.7

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        if not 0 <= self.min_length < self.max_length:
            raise ConfigError("need 0 <= min_length < max_length")


@dataclass
class BeamHypothesis:
    tokens: list = field(default_factory=list)  # includes leading [BOS]
    logp: float = 0.0
    finished: bool = False

    def emitted(self):
        """Generated tokens excluding BOS and a trailing EOS."""
        toks = self.tokens[1:]
        if toks and toks[-1] == EOS:
            toks = toks[:-1]
        return toks

    def normalized(self, penalty):
        n = max(1, len(self.tokens) - 1)
        return self.logp / (n ** penalty)


def _log_softmax(rows):
    shifted = rows - rows.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def encode_dialogue(model, tokenized: TokenizedDialogue, limits: SeqLimits):
    """Memories (1, n, d) and sentence mask for one dialogue."""
    if not tokenized.utterances:
        raise InvalidBatchError("cannot summarize an empty dialogue")
    toks, tok_mask = pad_stack(tokenized.utterances)
    with no_grad():
        cls_vecs, _ = model.encode_sequence("d_e", toks, tok_mask)
        cls_b = T.reshape(cls_vecs, (1,) + cls_vecs.data.shape)
        sent_mask = np.ones((1, len(tokenized.utterances)), dtype=bool)
        memories = model.hier_encode("b_h", cls_b, sent_mask)
    return memories.data, sent_mask


def _step_logits(model, memories, sent_mask, prefixes):
    """Next-token logits (K, V) for K decoder prefixes."""
    k = len(prefixes)
    dec_in = np.array(prefixes, dtype=np.int64)
    mem = Tensor(np.repeat(memories, k, axis=0))
    mask = np.repeat(sent_mask, k, axis=0)
    with no_grad():
        h = model.dec_s_g(model.embed(dec_in), memories=mem, mem_mask=mask)
        logits = model.output_logits(h)
    return logits.data[:, -1, :]


def beam_search(model, tokenized: TokenizedDialogue, decode_cfg: DecodeConfig,
                limits=None):
    """Best token sequence (specials stripped) under length-normalized score.

    EOS is suppressed until min_length tokens are emitted; decoding stops
    at EOS or max_length. Deterministic: ties break toward lower token ids.
    """
    limits = limits or SeqLimits()
    memories, sent_mask = encode_dialogue(model, tokenized, limits)
    beam = decode_cfg.beam_size
    active = [BeamHypothesis([BOS], 0.0)]
    finished = []
    for _ in range(decode_cfg.max_length):
        logits = _step_logits(model, memories, sent_mask,
                              [h.tokens for h in active])
        logprobs = _log_softmax(logits)
        emitted = len(active[0].tokens) - 1
        if emitted < decode_cfg.min_length:
            logprobs[:, EOS] = NEG_INF
        totals = np.array([h.logp for h in active])[:, None] + logprobs
        flat = totals.reshape(-1)
        order = np.argsort(-flat, kind="stable")
        new_active = []
        slots = 0  # only the top `beam` candidates occupy beam slots
        for pos in order:
            hyp_idx, token = divmod(int(pos), logprobs.shape[1])
            parent = active[hyp_idx]
            cand = BeamHypothesis(parent.tokens + [token], float(flat[pos]))
            if token == EOS:
                cand.finished = True
                finished.append(cand)
            else:
                new_active.append(cand)
            slots += 1
            if slots == beam:
                break
        active = new_active
        if not active:
            break
    pool = finished if finished else active
    best = max(pool, key=lambda h: h.normalized(decode_cfg.length_penalty))
    return np.array(best.emitted(), dtype=np.int64)


def summarize(model, dialogue, vocab, decode_cfg: DecodeConfig, limits=None):
    """Decode one dialogue record into summary text (no special markers)."""
    limits = limits or SeqLimits()
    tokenized = TokenizedDialogue(dialogue, vocab, limits)
    ids = beam_search(model, tokenized, decode_cfg, limits)
    return detokenize(vocab.decode(ids))
