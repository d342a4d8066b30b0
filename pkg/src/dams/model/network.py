"""The multi-source model: shared embeddings, six transformer groups, two critics.

Parameter groups (each parameter belongs to exactly one):

  emb       shared token embedding table, tied with the output projection
  d_e       token-level encoder for dialogue utterances / article sentences
  d_g       conditional utterance decoder (no cross attention; the sequence
            representation is added to every input embedding)
  s_e       token-level encoder for short-text sentences
  s_h       hierarchical encoder over short-text sentence vectors
  s_g       summary decoder with cross attention over sentence memories
  b_h       bridging context encoder (same architecture as s_h)
  critic_e  domain critic on encoder [CLS] vectors
  critic_g  domain critic on decoder memory vectors
"""

import numpy as np

from ..corpus.vocab import BOS, CLS
from ..engine import tensor as T
from ..engine.tensor import Tensor
from ..errors import InvalidBatchError, UsageError
from .layers import CriticMlp, Decoder, HierEncoder, TokenEncoder

GROUP_NAMES = ("emb", "d_e", "d_g", "s_e", "s_h", "s_g", "b_h",
               "critic_e", "critic_g")


class DamsModel:
    def __init__(self, cfg, vocab_size, seed=0, dtype=np.float64):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.dtype = np.dtype(dtype)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 77])))
        self.embedding = Tensor(
            rng.normal(0.0, 0.02, (vocab_size, cfg.model_dim)).astype(self.dtype),
            requires_grad=True)
        self.enc_d_e = TokenEncoder(cfg, rng, self.dtype)
        self.dec_d_g = Decoder(cfg, rng, self.dtype, cross_attention=False)
        self.enc_s_e = TokenEncoder(cfg, rng, self.dtype)
        self.hier_s_h = HierEncoder(cfg, rng, self.dtype)
        self.dec_s_g = Decoder(cfg, rng, self.dtype, cross_attention=True)
        self.hier_b_h = HierEncoder(cfg, rng, self.dtype)
        self.critic_e = CriticMlp(cfg, rng, self.dtype)
        self.critic_g = CriticMlp(cfg, rng, self.dtype)
        self._modules = {
            "d_e": self.enc_d_e, "d_g": self.dec_d_g, "s_e": self.enc_s_e,
            "s_h": self.hier_s_h, "s_g": self.dec_s_g, "b_h": self.hier_b_h,
            "critic_e": self.critic_e, "critic_g": self.critic_g,
        }

    def parameter_groups(self):
        groups = {"emb": [("table", self.embedding)]}
        for name, mod in self._modules.items():
            groups[name] = list(mod.named_parameters())
        return groups

    def named_parameters(self):
        for gname, params in self.parameter_groups().items():
            for pname, p in params:
                yield f"{gname}.{pname}", p

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    # ---- building blocks -------------------------------------------------

    def embed(self, ids):
        return T.embedding(self.embedding, ids)

    def output_logits(self, hidden):
        """Tied projection onto the vocabulary."""
        return T.matmul(hidden, T.transpose(self.embedding, (1, 0)))

    def encode_sequence(self, group, tokens, pad_mask, drop=None):
        """Encode [CLS]-prefixed rows; returns (cls_vecs, token_vecs)."""
        if group not in ("d_e", "s_e"):
            raise UsageError(f"unknown token encoder group {group!r}")
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2 or tokens.shape[1] < 1 or (tokens[:, 0] != CLS).any():
            raise UsageError("encode_sequence expects [CLS] at position 0 of every row")
        enc = self.enc_d_e if group == "d_e" else self.enc_s_e
        h = enc(self.embed(tokens), np.asarray(pad_mask, dtype=bool), drop)
        return h[:, 0, :], h[:, 1:, :]

    def hier_encode(self, group, sent_vecs, sent_mask, drop=None):
        if group not in ("s_h", "b_h"):
            raise UsageError(f"unknown hierarchical encoder group {group!r}")
        enc = self.hier_s_h if group == "s_h" else self.hier_b_h
        return enc(sent_vecs, np.asarray(sent_mask, dtype=bool), drop)

    def _seq_mean_nll(self, logits, targets, mask):
        """Mean over sequences of per-sequence token-mean NLL."""
        n, t, v = logits.data.shape
        mask = np.asarray(mask, dtype=bool)
        counts = mask.sum(axis=1)
        if t == 0 or (counts == 0).any():
            raise InvalidBatchError("batch contains an empty target sequence")
        flat = T.reshape(logits, (n * t, v))
        nll = T.token_nll(flat, np.where(mask, targets, 0).reshape(-1))
        nll = T.mul(nll, Tensor(mask.reshape(-1).astype(self.dtype)))
        per_seq = T.reduce_sum(T.reshape(nll, (n, t)), axis=1)
        per_seq = T.mul(per_seq, Tensor((1.0 / counts).astype(self.dtype)))
        return T.reduce_mean(per_seq)

    @staticmethod
    def _as_batch(arr, ndim):
        arr = np.asarray(arr)
        return arr[None] if arr.ndim == ndim - 1 else arr

    def reconstruct_utterance(self, cls_vecs, dec_in, dec_targets, dec_mask=None,
                              drop=None):
        """Teacher-forced reconstruction conditioned on the [CLS] vector.

        Accepts a single sequence or a batch; returns (logits, loss) where
        loss is the mean over sequences of their token-mean NLL.
        """
        single = np.asarray(dec_in).ndim == 1
        dec_in = self._as_batch(dec_in, 2).astype(np.int64)
        dec_targets = self._as_batch(dec_targets, 2).astype(np.int64)
        if cls_vecs.data.ndim == 1:
            cls_vecs = T.reshape(cls_vecs, (1, cls_vecs.data.shape[0]))
        if dec_in.shape[1] == 0:
            raise InvalidBatchError("empty reconstruction target")
        if (dec_in[:, 0] != BOS).any():
            raise UsageError("decoder input must begin with [BOS]")
        if dec_mask is None:
            dec_mask = np.ones_like(dec_in, dtype=bool)
        h = self.dec_d_g(self.embed(dec_in), cond=cls_vecs, drop=drop)
        logits = self.output_logits(h)
        loss = self._seq_mean_nll(logits, dec_targets, dec_mask)
        if single:
            logits = T.reshape(logits, logits.data.shape[1:])
        return logits, loss

    def summary_decode(self, memories, mem_mask, dec_in, dec_targets,
                       dec_mask=None, drop=None):
        """Teacher-forced decoding with cross attention over memories."""
        single = np.asarray(dec_in).ndim == 1
        dec_in = self._as_batch(dec_in, 2).astype(np.int64)
        dec_targets = self._as_batch(dec_targets, 2).astype(np.int64)
        if memories.data.ndim == 2:
            memories = T.reshape(memories, (1,) + memories.data.shape)
        mem_mask = np.asarray(mem_mask, dtype=bool)
        if mem_mask.ndim == 1:
            mem_mask = mem_mask[None]
        if memories.data.shape[1] == 0 or (~mem_mask).all(axis=1).any():
            raise InvalidBatchError("a sample has no memories to attend to")
        if dec_in.shape[1] == 0:
            raise InvalidBatchError("empty summary target")
        if (dec_in[:, 0] != BOS).any():
            raise UsageError("decoder input must begin with [BOS]")
        if dec_mask is None:
            dec_mask = np.ones_like(dec_in, dtype=bool)
        h = self.dec_s_g(self.embed(dec_in), memories=memories,
                         mem_mask=mem_mask, drop=drop)
        logits = self.output_logits(h)
        loss = self._seq_mean_nll(logits, dec_targets, dec_mask)
        if single:
            logits = T.reshape(logits, logits.data.shape[1:])
        return logits, loss

    def summarize_forward(self, sent_tokens, tok_mask, sent_mask, dec_in,
                          dec_targets, dec_mask=None, drop=None):
        """Document-to-summary pipeline d_e -> b_h -> s_g.

        Returns (loss, cls_vecs (B, n, d), memories (B, n, d)); the
        intermediate representations feed the two critics.
        """
        sent_tokens = np.asarray(sent_tokens, dtype=np.int64)
        b, n, width = sent_tokens.shape
        if n == 0:
            raise InvalidBatchError("document with no sentences")
        flat_cls, _ = self.encode_sequence(
            "d_e", sent_tokens.reshape(b * n, width),
            np.asarray(tok_mask, dtype=bool).reshape(b * n, width), drop)
        cls_vecs = T.reshape(flat_cls, (b, n, self.cfg.model_dim))
        memories = self.hier_encode("b_h", cls_vecs, sent_mask, drop)
        _, loss = self.summary_decode(memories, sent_mask, dec_in, dec_targets,
                                      dec_mask, drop)
        return loss, cls_vecs, memories

    # ---- critics ----------------------------------------------------------

    def critic_logits(self, which, reps, apply_reversal):
        if which not in ("e", "g"):
            raise UsageError(f"unknown critic {which!r}")
        critic = self.critic_e if which == "e" else self.critic_g
        if apply_reversal:
            reps = T.grad_reverse(reps)
        return critic(reps)

    def critic_score(self, which, reps, apply_reversal=False):
        """Domain probabilities in (0, 1) for a batch of representations."""
        return T.sigmoid(self.critic_logits(which, reps, apply_reversal))
