"""The five pretraining loss components and their combination.

Combined objective per step:

    total = l_rec + l_gen + l_summ + alpha * (l_de + l_dg)

Task losses are means within their batch; the critic losses are balanced
binary logistic losses over the two domains with gradient reversal
inserted upstream, so critics descend while their input encoders ascend.
"""

from dataclasses import dataclass

import numpy as np

from ..engine import tensor as T
from ..engine.tensor import Tensor
from ..errors import NumericError


@dataclass
class LossBreakdown:
    l_rec: float
    l_gen: float
    l_summ: float
    l_de: float
    l_dg: float
    alpha: float
    total: float

    FIELDS = ("l_rec", "l_gen", "l_summ", "l_de", "l_dg", "alpha", "total")

    def component_sum(self):
        return (self.l_rec + self.l_gen + self.l_summ
                + self.alpha * (self.l_de + self.l_dg))

    def tsv(self):
        return "\t".join(repr(getattr(self, f)) for f in self.FIELDS)


def rec_loss(model, batch, drop=None):
    """Utterance DAE loss; also returns the [CLS] vectors for the critic."""
    cls_vecs, _ = model.encode_sequence("d_e", batch.enc_tokens, batch.enc_mask, drop)
    _, loss = model.reconstruct_utterance(cls_vecs, batch.dec_in,
                                          batch.dec_targets, batch.dec_mask, drop)
    return loss, cls_vecs


def gen_loss(model, batch, drop=None):
    """Summary-style LM loss; returns the s_h memories for the critic."""
    b, n, width = batch.sent_tokens.shape
    flat_cls, _ = model.encode_sequence(
        "s_e", batch.sent_tokens.reshape(b * n, width),
        batch.tok_mask.reshape(b * n, width), drop)
    sent_vecs = T.reshape(flat_cls, (b, n, model.cfg.model_dim))
    memories = model.hier_encode("s_h", sent_vecs, batch.sent_mask, drop)
    _, loss = model.summary_decode(memories, batch.sent_mask, batch.dec_in,
                                   batch.dec_targets, batch.dec_mask, drop)
    return loss, memories


def summ_loss(model, batch, drop=None):
    """End-to-end summarization loss; returns cls vectors and memories."""
    loss, cls_vecs, memories = model.summarize_forward(
        batch.sent_tokens, batch.tok_mask, batch.sent_mask,
        batch.dec_in, batch.dec_targets, batch.dec_mask, drop)
    return loss, cls_vecs, memories


def _flatten_real(reps, mask):
    """Select real sentence slots of (B, n, d) reps into (N, d)."""
    if reps.data.ndim == 2:
        return reps
    return reps[np.asarray(mask, dtype=bool)]


def _balanced_critic_loss(model, which, reps_zero, reps_one, apply_reversal):
    """Mean logistic loss over equal counts of the two classes."""
    n0 = reps_zero.data.shape[0]
    n1 = reps_one.data.shape[0]
    k = min(n0, n1)
    if k == 0:
        return None
    reps = T.concat([reps_zero[:k], reps_one[:k]], axis=0)
    logits = model.critic_logits(which, reps, apply_reversal)
    labels = np.concatenate([np.zeros(k), np.ones(k)])
    return T.reduce_mean(T.binary_logistic(logits, labels))


def critic_losses(model, dialogue_cls=None, news_cls=None, short_mem=None,
                  news_mem=None, masks=None, apply_reversal=True):
    """(l_de, l_dg); either is None when a side is missing for this step.

    D_e: dialogue utterance [CLS] (label 0) vs news sentence [CLS] (label 1).
    D_g: s_h memories on short texts (label 0) vs b_h memories on news (label 1).
    """
    masks = masks or {}
    l_de = l_dg = None
    if dialogue_cls is not None and news_cls is not None:
        news_flat = _flatten_real(news_cls, masks.get("news"))
        l_de = _balanced_critic_loss(model, "e", dialogue_cls, news_flat,
                                     apply_reversal)
    if short_mem is not None and news_mem is not None:
        short_flat = _flatten_real(short_mem, masks.get("short"))
        news_flat = _flatten_real(news_mem, masks.get("news"))
        l_dg = _balanced_critic_loss(model, "g", short_flat, news_flat,
                                     apply_reversal)
    return l_de, l_dg


def combine(parts, alpha):
    """Eq-style total from a dict of loss tensors; missing parts count 0."""
    total = None
    for name in ("l_rec", "l_gen", "l_summ"):
        t = parts.get(name)
        if t is None:
            continue
        total = t if total is None else total + t
    if alpha > 0:
        for name in ("l_de", "l_dg"):
            t = parts.get(name)
            if t is None:
                continue
            total = T.scale(t, alpha) if total is None else total + T.scale(t, alpha)
    if total is None:
        raise NumericError("no loss components present")
    return total


def check_finite(parts):
    for name, t in parts.items():
        if t is None:
            continue
        val = t.item() if isinstance(t, Tensor) else float(t)
        if not np.isfinite(val):
            raise NumericError(f"non-finite loss component {name} = {val}")
