"""Fine-tuning the stacked d_e -> b_h -> s_g model on dialogue-summary pairs.

Only {emb, d_e, b_h, s_g} are optimized; the other groups stay frozen and
byte-stable. Utterances are not noised here. Dev perplexity and
teacher-forced word accuracy are logged each eval interval.
"""

import dataclasses
import math

import numpy as np

from ..config import RunConfig
from ..corpus.stream import (SeqLimits, SourceCycler, TokenizedDialogue,
                             collate_seq2seq)
from ..engine import Adam, LrSchedule, Tape, clip_grad_norm, no_grad
from ..errors import ConfigError
from ..model.layers import DropCtx
from ..model.network import DamsModel
from .checkpoint import load_checkpoint, restore_params, save_checkpoint
from .losses import summ_loss
from .pretrain import _drop_generator

TUNED_GROUPS = ("emb", "d_e", "b_h", "s_g")


def select_fraction(n, fraction, seed):
    """Seeded subsample of round(fraction * n) indices (half rounds up)."""
    k = int(fraction * n + 0.5)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5E1])))
    return sorted(int(i) for i in rng.permutation(n)[:k])


def finetune_step(model, opt, batch, drop=None, clip_norm=1.0):
    """One supervised step through the stacked pipeline; returns the loss."""
    with Tape() as tape:
        loss, _, _ = summ_loss(model, batch, drop)
        tape.backward(loss, params=[p for _, p in _tuned_params(model)])
    groups = model.parameter_groups()
    for gname in TUNED_GROUPS:
        clip_grad_norm([p for _, p in groups[gname]], clip_norm)
    opt.step()
    opt.zero_grad()
    return loss.item()


def _tuned_params(model):
    groups = model.parameter_groups()
    for gname in TUNED_GROUPS:
        yield from groups[gname]


def teacher_forced_metrics(model, batches):
    """(perplexity, word accuracy) over dev batches, token-level means."""
    total_nll = 0.0
    total_correct = 0
    total_tokens = 0
    with no_grad():
        for batch in batches:
            b, n, width = batch.sent_tokens.shape
            flat_cls, _ = model.encode_sequence(
                "d_e", batch.sent_tokens.reshape(b * n, width),
                batch.tok_mask.reshape(b * n, width))
            import dams.engine.tensor as T
            cls_vecs = T.reshape(flat_cls, (b, n, model.cfg.model_dim))
            memories = model.hier_encode("b_h", cls_vecs, batch.sent_mask)
            logits, _ = model.summary_decode(
                memories, batch.sent_mask, batch.dec_in, batch.dec_targets,
                batch.dec_mask)
            mask = batch.dec_mask
            lg = logits.data
            flat = lg.reshape(-1, lg.shape[-1])
            targets = batch.dec_targets.reshape(-1)
            keep = mask.reshape(-1)
            shifted = flat - flat.max(axis=1, keepdims=True)
            lse = np.log(np.exp(shifted).sum(axis=1))
            nll = lse - shifted[np.arange(len(targets)), targets]
            total_nll += float(nll[keep].sum())
            preds = flat.argmax(axis=1)
            total_correct += int((preds[keep] == targets[keep]).sum())
            total_tokens += int(keep.sum())
    ppl = math.exp(total_nll / total_tokens)
    acc = total_correct / total_tokens
    return ppl, acc


class Finetuner:
    def __init__(self, cfg: RunConfig, vocab, train_pairs, dev_pairs,
                 model=None, adam_state=None):
        """model=None builds a scratch model; otherwise fine-tunes the given one."""
        self.cfg = cfg
        self.vocab = vocab
        self.block_cfg = cfg.block_config()
        self.dtype = np.float64 if cfg.dtype == "float64" else np.float32
        self.limits = SeqLimits(max_tokens=self.block_cfg.max_positions,
                                max_sentences=self.block_cfg.max_sentences,
                                max_target=self.block_cfg.max_positions)
        self.model = model or DamsModel(self.block_cfg, len(vocab),
                                        seed=cfg.seed, dtype=self.dtype)
        if cfg.train_fraction <= 0 and cfg.finetune_steps > 0:
            raise ConfigError("train_fraction 0 requires finetune_steps 0")
        self.selected = select_fraction(len(train_pairs), cfg.train_fraction,
                                        cfg.seed)
        self.train = [TokenizedDialogue(train_pairs[i], vocab, self.limits)
                      for i in self.selected]
        self.dev = [TokenizedDialogue(d, vocab, self.limits) for d in dev_pairs]
        groups = self.model.parameter_groups()
        tuned = {g: groups[g] for g in TUNED_GROUPS}
        schedule = LrSchedule({g: cfg.group_lrs()[g] for g in TUNED_GROUPS},
                              cfg.finetune_warmup)
        self.opt = Adam(tuned, schedule)
        if adam_state is not None:
            m, v, t = adam_state
            for key in self.opt.m:
                if key in m:
                    self.opt.m[key] = m[key].astype(self.dtype, copy=True)
                    self.opt.v[key] = v[key].astype(self.dtype, copy=True)
        self.drop_rng = _drop_generator(cfg.seed, "tune")
        self.cycler = None
        if self.train:
            self.cycler = SourceCycler(len(self.train), cfg.seed, 3)
        self.step_num = 0

    def _drop(self):
        if self.block_cfg.dropout <= 0:
            return None
        return DropCtx(self.block_cfg.dropout, self.drop_rng)

    def step(self):
        if self.cycler is None:
            raise ConfigError("no fine-tune pairs selected")
        idx = self.cycler.take(self.cfg.batch_size)
        batch = collate_seq2seq([self.train[i] for i in idx], self.limits)
        loss = finetune_step(self.model, self.opt, batch, self._drop(),
                             self.cfg.clip_norm)
        self.step_num += 1
        return loss

    def dev_batches(self, chunk=16):
        for lo in range(0, len(self.dev), chunk):
            yield collate_seq2seq(self.dev[lo:lo + chunk], self.limits)

    def evaluate(self):
        return teacher_forced_metrics(self.model, self.dev_batches())

    def run(self, steps, eval_interval, log_fn=None):
        """Train with periodic dev evals; returns [(step, loss, ppl, acc)]."""
        history = []
        for _ in range(steps):
            loss = self.step()
            if self.step_num % eval_interval == 0 or self.step_num == 1 \
                    or self.step_num == steps:
                ppl, acc = self.evaluate()
                history.append((self.step_num, loss, ppl, acc))
                if log_fn is not None:
                    log_fn(self.step_num, loss, ppl, acc)
        return history

    def _config_blob(self):
        blob = dataclasses.asdict(self.cfg)
        blob["vocab_tokens"] = self.vocab.id_to_token
        blob["kind"] = "finetune"
        return blob

    def save(self, path):
        save_checkpoint(
            path,
            config=self._config_blob(),
            params={n: p.data for n, p in self.model.named_parameters()},
            adam_m=self.opt.m, adam_v=self.opt.v, step=self.opt.t,
            rng_state={"drop": {"tune": self.drop_rng.bit_generator.state},
                       "cycler": self.cycler.state() if self.cycler else None,
                       "seed": self.cfg.seed,
                       "selected_pairs": self.selected})


def finetuner_from_checkpoint(path, cfg: RunConfig, train_pairs, dev_pairs,
                              reset_optimizer=True):
    """Fine-tuner initialized from a pretraining checkpoint."""
    from ..corpus.vocab import SPECIALS, Vocab

    data = load_checkpoint(path)
    blob = data["config"]
    vocab = Vocab(blob["vocab_tokens"][len(SPECIALS):])
    merged = dataclasses.replace(
        cfg,
        preset=blob["preset"], dtype=blob["dtype"],
        model_dim=blob["model_dim"], layers=blob["layers"],
        heads=blob["heads"], ffn_dim=blob["ffn_dim"],
        dropout=cfg.dropout)
    model = DamsModel(merged.block_config(), len(vocab), seed=merged.seed,
                      dtype=np.float64 if merged.dtype == "float64" else np.float32)
    restore_params(model, data["params"])
    adam_state = None
    if not reset_optimizer:
        adam_state = (data["adam_m"], data["adam_v"], data["step"])
    return Finetuner(merged, vocab, train_pairs, dev_pairs, model=model,
                     adam_state=adam_state)
