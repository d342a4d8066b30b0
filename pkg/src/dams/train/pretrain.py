"""The multi-source pretraining loop.

One step consumes one batch per enabled source, runs the combined
objective through a single backward pass, clips each parameter group, and
applies one Adam step. Every stochastic component (batch order, masking
noise, per-pipeline dropout) owns a named generator whose state goes into
checkpoints, so resumed runs reproduce uninterrupted ones bit-exactly.
"""

import dataclasses

import numpy as np

from ..config import RunConfig
from ..corpus.stream import MixedStream, SeqLimits
from ..engine import Adam, LrSchedule, Tape, clip_grad_norm, no_grad
from ..errors import ConfigError, NumericError
from ..model.layers import DropCtx
from ..model.network import DamsModel
from .checkpoint import load_checkpoint, restore_params, save_checkpoint
from .losses import (LossBreakdown, check_finite, combine, critic_losses,
                     gen_loss, rec_loss, summ_loss)

PIPELINES = ("rec", "gen", "summ")
_PIPELINE_IDS = {"rec": 11, "gen": 12, "summ": 13, "tune": 14}


def _drop_generator(seed, tag):
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, _PIPELINE_IDS[tag], 0xD0])))


def pretrain_step(model, opt, triple, alpha, drops=None, clip_norm=1.0):
    """Run one combined step and return the LossBreakdown."""
    drops = drops or {}
    with Tape() as tape:
        parts = {"l_rec": None, "l_gen": None, "l_summ": None,
                 "l_de": None, "l_dg": None}
        dial_cls = news_cls = short_mem = news_mem = None
        masks = {}
        if triple.rec is not None:
            parts["l_rec"], dial_cls = rec_loss(model, triple.rec, drops.get("rec"))
        if triple.gen is not None:
            parts["l_gen"], short_mem = gen_loss(model, triple.gen, drops.get("gen"))
            masks["short"] = triple.gen.sent_mask
        if triple.summ is not None:
            parts["l_summ"], news_cls, news_mem = summ_loss(
                model, triple.summ, drops.get("summ"))
            masks["news"] = triple.summ.sent_mask
        if alpha > 0:
            parts["l_de"], parts["l_dg"] = critic_losses(
                model, dial_cls, news_cls, short_mem, news_mem, masks)
        else:
            with no_grad():
                parts["l_de"], parts["l_dg"] = critic_losses(
                    model, dial_cls, news_cls, short_mem, news_mem, masks)
        check_finite(parts)
        total = combine(parts, alpha)
        if not np.isfinite(total.item()):
            raise NumericError("non-finite combined loss")
        tape.backward(total, params=model.parameters())
    for _, group_params in model.parameter_groups().items():
        clip_grad_norm([p for _, p in group_params], clip_norm)
    opt.step()
    opt.zero_grad()
    vals = {k: (p.item() if p is not None else 0.0) for k, p in parts.items()}
    return LossBreakdown(l_rec=vals["l_rec"], l_gen=vals["l_gen"],
                         l_summ=vals["l_summ"], l_de=vals["l_de"],
                         l_dg=vals["l_dg"], alpha=alpha, total=total.item())


class Pretrainer:
    """Owns the model, optimizer, stream, and the run/checkpoint cycle."""

    def __init__(self, cfg: RunConfig, vocab, dialogues=None, shorttexts=None,
                 articles=None):
        self.cfg = cfg
        self.vocab = vocab
        self.block_cfg = cfg.block_config()
        self.dtype = np.float64 if cfg.dtype == "float64" else np.float32
        self.model = DamsModel(self.block_cfg, len(vocab), seed=cfg.seed,
                               dtype=self.dtype)
        schedule = LrSchedule(cfg.group_lrs(), cfg.warmup)
        self.opt = Adam(self.model.parameter_groups(), schedule)
        limits = SeqLimits(max_tokens=self.block_cfg.max_positions,
                           max_sentences=self.block_cfg.max_sentences,
                           max_target=self.block_cfg.max_positions)
        self.stream = MixedStream(
            vocab,
            dialogues if cfg.with_dialogues else None,
            shorttexts if cfg.with_shorttexts else None,
            articles if cfg.with_articles else None,
            batch_size=cfg.batch_size, seed=cfg.seed, limits=limits)
        self.drop_rngs = {tag: _drop_generator(cfg.seed, tag) for tag in PIPELINES}
        self.step_num = 0

    def _drops(self):
        if self.block_cfg.dropout <= 0:
            return {}
        return {tag: DropCtx(self.block_cfg.dropout, rng)
                for tag, rng in self.drop_rngs.items()}

    def step(self) -> LossBreakdown:
        triple = self.stream.next_triple()
        breakdown = pretrain_step(self.model, self.opt, triple, self.cfg.alpha,
                                  self._drops(), self.cfg.clip_norm)
        self.step_num += 1
        return breakdown

    def run(self, steps, log_fn=None):
        history = []
        for _ in range(steps):
            breakdown = self.step()
            history.append(breakdown)
            if log_fn is not None:
                log_fn(self.step_num, breakdown)
        return history

    # ---- persistence -------------------------------------------------------

    def _config_blob(self):
        blob = dataclasses.asdict(self.cfg)
        blob["vocab_tokens"] = self.vocab.id_to_token
        blob["kind"] = "pretrain"
        return blob

    def _rng_blob(self):
        return {"stream": self.stream.state(),
                "drop": {tag: rng.bit_generator.state
                         for tag, rng in self.drop_rngs.items()},
                "seed": self.cfg.seed}

    def save(self, path):
        save_checkpoint(
            path,
            config=self._config_blob(),
            params={n: p.data for n, p in self.model.named_parameters()},
            adam_m=self.opt.m, adam_v=self.opt.v, step=self.opt.t,
            rng_state=self._rng_blob())

    def load(self, path):
        data = load_checkpoint(path)
        restore_params(self.model, data["params"])
        for key in self.opt.m:
            if key not in data["adam_m"]:
                raise ConfigError(f"checkpoint is missing optimizer state {key}")
            self.opt.m[key] = data["adam_m"][key].astype(self.dtype, copy=True)
            self.opt.v[key] = data["adam_v"][key].astype(self.dtype, copy=True)
        self.opt.t = data["step"]
        self.step_num = data["step"]
        rng = data["rng_state"]
        self.stream.load_state(_intify_stream_state(rng["stream"]))
        for tag, generator in self.drop_rngs.items():
            generator.bit_generator.state = rng["drop"][tag]
        return data["config"]


def _intify_stream_state(st):
    # JSON round-trips PCG64 state dicts fine; nothing to coerce today, but
    # keep the hook so format changes stay local to this module.
    return st


def model_from_checkpoint(path, dtype=None):
    """Rebuild a model (and its vocab) from a checkpoint's config blob."""
    from ..config import load_config
    from ..corpus.vocab import SPECIALS, Vocab

    data = load_checkpoint(path)
    blob = dict(data["config"])
    tokens = blob.pop("vocab_tokens")
    blob.pop("kind", None)
    cfg = load_config(overrides={k: v for k, v in blob.items()})
    vocab = Vocab(tokens[len(SPECIALS):])
    use_dtype = dtype or (np.float64 if cfg.dtype == "float64" else np.float32)
    model = DamsModel(cfg.block_config(), len(vocab), seed=cfg.seed, dtype=use_dtype)
    restore_params(model, data["params"])
    return model, vocab, cfg, data
