"""Transformer building blocks on top of the autodiff engine.

Pre-layer-norm blocks throughout; sinusoidal token positions; learned
sentence positions in the hierarchical encoders. A DropCtx carries the
dropout probability and generator during training; passing None runs the
block deterministically (inference/eval).
"""

import math
from dataclasses import dataclass

import numpy as np

from ..engine import tensor as T
from ..engine.tensor import Tensor
from ..errors import ConfigError, LengthError

NEG_INF = -1e9


@dataclass(frozen=True)
class BlockConfig:
    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ffn_dim: int = 256
    max_positions: int = 64
    max_sentences: int = 24
    dropout: float = 0.1

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ConfigError("model_dim must be divisible by heads")
        for v in (self.layers, self.heads, self.model_dim, self.ffn_dim,
                  self.max_positions, self.max_sentences):
            if v < 1:
                raise ConfigError("block dimensions must be positive")


TOY_CONFIG = BlockConfig()
PAPER_CONFIG = BlockConfig(layers=6, heads=8, model_dim=768, ffn_dim=2048,
                           max_positions=512, max_sentences=64, dropout=0.1)

INIT_STD = 0.02


@dataclass
class DropCtx:
    p: float
    rng: np.random.Generator


def _drop(x, ctx):
    if ctx is None or ctx.p <= 0.0:
        return x
    return T.dropout(x, ctx.p, ctx.rng)


class Module:
    """Minimal parameter container with named, ordered registration."""

    def __init__(self):
        self._params = {}
        self._children = {}

    def param(self, name, arr):
        t = Tensor(arr, requires_grad=True)
        self._params[name] = t
        return t

    def child(self, name, mod):
        self._children[name] = mod
        return mod

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield (prefix + name if prefix else name), p
        for cname, c in self._children.items():
            sub = f"{prefix}{cname}." if prefix else f"{cname}."
            yield from c.named_parameters(sub)

    def parameters(self):
        return [p for _, p in self.named_parameters()]


class Linear(Module):
    def __init__(self, n_in, n_out, rng, dtype):
        super().__init__()
        self.w = self.param("w", rng.normal(0.0, INIT_STD, (n_in, n_out)).astype(dtype))
        self.b = self.param("b", np.zeros(n_out, dtype=dtype))

    def __call__(self, x):
        return T.matmul(x, self.w) + self.b


class LayerNorm(Module):
    def __init__(self, dim, dtype):
        super().__init__()
        self.gain = self.param("gain", np.ones(dim, dtype=dtype))
        self.bias = self.param("bias", np.zeros(dim, dtype=dtype))

    def __call__(self, x):
        return T.layer_norm(x, self.gain, self.bias)


class MultiHeadAttention(Module):
    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.heads = cfg.heads
        self.head_dim = cfg.model_dim // cfg.heads
        self.wq = self.child("wq", Linear(cfg.model_dim, cfg.model_dim, rng, dtype))
        self.wk = self.child("wk", Linear(cfg.model_dim, cfg.model_dim, rng, dtype))
        self.wv = self.child("wv", Linear(cfg.model_dim, cfg.model_dim, rng, dtype))
        self.wo = self.child("wo", Linear(cfg.model_dim, cfg.model_dim, rng, dtype))

    def _split(self, x, b, t):
        return T.transpose(T.reshape(x, (b, t, self.heads, self.head_dim)),
                           (0, 2, 1, 3))

    def __call__(self, q_in, kv_in, bias, drop=None):
        """bias is an additive ndarray broadcastable to (B, H, Tq, Tk)."""
        b, tq = q_in.data.shape[0], q_in.data.shape[1]
        tk = kv_in.data.shape[1]
        q = self._split(self.wq(q_in), b, tq)
        k = self._split(self.wk(kv_in), b, tk)
        v = self._split(self.wv(kv_in), b, tk)
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(self.head_dim))
        if bias is not None:
            scores = scores + Tensor(bias.astype(q_in.data.dtype))
        attn = _drop(T.softmax(scores), drop)
        ctx = T.transpose(T.matmul(attn, v), (0, 2, 1, 3))
        return self.wo(T.reshape(ctx, (b, tq, self.heads * self.head_dim)))


class FeedForward(Module):
    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.up = self.child("up", Linear(cfg.model_dim, cfg.ffn_dim, rng, dtype))
        self.down = self.child("down", Linear(cfg.ffn_dim, cfg.model_dim, rng, dtype))

    def __call__(self, x):
        return self.down(T.relu(self.up(x)))


class EncoderLayer(Module):
    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.ln1 = self.child("ln1", LayerNorm(cfg.model_dim, dtype))
        self.attn = self.child("attn", MultiHeadAttention(cfg, rng, dtype))
        self.ln2 = self.child("ln2", LayerNorm(cfg.model_dim, dtype))
        self.ffn = self.child("ffn", FeedForward(cfg, rng, dtype))

    def __call__(self, x, bias, drop=None):
        h = self.ln1(x)
        x = x + _drop(self.attn(h, h, bias, drop), drop)
        x = x + _drop(self.ffn(self.ln2(x)), drop)
        return x


class DecoderLayer(Module):
    def __init__(self, cfg, rng, dtype, cross_attention):
        super().__init__()
        self.ln1 = self.child("ln1", LayerNorm(cfg.model_dim, dtype))
        self.self_attn = self.child("self_attn", MultiHeadAttention(cfg, rng, dtype))
        self.cross_attn = None
        if cross_attention:
            self.ln_x = self.child("ln_x", LayerNorm(cfg.model_dim, dtype))
            self.cross_attn = self.child("cross_attn", MultiHeadAttention(cfg, rng, dtype))
        self.ln2 = self.child("ln2", LayerNorm(cfg.model_dim, dtype))
        self.ffn = self.child("ffn", FeedForward(cfg, rng, dtype))

    def __call__(self, x, causal_bias, memories=None, mem_bias=None, drop=None):
        h = self.ln1(x)
        x = x + _drop(self.self_attn(h, h, causal_bias, drop), drop)
        if self.cross_attn is not None:
            x = x + _drop(self.cross_attn(self.ln_x(x), memories, mem_bias, drop), drop)
        x = x + _drop(self.ffn(self.ln2(x)), drop)
        return x


def sinusoid_table(max_positions, dim, dtype):
    pos = np.arange(max_positions, dtype=np.float64)[:, None]
    i = np.arange(dim, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    table = np.where(i % 2 == 0, np.sin(angles), np.cos(angles))
    return table.astype(dtype)


def pad_bias(mask):
    """Additive attention bias (B, 1, 1, Tk) from a (B, Tk) key mask."""
    return np.where(mask[:, None, None, :], 0.0, NEG_INF)


def causal_bias(t):
    """Additive (1, 1, T, T) bias forbidding attention to future steps."""
    upper = np.triu(np.ones((t, t), dtype=bool), k=1)
    return np.where(upper, NEG_INF, 0.0)[None, None]


class TokenEncoder(Module):
    """Transformer encoder over [CLS]-prefixed token sequences."""

    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.cfg = cfg
        self.pos = sinusoid_table(cfg.max_positions, cfg.model_dim, dtype)
        self.scale = math.sqrt(cfg.model_dim)
        self.layers = [self.child(f"layer{i}", EncoderLayer(cfg, rng, dtype))
                       for i in range(cfg.layers)]
        self.ln_f = self.child("ln_f", LayerNorm(cfg.model_dim, dtype))

    def __call__(self, embeddings, pad_mask, drop=None):
        t = embeddings.data.shape[1]
        if t > self.cfg.max_positions:
            raise LengthError(f"sequence length {t} exceeds max positions "
                              f"{self.cfg.max_positions}")
        x = embeddings * self.scale + Tensor(self.pos[:t])
        x = _drop(x, drop)
        bias = pad_bias(pad_mask)
        for layer in self.layers:
            x = layer(x, bias, drop)
        return self.ln_f(x)


class HierEncoder(Module):
    """Encoder over sentence vectors with learned sentence positions."""

    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.cfg = cfg
        self.sent_pos = self.param(
            "sent_pos", rng.normal(0.0, INIT_STD, (cfg.max_sentences, cfg.model_dim)).astype(dtype))
        self.layers = [self.child(f"layer{i}", EncoderLayer(cfg, rng, dtype))
                       for i in range(cfg.layers)]
        self.ln_f = self.child("ln_f", LayerNorm(cfg.model_dim, dtype))

    def __call__(self, sent_vecs, sent_mask, drop=None):
        n = sent_vecs.data.shape[1]
        if n > self.cfg.max_sentences:
            raise LengthError(f"{n} sentences exceed max {self.cfg.max_sentences}")
        x = sent_vecs + self.sent_pos[:n]
        bias = pad_bias(sent_mask)
        for layer in self.layers:
            x = layer(x, bias, drop)
        return self.ln_f(x)


class Decoder(Module):
    """Causal decoder; cross-attention to memories is optional."""

    def __init__(self, cfg, rng, dtype, cross_attention):
        super().__init__()
        self.cfg = cfg
        self.cross = cross_attention
        self.pos = sinusoid_table(cfg.max_positions, cfg.model_dim, dtype)
        self.scale = math.sqrt(cfg.model_dim)
        self.layers = [self.child(f"layer{i}", DecoderLayer(cfg, rng, dtype, cross_attention))
                       for i in range(cfg.layers)]
        self.ln_f = self.child("ln_f", LayerNorm(cfg.model_dim, dtype))

    def __call__(self, embeddings, cond=None, memories=None, mem_mask=None, drop=None):
        """cond (B, d) is added to every input embedding when given."""
        t = embeddings.data.shape[1]
        if t > self.cfg.max_positions:
            raise LengthError(f"target length {t} exceeds max positions "
                              f"{self.cfg.max_positions}")
        x = embeddings * self.scale + Tensor(self.pos[:t])
        if cond is not None:
            x = x + T.reshape(cond, (cond.data.shape[0], 1, cond.data.shape[1]))
        x = _drop(x, drop)
        cbias = causal_bias(t)
        mem_bias = pad_bias(mem_mask) if mem_mask is not None else None
        for layer in self.layers:
            x = layer(x, cbias, memories, mem_bias, drop)
        return self.ln_f(x)


class CriticMlp(Module):
    """Two affine layers with ReLU between; callers apply the sigmoid."""

    def __init__(self, cfg, rng, dtype):
        super().__init__()
        self.up = self.child("up", Linear(cfg.model_dim, 2 * cfg.model_dim, rng, dtype))
        self.out = self.child("out", Linear(2 * cfg.model_dim, 1, rng, dtype))

    def __call__(self, reps):
        h = T.relu(self.up(reps))
        logits = self.out(h)
        return T.reshape(logits, (logits.data.shape[0],))
