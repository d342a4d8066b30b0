"""Reverse-mode autodiff on dense numpy arrays.

A `Tape` records every differentiable operation in execution order (which
is a topological order by construction); `Tape.backward` replays records in
reverse from the loss node, visiting each node at most once. Tensors built
while no tape is active (or under `no_grad()`) are plain values.

A model instance must not be driven by two threads at once, but separate
threads may each run their own tape: the active tape is thread-local.
"""

import threading
from contextlib import contextmanager

import numpy as np

from ..errors import InvalidBatchError, NumericError, UsageError
from .backend import kernels as K

DEFAULT_DTYPE = np.float64

_tls = threading.local()


def _active_tape():
    return getattr(_tls, "tape", None)


class _Record:
    __slots__ = ("out", "parents", "bwd")

    def __init__(self, out, parents, bwd):
        self.out = out
        self.parents = parents
        self.bwd = bwd


class Tape:
    """Ordered log of differentiable ops; context manager activates it."""

    def __init__(self):
        self._recs = []

    def __len__(self):
        return len(self._recs)

    def __enter__(self):
        self._prev = _active_tape()
        _tls.tape = self
        return self

    def __exit__(self, *exc):
        _tls.tape = self._prev
        return False

    def backward(self, loss, params=None):
        """Populate grads of everything `loss` depends on.

        If `params` is given, parameters unreachable from the loss get a
        zero grad so optimizers see a complete gradient set.
        """
        if loss.tape is not self or loss.node is None:
            raise UsageError("backward: loss was not recorded on this tape")
        if loss.data.size != 1:
            raise UsageError("backward: loss must be a scalar")
        loss.grad = np.ones_like(loss.data)
        needed = bytearray(len(self._recs))
        needed[loss.node] = 1
        for idx in range(loss.node, -1, -1):
            if not needed[idx]:
                continue
            rec = self._recs[idx]
            rec.bwd(rec.out.grad)
            for p in rec.parents:
                if p.tape is self and p.node is not None:
                    needed[p.node] = 1
        if params is not None:
            for p in params:
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)


@contextmanager
def no_grad():
    """Disable recording within the block (used for inference/eval)."""
    prev = _active_tape()
    _tls.tape = None
    try:
        yield
    finally:
        _tls.tape = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node", "tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            raise UsageError("wrap ndarray/scalars, not Tensors")
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.node = None
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)


def _result(data, parents, bwd):
    """Wrap an op result, recording it if a tape is active and needed."""
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.node = len(tape._recs)
        out.tape = tape
        tape._recs.append(_Record(out, parents, bwd))
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True, order="C")
    else:
        t.grad += g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b):
    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _result(a.data + b.data, (a, b), bwd)


def sub(a, b):
    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, -_unbroadcast(g, b.data.shape))

    return _result(a.data - b.data, (a, b), bwd)


def mul(a, b):
    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(a.data * b.data, (a, b), bwd)


def scale(a, c):
    c = float(c)

    def bwd(g):
        _accum(a, g * c)

    return _result(a.data * c, (a,), bwd)


def matmul(a, b):
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise UsageError("matmul operands must have ndim >= 2")

    def bwd(g):
        _accum(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        _accum(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    return _result(a.data @ b.data, (a, b), bwd)


def transpose(a, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        _accum(a, np.transpose(g, inv))

    return _result(np.transpose(a.data, axes), (a,), bwd)


def reshape(a, shape):
    shape = tuple(shape)
    orig = a.data.shape

    def bwd(g):
        _accum(a, g.reshape(orig))

    return _result(a.data.reshape(shape), (a,), bwd)


def getitem(a, key):
    def bwd(g):
        buf = np.zeros_like(a.data)
        buf[key] += g
        _accum(a, buf)

    return _result(a.data[key], (a,), bwd)


def concat(tensors, axis=0):
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _result(np.concatenate([t.data for t in tensors], axis=axis),
                   tuple(tensors), bwd)


def embedding(table, ids):
    """Row gather from a (V, D) table; ids is an int array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    d = table.data.shape[1]

    def bwd(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        K.embedding_bwd(table.grad, ids.reshape(-1),
                        np.ascontiguousarray(g.reshape(-1, d)))

    return _result(table.data[ids], (table,), bwd)


def reduce_sum(a, axis=None, keepdims=False):
    if axis is not None and not isinstance(axis, tuple):
        axis = (axis,)

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.data.shape))

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def reduce_mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))])
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def relu(a):
    mask = a.data > 0

    def bwd(g):
        _accum(a, g * mask)

    return _result(np.where(mask, a.data, 0.0), (a,), bwd)


def sigmoid(a):
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        _accum(a, g * y * (1.0 - y))

    return _result(y, (a,), bwd)


def softmax(a):
    """Softmax over the last axis; rejects non-finite inputs."""
    if not np.isfinite(a.data).all():
        raise NumericError("softmax: non-finite input")
    shape = a.data.shape
    x2 = np.ascontiguousarray(a.data.reshape(-1, shape[-1]))
    y2 = K.softmax_fwd(x2)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, shape[-1]))
        _accum(a, K.softmax_bwd(g2, y2).reshape(shape))

    return _result(y2.reshape(shape), (a,), bwd)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis, then apply per-feature gain and bias."""
    shape = x.data.shape
    x2 = np.ascontiguousarray(x.data.reshape(-1, shape[-1]))
    y2, mean, rstd = K.layernorm_fwd(x2, gain.data, bias.data, eps)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, shape[-1]))
        dx, dgain, dbias = K.layernorm_bwd(g2, x2, gain.data, mean, rstd)
        _accum(x, dx.reshape(shape))
        _accum(gain, dgain)
        _accum(bias, dbias)

    return _result(y2.reshape(shape), (x, gain, bias), bwd)


def dropout(a, p, rng):
    """Inverted dropout; a no-op when p == 0."""
    if p <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= p)
    factor = keep.astype(a.data.dtype) / (1.0 - p)

    def bwd(g):
        _accum(a, g * factor)

    return _result(a.data * factor, (a,), bwd)


def token_nll(logits, targets):
    """Per-position negative log likelihood, shape (N,) from (N, V) logits."""
    targets = np.asarray(targets, dtype=np.int64)
    l2 = np.ascontiguousarray(logits.data)
    nll, probs = K.token_nll_fwd(l2, targets)

    def bwd(g):
        _accum(logits, K.token_nll_bwd(np.ascontiguousarray(g), probs, targets))

    return _result(nll, (logits,), bwd)


def binary_logistic(logits, labels):
    """Per-element logistic loss from raw scores; labels in {0, 1}.

    Stable form: max(z, 0) - z*y + log1p(exp(-|z|)).
    """
    labels = np.asarray(labels, dtype=logits.data.dtype)
    z = logits.data
    sig = 1.0 / (1.0 + np.exp(-z))

    def bwd(g):
        _accum(logits, g * (sig - labels))

    loss = np.maximum(z, 0.0) - z * labels + np.log1p(np.exp(-np.abs(z)))
    return _result(loss, (logits,), bwd)


def grad_reverse(x):
    """Identity forward; multiplies the incoming gradient by -1."""

    def bwd(g):
        _accum(x, -g)

    return _result(x.data, (x,), bwd)


def cross_entropy(logits, targets, pad_mask=None):
    """Mean NLL over non-padded positions of a (T, V) logit matrix.

    pad_mask is True at real positions; raises InvalidBatchError when every
    position is padded.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if pad_mask is None:
        pad_mask = np.ones(targets.shape, dtype=bool)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    count = int(pad_mask.sum())
    if count == 0:
        raise InvalidBatchError("cross_entropy: all positions padded")
    nll = token_nll(logits, np.where(pad_mask, targets, 0))
    masked = mul(nll, Tensor(pad_mask.astype(logits.data.dtype)))
    return scale(reduce_sum(masked), 1.0 / count)
