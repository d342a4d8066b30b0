"""Tensor engine: autodiff tape, kernels, optimizer, schedule."""

from .backend import backend_name, get_backend, kernels
from .optim import Adam, LrSchedule, clip_grad_norm
from .tensor import (DEFAULT_DTYPE, Tape, Tensor, add, binary_logistic,
                     concat, cross_entropy, dropout, embedding, getitem,
                     grad_reverse, layer_norm, matmul, mul, no_grad,
                     reduce_mean, reduce_sum, relu, reshape, scale, sigmoid,
                     softmax, sub, token_nll, transpose)

__all__ = [
    "DEFAULT_DTYPE", "Adam", "LrSchedule", "Tape", "Tensor", "add",
    "backend_name", "binary_logistic", "clip_grad_norm", "concat",
    "cross_entropy", "dropout", "embedding", "get_backend", "getitem",
    "grad_reverse", "kernels", "layer_norm", "matmul", "mul", "no_grad",
    "reduce_mean", "reduce_sum", "relu", "reshape", "scale", "sigmoid",
    "softmax", "sub", "token_nll", "transpose",
]
