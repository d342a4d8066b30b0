"""Adam with named parameter groups and a warmup/inverse-sqrt schedule."""

import math

import numpy as np

from ..errors import ConfigError, UsageError
from .backend import kernels as K


class LrSchedule:
    """Linear ramp to base_lr over warmup steps, then base*sqrt(warmup/step).

    Continuous at step == warmup. Each group carries its own base rate and
    (optionally) its own warmup length.
    """

    def __init__(self, base_lrs, warmup_steps):
        self.base_lrs = dict(base_lrs)
        if isinstance(warmup_steps, int):
            warmup_steps = {g: warmup_steps for g in self.base_lrs}
        self.warmup_steps = dict(warmup_steps)
        for g, w in self.warmup_steps.items():
            if w < 1:
                raise ConfigError(f"warmup for group {g!r} must be >= 1")

    def lr_at(self, step, group):
        if step < 1:
            raise UsageError("schedule steps are 1-based")
        base = self.base_lrs[group]
        w = self.warmup_steps[group]
        return base * min(step / w, math.sqrt(w / step))


class Adam:
    """Standard Adam with bias correction; one shared step counter.

    Gradients are left untouched by `step` (the trainer clears them), and a
    missing gradient is an error rather than a silent skip.
    """

    def __init__(self, groups, schedule, beta1=0.9, beta2=0.999, eps=1e-8):
        self.groups = {g: list(params) for g, params in groups.items()}
        self.schedule = schedule
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}
        for gname, params in self.groups.items():
            for pname, p in params:
                key = f"{gname}.{pname}"
                self.m[key] = np.zeros_like(p.data)
                self.v[key] = np.zeros_like(p.data)

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for gname, params in self.groups.items():
            lr = self.schedule.lr_at(self.t, gname)
            for pname, p in params:
                if p.grad is None:
                    raise UsageError(f"missing grad for {gname}.{pname}")
                key = f"{gname}.{pname}"
                K.adam_update(p.data.reshape(-1),
                              np.ascontiguousarray(p.grad.reshape(-1)),
                              self.m[key].reshape(-1), self.v[key].reshape(-1),
                              lr, self.beta1, self.beta2, self.eps, bc1, bc2)

    def zero_grad(self):
        for params in self.groups.values():
            for _, p in params:
                p.grad = None


def clip_grad_norm(params, max_norm):
    """Scale grads of one group so their joint L2 norm is <= max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm
