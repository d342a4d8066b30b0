"""Shared test utilities: finite-difference gradient checking.

The numeric oracle is intentionally independent of the tape: it re-runs
the forward function around perturbed parameter entries and compares
central differences against the recorded analytic gradients.
"""

import numpy as np

from dams.engine import Tape


def numeric_grad(f, arr, coords, h):
    """Central-difference gradient of scalar f() w.r.t. arr at coords."""
    flat = arr.reshape(-1)
    grads = []
    for c in coords:
        orig = flat[c]
        flat[c] = orig + h
        up = f()
        flat[c] = orig - h
        down = f()
        flat[c] = orig
        grads.append((up - down) / (2.0 * h))
    return np.array(grads)


def rel_error(analytic, numeric):
    """Max |a-n| scaled by the largest gradient magnitude (floor 1)."""
    denom = max(1.0, float(np.abs(numeric).max(initial=0.0)),
                float(np.abs(analytic).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / denom


def check_gradients(build, params, h=1e-5, tol=1e-4, max_coords=None, seed=0):
    """Assert analytic grads of build() match central differences.

    build() must construct the loss tensor from `params` (list of Tensors)
    and be deterministic. With max_coords set, a seeded subset of each
    tensor's entries is checked; otherwise all entries are.
    Returns the worst relative error seen.
    """
    with Tape() as tape:
        loss = build()
        tape.backward(loss, params=params)
    rng = np.random.default_rng(seed)
    worst = 0.0

    def run():
        with Tape():
            return build().item()

    for p in params:
        n = p.data.size
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = np.arange(n)
        numeric = numeric_grad(run, p.data, coords, h)
        analytic = p.grad.reshape(-1)[coords]
        err = rel_error(analytic, numeric)
        worst = max(worst, err)
        assert err <= tol, f"gradient mismatch: rel err {err:.3e} > {tol}"
    return worst
