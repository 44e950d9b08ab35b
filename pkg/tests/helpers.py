"""Shared finite-difference gradient checker.

Central differences with h=1e-5; errors are relative to
max(1, |analytic|, |numeric|) so tiny gradients aren't held to an
impossible absolute standard.
"""

import numpy as np

from mvsolver.tensor import Tape


def numeric_grad(build, param, index, h=1e-5):
    flat = param.data.reshape(-1)
    old = flat[index]
    flat[index] = old + h
    fp = build().item()
    flat[index] = old - h
    fm = build().item()
    flat[index] = old
    return (fp - fm) / (2.0 * h)


def gradcheck(build, params, rng=None, n_coords=None, h=1e-5):
    """Max relative error between tape gradients and finite differences.

    build() must rebuild the scalar loss from the current parameter
    values.  n_coords, when given, samples that many coordinates per
    parameter instead of sweeping all of them.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        tape.backward(build())
    worst = 0.0
    for p in params:
        size = p.data.size
        if n_coords is None or n_coords >= size:
            idxs = range(size)
        else:
            idxs = sorted(rng.choice(size, size=n_coords, replace=False))
        for i in idxs:
            num = numeric_grad(build, p, i, h)
            ana = p.grad.reshape(-1)[i]
            err = abs(ana - num) / max(1.0, abs(ana), abs(num))
            worst = max(worst, err)
    return worst
