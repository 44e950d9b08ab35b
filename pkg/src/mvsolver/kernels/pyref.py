"""Numpy implementation of the numeric kernels.

This is the portable fallback backend; the compiled extension in
``_ckern.pyx`` mirrors these signatures exactly.  All arrays are
C-contiguous float64.  Backward kernels take saved forward values, never
recompute activations.
"""

import numpy as np


def matmul(a, b):
    return a @ b


def matmul_bwd(a, b, g):
    return g @ b.T, a.T @ g


def affine(x, w, b):
    return x @ w + b


def affine_bwd(x, w, g):
    return g @ w.T, x.T @ g, g.sum(axis=0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def tanh(x):
    return np.tanh(x)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def relu(x):
    return np.maximum(x, 0.0)


def relu_bwd(y, g):
    return np.where(y > 0.0, g, 0.0)


def softmax_rows(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_bwd(y, g):
    dot = (g * y).sum(axis=-1, keepdims=True)
    return y * (g - dot)


def gru_cell(x, h, wz, uz, bz, wr, ur, br, wn, un, bn):
    """One gated recurrent step; returns the new state plus saved gates.

    x: (1, dx), h: (1, dh), w*: (dx, dh), u*: (dh, dh), b*: (dh,).
    The candidate state applies the reset gate to h before the recurrent
    matrix (n = tanh(x Wn + (r o h) Un + bn)).
    """
    z = sigmoid(x @ wz + h @ uz + bz)
    r = sigmoid(x @ wr + h @ ur + br)
    rh = r * h
    n = np.tanh(x @ wn + rh @ un + bn)
    h2 = (1.0 - z) * h + z * n
    return h2, z, r, n, rh


def gru_cell_bwd(x, h, z, r, n, rh, wz, uz, wr, ur, wn, un, g):
    """Gradients of one gated recurrent step.

    Returns (gx, gh, gwz, guz, gbz, gwr, gur, gbr, gwn, gun, gbn).
    """
    dz = g * (n - h)
    dn = g * z
    dh = g * (1.0 - z)

    dn_pre = dn * (1.0 - n * n)
    drh = dn_pre @ un.T
    dh = dh + drh * r
    dr = drh * h

    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)

    gx = dz_pre @ wz.T + dr_pre @ wr.T + dn_pre @ wn.T
    dh = dh + dz_pre @ uz.T + dr_pre @ ur.T

    gwz = x.T @ dz_pre
    guz = h.T @ dz_pre
    gwr = x.T @ dr_pre
    gur = h.T @ dr_pre
    gwn = x.T @ dn_pre
    gun = rh.T @ dn_pre
    return (gx, dh, gwz, guz, dz_pre.sum(axis=0), gwr, gur,
            dr_pre.sum(axis=0), gwn, gun, dn_pre.sum(axis=0))
