"""Parameter-holding building blocks: linear maps, two-layer MLPs, a GRU cell.

Every block exposes params(prefix) -> {dotted name: Tensor} so the model
can hand one flat, deterministically ordered dict to the optimizer and
checkpointer.
"""

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _glorot(rng, fan_in, fan_out):
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


def make_param(rng, shape):
    if len(shape) == 1:
        return Tensor(np.zeros(shape), requires_grad=True)
    return Tensor(_glorot(rng, *shape), requires_grad=True)


class Linear:
    def __init__(self, rng, d_in, d_out):
        self.w = make_param(rng, (d_in, d_out))
        self.b = make_param(rng, (d_out,))

    def __call__(self, x):
        return T.affine(x, self.w, self.b)

    def params(self, prefix):
        return {prefix + ".w": self.w, prefix + ".b": self.b}


class MLP:
    """affine -> tanh -> affine"""

    def __init__(self, rng, d_in, d_hidden, d_out):
        self.inner = Linear(rng, d_in, d_hidden)
        self.outer = Linear(rng, d_hidden, d_out)

    def __call__(self, x):
        return self.outer(self.inner(x).tanh())

    def params(self, prefix):
        out = self.inner.params(prefix + ".inner")
        out.update(self.outer.params(prefix + ".outer"))
        return out


class GRUCell:
    def __init__(self, rng, d_in, d_hidden):
        self.d_hidden = d_hidden
        self.wz = make_param(rng, (d_in, d_hidden))
        self.uz = make_param(rng, (d_hidden, d_hidden))
        self.bz = make_param(rng, (d_hidden,))
        self.wr = make_param(rng, (d_in, d_hidden))
        self.ur = make_param(rng, (d_hidden, d_hidden))
        self.br = make_param(rng, (d_hidden,))
        self.wn = make_param(rng, (d_in, d_hidden))
        self.un = make_param(rng, (d_hidden, d_hidden))
        self.bn = make_param(rng, (d_hidden,))

    def initial_state(self):
        return Tensor(np.zeros((1, self.d_hidden)))

    def __call__(self, x, h):
        return T.gru_cell(x, h, self.wz, self.uz, self.bz,
                          self.wr, self.ur, self.br,
                          self.wn, self.un, self.bn)

    def params(self, prefix):
        names = ("wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn")
        return {"%s.%s" % (prefix, n): getattr(self, n) for n in names}
