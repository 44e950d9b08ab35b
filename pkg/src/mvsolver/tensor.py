"""Dense float64 tensors with reverse-mode autodiff on a dynamic tape.

The tape records (output, backward-closure) pairs in construction order
and replays the closures in exact reverse order.  Gradient buffers are
preallocated for every tensor that requires grad; backward() resets the
buffers of recorded (non-leaf) outputs and accumulates into leaves, so
calling backward twice without zeroing doubles leaf gradients exactly.

No broadcasting: shapes must conform, mismatches raise ShapeError.
"""

import numpy as np

from .kernels import impl as K


class ShapeError(ValueError):
    pass


class NumericsError(ArithmeticError):
    """Raised when NaN/Inf shows up where finite values are required."""


_ACTIVE_TAPE = None


class Tape:
    """Records one episode's computation; usable as a context manager."""

    def __init__(self):
        self._records = []

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a tape is already active")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out, fn):
        self._records.append((out, fn))

    def backward(self, loss):
        """Populate grads of everything loss depends on.

        Non-leaf grads are cleared first, then the scalar seed is pushed
        back through the closures in reverse construction order.  Leaf
        grads are left to accumulate across calls.
        """
        if loss.data.size != 1:
            raise ShapeError("backward needs a scalar loss, got shape %s"
                             % (loss.shape,))
        for out, _ in self._records:
            out.grad[...] = 0.0
        if loss.grad is None:
            return
        loss.grad[...] = 1.0
        for out, fn in reversed(self._records):
            fn()


def _tape():
    return _ACTIVE_TAPE


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (
            self.shape, self.requires_grad)

    def all_finite(self):
        return bool(np.isfinite(self.data).all())

    def check_finite(self, what="tensor"):
        if not self.all_finite():
            raise NumericsError("non-finite values in %s" % what)
        return self

    def item(self):
        if self.data.size != 1:
            raise ShapeError("item() needs a single element, got shape %s"
                             % (self.shape,))
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other, self.shape)
        _same_shape(self, other, "add")
        out = _out(self.data + other.data, self, other)

        def back():
            if self.requires_grad:
                self.grad += out.grad
            if other.requires_grad:
                other.grad += out.grad
        _rec(out, back)
        return out

    def __sub__(self, other):
        other = _as_tensor(other, self.shape)
        _same_shape(self, other, "sub")
        out = _out(self.data - other.data, self, other)

        def back():
            if self.requires_grad:
                self.grad += out.grad
            if other.requires_grad:
                other.grad -= out.grad
        _rec(out, back)
        return out

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        _same_shape(self, other, "mul")
        out = _out(self.data * other.data, self, other)

        def back():
            if self.requires_grad:
                self.grad += out.grad * other.data
            if other.requires_grad:
                other.grad += out.grad * self.data
        _rec(out, back)
        return out

    __rmul__ = __mul__
    __radd__ = __add__

    def __rsub__(self, other):
        return (-self) + other

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(1.0 / float(other))
        _same_shape(self, other, "div")
        out = _out(self.data / other.data, self, other)

        def back():
            if self.requires_grad:
                self.grad += out.grad / other.data
            if other.requires_grad:
                other.grad -= out.grad * out.data / other.data
        _rec(out, back)
        return out

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c):
        out = _out(self.data * c, self)

        def back():
            if self.requires_grad:
                self.grad += out.grad * c
        _rec(out, back)
        return out

    # -- activations -----------------------------------------------------

    def sigmoid(self):
        y = K.sigmoid(self.data)
        out = _out(y, self)

        def back():
            if self.requires_grad:
                self.grad += K.sigmoid_bwd(out.data, out.grad)
        _rec(out, back)
        return out

    def tanh(self):
        y = K.tanh(self.data)
        out = _out(y, self)

        def back():
            if self.requires_grad:
                self.grad += K.tanh_bwd(out.data, out.grad)
        _rec(out, back)
        return out

    def relu(self):
        y = K.relu(self.data)
        out = _out(y, self)

        def back():
            if self.requires_grad:
                self.grad += K.relu_bwd(out.data, out.grad)
        _rec(out, back)
        return out

    def softmax(self, axis=-1):
        if axis not in (-1, self.data.ndim - 1):
            raise ShapeError("softmax only supports the last axis")
        if self.data.shape[-1] == 0:
            raise ShapeError("softmax over an empty axis")
        y = K.softmax_rows(self.data)
        out = _out(y, self)

        def back():
            if self.requires_grad:
                self.grad += K.softmax_rows_bwd(out.data, out.grad)
        _rec(out, back)
        return out

    def log(self):
        out = _out(np.log(self.data), self)

        def back():
            if self.requires_grad:
                self.grad += out.grad / self.data
        _rec(out, back)
        return out

    def sqrt(self):
        y = np.sqrt(self.data)
        out = _out(y, self)

        def back():
            if self.requires_grad:
                self.grad += out.grad / (2.0 * out.data)
        _rec(out, back)
        return out

    def clip(self, lo, hi):
        y = np.clip(self.data, lo, hi)
        out = _out(y, self)
        inside = (self.data > lo) & (self.data < hi)

        def back():
            if self.requires_grad:
                self.grad += np.where(inside, out.grad, 0.0)
        _rec(out, back)
        return out

    # -- reductions ------------------------------------------------------

    def sum(self):
        out = _out(np.asarray(self.data.sum()), self)

        def back():
            if self.requires_grad:
                self.grad += out.grad
        _rec(out, back)
        return out

    def mean(self):
        n = self.data.size
        out = _out(np.asarray(self.data.mean()), self)

        def back():
            if self.requires_grad:
                self.grad += out.grad / n
        _rec(out, back)
        return out

    def mean_rows(self):
        """(p, d) -> (1, d) column means."""
        p = self.data.shape[0]
        out = _out(self.data.mean(axis=0, keepdims=True), self)

        def back():
            if self.requires_grad:
                self.grad += out.grad / p
        _rec(out, back)
        return out

    # -- shape surgery ---------------------------------------------------

    def reshape(self, shape):
        out = _out(self.data.reshape(shape), self)

        def back():
            if self.requires_grad:
                self.grad += out.grad.reshape(self.data.shape)
        _rec(out, back)
        return out

    def transpose(self):
        if self.data.ndim != 2:
            raise ShapeError("transpose needs a 2-d tensor, got shape %s"
                             % (self.shape,))
        out = _out(self.data.T, self)

        def back():
            if self.requires_grad:
                self.grad += out.grad.T
        _rec(out, back)
        return out

    def narrow(self, axis, start, length):
        """Contiguous slice [start, start+length) along axis 0 or 1 of a 2-d tensor."""
        if self.data.ndim != 2 or axis not in (0, 1):
            raise ShapeError("narrow needs a 2-d tensor and axis 0/1")
        sl = (slice(start, start + length) if axis == 0
              else (slice(None), slice(start, start + length)))
        out = _out(self.data[sl], self)

        def back():
            if self.requires_grad:
                self.grad[sl] += out.grad
        _rec(out, back)
        return out

    def pick(self, index):
        """Scalar at a flat index."""
        flat = self.data.reshape(-1)
        if not 0 <= index < flat.size:
            raise ShapeError("pick index %d out of range for shape %s"
                             % (index, self.shape))
        out = _out(np.asarray(flat[index]), self)

        def back():
            if self.requires_grad:
                self.grad.reshape(-1)[index] += out.grad.reshape(())[()]
        _rec(out, back)
        return out


def _as_tensor(x, shape):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full(shape, float(x)))


def _same_shape(a, b, opname):
    if a.data.shape != b.data.shape:
        raise ShapeError("%s: shapes %s and %s do not match"
                         % (opname, a.data.shape, b.data.shape))


def _out(data, *inputs):
    t = Tensor.__new__(Tensor)
    t.data = np.ascontiguousarray(data, dtype=np.float64)
    t.requires_grad = any(i.requires_grad for i in inputs)
    t.grad = np.zeros_like(t.data) if t.requires_grad else None
    return t


def _rec(out, fn):
    tape = _tape()
    if tape is not None and out.requires_grad:
        tape.record(out, fn)


# -- multi-argument ops --------------------------------------------------

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError("matmul: shapes %s and %s do not conform"
                         % (a.data.shape, b.data.shape))
    out = _out(K.matmul(a.data, b.data), a, b)

    def back():
        ga, gb = K.matmul_bwd(a.data, b.data, out.grad)
        if a.requires_grad:
            a.grad += ga
        if b.requires_grad:
            b.grad += gb
    _rec(out, back)
    return out


def affine(x, w, b):
    """x @ w + b with b a (dout,) row bias."""
    if (x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1
            or x.data.shape[1] != w.data.shape[0]
            or w.data.shape[1] != b.data.shape[0]):
        raise ShapeError("affine: shapes %s, %s, %s do not conform"
                         % (x.data.shape, w.data.shape, b.data.shape))
    out = _out(K.affine(x.data, w.data, b.data), x, w, b)

    def back():
        gx, gw, gb = K.affine_bwd(x.data, w.data, out.grad)
        if x.requires_grad:
            x.grad += gx
        if w.requires_grad:
            w.grad += gw
        if b.requires_grad:
            b.grad += gb
    _rec(out, back)
    return out


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    nd = tensors[0].data.ndim
    if nd != 2 or axis not in (0, 1):
        raise ShapeError("concat needs 2-d tensors and axis 0/1")
    other = 1 - axis
    width = tensors[0].data.shape[other]
    for t in tensors[1:]:
        if t.data.ndim != nd or t.data.shape[other] != width:
            raise ShapeError("concat: shapes %s and %s do not align"
                             % (tensors[0].data.shape, t.data.shape))
    out = _out(np.concatenate([t.data for t in tensors], axis=axis), *tensors)
    sizes = [t.data.shape[axis] for t in tensors]

    def back():
        at = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                if axis == 0:
                    t.grad += out.grad[at:at + size]
                else:
                    t.grad += out.grad[:, at:at + size]
            at += size
    _rec(out, back)
    return out


def index_rows(table, indices):
    """Gather rows of a 2-d tensor; backward scatter-adds."""
    if table.data.ndim != 2:
        raise ShapeError("index_rows needs a 2-d table, got shape %s"
                         % (table.shape,))
    idx = np.asarray(indices, dtype=np.intp)
    out = _out(table.data[idx], table)

    def back():
        if table.requires_grad:
            np.add.at(table.grad, idx, out.grad)
    _rec(out, back)
    return out


def gru_cell(x, h, wz, uz, bz, wr, ur, br, wn, un, bn):
    """Fused gated recurrent step; see kernels.pyref.gru_cell."""
    params = (wz, uz, bz, wr, ur, br, wn, un, bn)
    h2, z, r, n, rh = K.gru_cell(x.data, h.data, *[p.data for p in params])
    out = _out(h2, x, h, *params)

    def back():
        grads = K.gru_cell_bwd(x.data, h.data, z, r, n, rh,
                               wz.data, uz.data, wr.data, ur.data,
                               wn.data, un.data, out.grad)
        for t, g in zip((x, h, wz, uz, bz, wr, ur, br, wn, un, bn), grads):
            if t.requires_grad:
                t.grad += g
    _rec(out, back)
    return out


def cosine_similarity(a, b, eps=1e-12):
    """Scalar cosine between two same-shape tensors (flattened)."""
    _same_shape(a, b, "cosine_similarity")
    num = (a * b).sum()
    den = (a * a).sum().sqrt() * (b * b).sum().sqrt() + eps
    return num / den


def backward(loss):
    tape = _tape()
    if tape is None:
        raise RuntimeError("backward() outside an active tape")
    tape.backward(loss)
