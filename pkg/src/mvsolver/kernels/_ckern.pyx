# Compiled kernel backend.  Mirrors pyref.py function for function; the
# matmuls go through BLAS dgemm and the elementwise parts are fused loops.
#
# All dgemm calls use the row-major/column-major swap: a row-major buffer
# viewed column-major is the transpose, so row-major C = op(A) op(B) is
# computed as column-major C^T = op(B)^T op(A)^T.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh as ctanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ctypedef cnp.float64_t f64


cdef void _gemm_nn(f64[:, ::1] a, f64[:, ::1] b, f64[:, ::1] c) noexcept nogil:
    # c (m,n) = a (m,k) @ b (k,n)
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef f64 one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, &b[0, 0], &n, &a[0, 0], &k,
          &zero, &c[0, 0], &n)


cdef void _gemm_nt(f64[:, ::1] a, f64[:, ::1] b, f64[:, ::1] c) noexcept nogil:
    # c (m,n) = a (m,k) @ b.T, b stored (n,k)
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    cdef f64 one = 1.0, zero = 0.0
    dgemm("T", "N", &n, &m, &k, &one, &b[0, 0], &k, &a[0, 0], &k,
          &zero, &c[0, 0], &n)


cdef void _gemm_tn(f64[:, ::1] a, f64[:, ::1] b, f64[:, ::1] c) noexcept nogil:
    # c (k,n) = a.T @ b, a stored (m,k), b stored (m,n)
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef f64 one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &k, &m, &one, &b[0, 0], &n, &a[0, 0], &k,
          &zero, &c[0, 0], &n)


def matmul(cnp.ndarray a, cnp.ndarray b):
    cdef cnp.ndarray c = np.empty((a.shape[0], b.shape[1]))
    _gemm_nn(a, b, c)
    return c


def matmul_bwd(cnp.ndarray a, cnp.ndarray b, cnp.ndarray g):
    cdef cnp.ndarray ga = np.empty_like(a)
    cdef cnp.ndarray gb = np.empty_like(b)
    _gemm_nt(g, b, ga)
    _gemm_tn(a, g, gb)
    return ga, gb


def affine(cnp.ndarray x, cnp.ndarray w, cnp.ndarray b):
    cdef cnp.ndarray y = np.empty((x.shape[0], w.shape[1]))
    cdef f64[:, ::1] yv = y
    cdef f64[::1] bv = b
    cdef Py_ssize_t i, j
    _gemm_nn(x, w, y)
    for i in range(yv.shape[0]):
        for j in range(yv.shape[1]):
            yv[i, j] += bv[j]
    return y


def affine_bwd(cnp.ndarray x, cnp.ndarray w, cnp.ndarray g):
    cdef cnp.ndarray gx = np.empty_like(x)
    cdef cnp.ndarray gw = np.empty_like(w)
    cdef cnp.ndarray gb = np.zeros(w.shape[1])
    cdef f64[:, ::1] gv = g
    cdef f64[::1] gbv = gb
    cdef Py_ssize_t i, j
    _gemm_nt(g, w, gx)
    _gemm_tn(x, g, gw)
    for i in range(gv.shape[0]):
        for j in range(gv.shape[1]):
            gbv[j] += gv[i, j]
    return gx, gw, gb


cdef inline f64 _sig(f64 v) noexcept nogil:
    return 1.0 / (1.0 + exp(-v))


def sigmoid(cnp.ndarray x):
    cdef cnp.ndarray y = np.empty_like(x)
    cdef f64[::1] xv = x.ravel(), yv = y.ravel()
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        yv[i] = _sig(xv[i])
    return y


def sigmoid_bwd(cnp.ndarray y, cnp.ndarray g):
    cdef cnp.ndarray out = np.empty_like(y)
    cdef f64[::1] yv = y.ravel(), gv = g.ravel(), ov = out.ravel()
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        ov[i] = gv[i] * yv[i] * (1.0 - yv[i])
    return out


def tanh(cnp.ndarray x):
    cdef cnp.ndarray y = np.empty_like(x)
    cdef f64[::1] xv = x.ravel(), yv = y.ravel()
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        yv[i] = ctanh(xv[i])
    return y


def tanh_bwd(cnp.ndarray y, cnp.ndarray g):
    cdef cnp.ndarray out = np.empty_like(y)
    cdef f64[::1] yv = y.ravel(), gv = g.ravel(), ov = out.ravel()
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        ov[i] = gv[i] * (1.0 - yv[i] * yv[i])
    return out


def relu(cnp.ndarray x):
    cdef cnp.ndarray y = np.empty_like(x)
    cdef f64[::1] xv = x.ravel(), yv = y.ravel()
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        yv[i] = xv[i] if xv[i] > 0.0 else 0.0
    return y


def relu_bwd(cnp.ndarray y, cnp.ndarray g):
    cdef cnp.ndarray out = np.empty_like(y)
    cdef f64[::1] yv = y.ravel(), gv = g.ravel(), ov = out.ravel()
    cdef Py_ssize_t i
    for i in range(yv.shape[0]):
        ov[i] = gv[i] if yv[i] > 0.0 else 0.0
    return out


def softmax_rows(cnp.ndarray x):
    cdef cnp.ndarray y = np.empty_like(x)
    cdef f64[:, ::1] xv = np.atleast_2d(x), yv = np.atleast_2d(y)
    cdef Py_ssize_t i, j
    cdef f64 mx, s
    for i in range(xv.shape[0]):
        mx = xv[i, 0]
        for j in range(1, xv.shape[1]):
            if xv[i, j] > mx:
                mx = xv[i, j]
        s = 0.0
        for j in range(xv.shape[1]):
            yv[i, j] = exp(xv[i, j] - mx)
            s += yv[i, j]
        for j in range(xv.shape[1]):
            yv[i, j] /= s
    return y


def softmax_rows_bwd(cnp.ndarray y, cnp.ndarray g):
    cdef cnp.ndarray out = np.empty_like(y)
    cdef f64[:, ::1] yv = np.atleast_2d(y), gv = np.atleast_2d(g)
    cdef f64[:, ::1] ov = np.atleast_2d(out)
    cdef Py_ssize_t i, j
    cdef f64 dot
    for i in range(yv.shape[0]):
        dot = 0.0
        for j in range(yv.shape[1]):
            dot += gv[i, j] * yv[i, j]
        for j in range(yv.shape[1]):
            ov[i, j] = yv[i, j] * (gv[i, j] - dot)
    return out


def gru_cell(cnp.ndarray x, cnp.ndarray h,
             cnp.ndarray wz, cnp.ndarray uz, cnp.ndarray bz,
             cnp.ndarray wr, cnp.ndarray ur, cnp.ndarray br,
             cnp.ndarray wn, cnp.ndarray un, cnp.ndarray bn):
    cdef Py_ssize_t rows = x.shape[0], dh = h.shape[1]
    cdef cnp.ndarray z = np.empty((rows, dh)), r = np.empty((rows, dh))
    cdef cnp.ndarray n = np.empty((rows, dh)), rh = np.empty((rows, dh))
    cdef cnp.ndarray h2 = np.empty((rows, dh))
    cdef cnp.ndarray tz = np.empty((rows, dh)), tr = np.empty((rows, dh))
    cdef cnp.ndarray tn_ = np.empty((rows, dh)), tmp = np.empty((rows, dh))
    cdef f64[:, ::1] zv = z, rv = r, nv = n, rhv = rh, h2v = h2, hv = h
    cdef f64[:, ::1] tzv = tz, trv = tr, tnv = tn_, tmpv = tmp
    cdef f64[::1] bzv = bz, brv = br, bnv = bn
    cdef Py_ssize_t i, j

    _gemm_nn(x, wz, tz)
    _gemm_nn(h, uz, tmp)
    for i in range(rows):
        for j in range(dh):
            zv[i, j] = _sig(tzv[i, j] + tmpv[i, j] + bzv[j])
    _gemm_nn(x, wr, tr)
    _gemm_nn(h, ur, tmp)
    for i in range(rows):
        for j in range(dh):
            rv[i, j] = _sig(trv[i, j] + tmpv[i, j] + brv[j])
            rhv[i, j] = rv[i, j] * hv[i, j]
    _gemm_nn(x, wn, tn_)
    _gemm_nn(rh, un, tmp)
    for i in range(rows):
        for j in range(dh):
            nv[i, j] = ctanh(tnv[i, j] + tmpv[i, j] + bnv[j])
            h2v[i, j] = (1.0 - zv[i, j]) * hv[i, j] + zv[i, j] * nv[i, j]
    return h2, z, r, n, rh


def gru_cell_bwd(cnp.ndarray x, cnp.ndarray h,
                 cnp.ndarray z, cnp.ndarray r, cnp.ndarray n, cnp.ndarray rh,
                 cnp.ndarray wz, cnp.ndarray uz,
                 cnp.ndarray wr, cnp.ndarray ur,
                 cnp.ndarray wn, cnp.ndarray un, cnp.ndarray g):
    cdef Py_ssize_t rows = x.shape[0], dh = h.shape[1], dx = x.shape[1]
    cdef cnp.ndarray dz = np.empty((rows, dh)), dr = np.empty((rows, dh))
    cdef cnp.ndarray dn = np.empty((rows, dh)), gh = np.empty((rows, dh))
    cdef cnp.ndarray drh = np.empty((rows, dh)), tmp = np.empty((rows, dh))
    cdef cnp.ndarray tmpx = np.empty((rows, dx))
    cdef cnp.ndarray gx = np.zeros((rows, dx))
    cdef f64[:, ::1] dzv = dz, drv = dr, dnv = dn, ghv = gh, drhv = drh
    cdef f64[:, ::1] gv = g, zv = z, rv = r, nv = n, hv = h, tmpv = tmp
    cdef f64[:, ::1] gxv = gx, tmpxv = tmpx
    cdef Py_ssize_t i, j

    # dn_pre lands in dn, dz_pre in dz, dr_pre in dr
    for i in range(rows):
        for j in range(dh):
            dzv[i, j] = gv[i, j] * (nv[i, j] - hv[i, j])
            dnv[i, j] = gv[i, j] * zv[i, j] * (1.0 - nv[i, j] * nv[i, j])
            ghv[i, j] = gv[i, j] * (1.0 - zv[i, j])
    _gemm_nt(dn, un, drh)
    for i in range(rows):
        for j in range(dh):
            ghv[i, j] += drhv[i, j] * rv[i, j]
            drv[i, j] = (drhv[i, j] * hv[i, j]) * rv[i, j] * (1.0 - rv[i, j])
            dzv[i, j] = dzv[i, j] * zv[i, j] * (1.0 - zv[i, j])

    _gemm_nt(dz, wz, tmpx)
    for i in range(rows):
        for j in range(dx):
            gxv[i, j] += tmpxv[i, j]
    _gemm_nt(dr, wr, tmpx)
    for i in range(rows):
        for j in range(dx):
            gxv[i, j] += tmpxv[i, j]
    _gemm_nt(dn, wn, tmpx)
    for i in range(rows):
        for j in range(dx):
            gxv[i, j] += tmpxv[i, j]

    _gemm_nt(dz, uz, tmp)
    for i in range(rows):
        for j in range(dh):
            ghv[i, j] += tmpv[i, j]
    _gemm_nt(dr, ur, tmp)
    for i in range(rows):
        for j in range(dh):
            ghv[i, j] += tmpv[i, j]

    cdef cnp.ndarray gwz = np.empty_like(wz), guz = np.empty_like(uz)
    cdef cnp.ndarray gwr = np.empty_like(wr), gur = np.empty_like(ur)
    cdef cnp.ndarray gwn = np.empty_like(wn), gun = np.empty_like(un)
    _gemm_tn(x, dz, gwz)
    _gemm_tn(h, dz, guz)
    _gemm_tn(x, dr, gwr)
    _gemm_tn(h, dr, gur)
    _gemm_tn(x, dn, gwn)
    _gemm_tn(rh, dn, gun)
    return (gx, gh, gwz, guz, np.asarray(dz).sum(axis=0),
            gwr, gur, np.asarray(dr).sum(axis=0),
            gwn, gun, np.asarray(dn).sum(axis=0))
