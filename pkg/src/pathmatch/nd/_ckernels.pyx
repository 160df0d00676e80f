# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused elementwise ops, row softmax, scatter-add,
and the Adam update.  Mirrors the numpy fallback in _pykernels.py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, pow

cnp.import_array()


def relu_fwd(x):
    cdef cnp.ndarray xc = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray out = np.empty_like(xc)
    cdef double[::1] xv = xc.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] > 0.0 else 0.0
    return out


def relu_bwd(grad, out):
    cdef cnp.ndarray gc = np.ascontiguousarray(grad, dtype=np.float64)
    cdef cnp.ndarray yc = np.ascontiguousarray(out, dtype=np.float64)
    cdef cnp.ndarray res = np.empty_like(gc)
    cdef double[::1] gv = gc.ravel()
    cdef double[::1] yv = yc.ravel()
    cdef double[::1] rv = res.ravel()
    cdef Py_ssize_t i, n = gv.shape[0]
    for i in range(n):
        rv[i] = gv[i] if yv[i] > 0.0 else 0.0
    return res


def sigmoid_fwd(x):
    cdef cnp.ndarray xc = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray out = np.empty_like(xc)
    cdef double[::1] xv = xc.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double e
    for i in range(n):
        if xv[i] >= 0.0:
            ov[i] = 1.0 / (1.0 + exp(-xv[i]))
        else:
            e = exp(xv[i])
            ov[i] = e / (1.0 + e)
    return out


def sigmoid_bwd(grad, out):
    cdef cnp.ndarray gc = np.ascontiguousarray(grad, dtype=np.float64)
    cdef cnp.ndarray yc = np.ascontiguousarray(out, dtype=np.float64)
    cdef cnp.ndarray res = np.empty_like(gc)
    cdef double[::1] gv = gc.ravel()
    cdef double[::1] yv = yc.ravel()
    cdef double[::1] rv = res.ravel()
    cdef Py_ssize_t i, n = gv.shape[0]
    for i in range(n):
        rv[i] = gv[i] * yv[i] * (1.0 - yv[i])
    return res


def softmax_rows_fwd(x):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1]
    cdef cnp.ndarray out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    for i in range(n):
        mx = xv[i, 0]
        for j in range(1, m):
            if xv[i, j] > mx:
                mx = xv[i, j]
        s = 0.0
        for j in range(m):
            ov[i, j] = exp(xv[i, j] - mx)
            s += ov[i, j]
        for j in range(m):
            ov[i, j] /= s
    return out


def softmax_rows_bwd(grad, out):
    cdef double[:, ::1] gv = np.ascontiguousarray(grad, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(out, dtype=np.float64)
    cdef Py_ssize_t n = gv.shape[0], m = gv.shape[1]
    cdef cnp.ndarray res = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] rv = res
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(m):
            dot += gv[i, j] * yv[i, j]
        for j in range(m):
            rv[i, j] = yv[i, j] * (gv[i, j] - dot)
    return res


def scatter_add_rows(cnp.ndarray acc, idx, src):
    """acc[idx[i], :] += src[i, :] with repeated indices accumulated."""
    cdef double[:, ::1] av = acc
    cdef double[:, ::1] sv = np.ascontiguousarray(src, dtype=np.float64)
    cdef long[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t i, j, n = iv.shape[0], m = av.shape[1]
    cdef Py_ssize_t r
    for i in range(n):
        r = iv[i]
        for j in range(m):
            av[r, j] += sv[i, j]


def adam_update(cnp.ndarray param, grad, cnp.ndarray m, cnp.ndarray v,
                double lr, double beta1, double beta2, double eps, long step):
    """One fused in-place Adam update with bias correction."""
    cdef double[::1] pv = param.ravel()
    cdef double[::1] gv = np.ascontiguousarray(grad, dtype=np.float64).ravel()
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double bc1 = 1.0 - pow(beta1, step)
    cdef double bc2 = 1.0 - pow(beta2, step)
    cdef double mhat, vhat
    for i in range(n):
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i]
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gv[i] * gv[i]
        mhat = mv[i] / bc1
        vhat = vv[i] / bc2
        pv[i] -= lr * mhat / (sqrt(vhat) + eps)
