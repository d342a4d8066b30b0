# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernel core.

Mirrors the signatures in dams.engine.kernels_py; fused loops avoid the
temporaries and per-call overhead of the numpy versions, which matters at
the small tensor sizes this project trains with.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport exp, log, sqrt


ctypedef fused real:
    float
    double


def layernorm_fwd(real[:, ::1] x, real[::1] gain, real[::1] bias, double eps):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    dtype = np.float32 if real is float else np.float64
    y_arr = np.empty((n, d), dtype=dtype)
    mean_arr = np.empty(n, dtype=dtype)
    rstd_arr = np.empty(n, dtype=dtype)
    cdef real[:, ::1] y = y_arr
    cdef real[::1] mean = mean_arr
    cdef real[::1] rstd = rstd_arr
    cdef Py_ssize_t i, j
    cdef double mu, var, diff, r
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += x[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            diff = x[i, j] - mu
            var += diff * diff
        var /= d
        r = 1.0 / sqrt(var + eps)
        mean[i] = <real> mu
        rstd[i] = <real> r
        for j in range(d):
            y[i, j] = <real> ((x[i, j] - mu) * r * gain[j] + bias[j])
    return y_arr, mean_arr, rstd_arr


def layernorm_bwd(real[:, ::1] g, real[:, ::1] x, real[::1] gain,
                  real[::1] mean, real[::1] rstd):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.empty((n, d), dtype=dtype)
    dgain_arr = np.zeros(d, dtype=dtype)
    dbias_arr = np.zeros(d, dtype=dtype)
    cdef real[:, ::1] dx = dx_arr
    cdef real[::1] dgain = dgain_arr
    cdef real[::1] dbias = dbias_arr
    cdef Py_ssize_t i, j
    cdef double m1, m2, xhat, gx, r, mu
    for i in range(n):
        mu = mean[i]
        r = rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            gx = g[i, j] * gain[j]
            m1 += gx
            m2 += gx * xhat
            dgain[j] += <real> (g[i, j] * xhat)
            dbias[j] += g[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            gx = g[i, j] * gain[j]
            dx[i, j] = <real> ((gx - m1 - xhat * m2) * r)
    return dx_arr, dgain_arr, dbias_arr


def softmax_fwd(real[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    dtype = np.float32 if real is float else np.float64
    y_arr = np.empty((n, d), dtype=dtype)
    cdef real[:, ::1] y = y_arr
    cdef Py_ssize_t i, j
    cdef double mx, s, e
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, d):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(d):
            e = exp(x[i, j] - mx)
            y[i, j] = <real> e
            s += e
        for j in range(d):
            y[i, j] = <real> (y[i, j] / s)
    return y_arr


def softmax_bwd(real[:, ::1] g, real[:, ::1] y):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t d = y.shape[1]
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.empty((n, d), dtype=dtype)
    cdef real[:, ::1] dx = dx_arr
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += g[i, j] * y[i, j]
        for j in range(d):
            dx[i, j] = <real> (y[i, j] * (g[i, j] - dot))
    return dx_arr


def token_nll_fwd(real[:, ::1] logits, cnp.int64_t[::1] targets):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t v = logits.shape[1]
    dtype = np.float32 if real is float else np.float64
    nll_arr = np.empty(n, dtype=dtype)
    probs_arr = np.empty((n, v), dtype=dtype)
    cdef real[::1] nll = nll_arr
    cdef real[:, ::1] probs = probs_arr
    cdef Py_ssize_t i, j
    cdef double mx, s, e
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, v):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(v):
            e = exp(logits[i, j] - mx)
            probs[i, j] = <real> e
            s += e
        for j in range(v):
            probs[i, j] = <real> (probs[i, j] / s)
        nll[i] = <real> (-log(<double> probs[i, targets[i]]))
    return nll_arr, probs_arr


def token_nll_bwd(real[::1] g, real[:, ::1] probs, cnp.int64_t[::1] targets):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t v = probs.shape[1]
    dtype = np.float32 if real is float else np.float64
    dl_arr = np.empty((n, v), dtype=dtype)
    cdef real[:, ::1] dl = dl_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(v):
            dl[i, j] = <real> (probs[i, j] * g[i])
        dl[i, targets[i]] -= g[i]
    return dl_arr


def adam_update(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
        m[i] = <real> mi
        v[i] = <real> vi
        p[i] -= <real> (lr * (mi / bc1) / (sqrt(vi / bc2) + eps))


def embedding_bwd(real[:, ::1] dtable, cnp.int64_t[::1] ids, real[:, ::1] g):
    cdef Py_ssize_t n = ids.shape[0]
    cdef Py_ssize_t d = dtable.shape[1]
    cdef Py_ssize_t i, j, row
    for i in range(n):
        row = ids[i]
        for j in range(d):
            dtable[row, j] += g[i, j]
