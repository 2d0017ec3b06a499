# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels (see `pure` for the reference
semantics). Numerical core routines written in pyx-format; accumulation
orders match the pure backend so the two agree to rounding."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, sqrt

cnp.import_array()


def elu_forward(object x_obj):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(x_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty_like(x)
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    cdef double v
    for i in range(n):
        for j in range(m):
            v = x[i, j]
            out[i, j] = v if v > 0.0 else expm1(v)
    return out


def elu_backward(object x_obj, object grad_obj):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(x_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.ascontiguousarray(grad_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty_like(x)
    cdef Py_ssize_t i, j, n = x.shape[0], m = x.shape[1]
    cdef double v
    for i in range(n):
        for j in range(m):
            v = x[i, j]
            out[i, j] = g[i, j] * (1.0 if v > 0.0 else exp(v))
    return out


def adam_update(object p_obj, object g_obj, object m_obj, object v_obj,
                long step, double lr, double beta1, double beta2, double eps):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = p_obj
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.ascontiguousarray(g_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] m = m_obj
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v = v_obj
    cdef Py_ssize_t i, j, n = p.shape[0], d = p.shape[1]
    cdef double c1 = 1.0 - beta1 ** step
    cdef double c2 = 1.0 - beta2 ** step
    cdef double gv, mhat, vhat
    for i in range(n):
        for j in range(d):
            gv = g[i, j]
            m[i, j] = beta1 * m[i, j] + (1.0 - beta1) * gv
            v[i, j] = beta2 * v[i, j] + (1.0 - beta2) * (gv * gv)
            mhat = m[i, j] / c1
            vhat = v[i, j] / c2
            p[i, j] = p[i, j] - lr * mhat / (sqrt(vhat) + eps)


def pairwise_sqdist(object a_obj, object b_obj):
    # Norm-expansion form (matching the pure backend) with BLAS for the
    # cross term; the elementwise assembly is the compiled part.
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(a_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(b_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.dot(a, b.T)
    cdef Py_ssize_t i, j, n = a.shape[0], m = b.shape[0], dim = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aa = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bb = np.empty(m)
    cdef double acc, val
    for i in range(n):
        acc = 0.0
        for j in range(dim):
            acc += a[i, j] * a[i, j]
        aa[i] = acc
    for i in range(m):
        acc = 0.0
        for j in range(dim):
            acc += b[i, j] * b[i, j]
        bb[i] = acc
    for i in range(n):
        for j in range(m):
            val = aa[i] + bb[j] - 2.0 * d[i, j]
            d[i, j] = val if val > 0.0 else 0.0
    return d


def pairwise_sqdist_backward(object a_obj, object b_obj, object grad_obj):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(a_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(b_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.ascontiguousarray(grad_obj)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rs = np.empty(a.shape[0])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cs = np.empty(b.shape[0])
    cdef Py_ssize_t i, j, n = a.shape[0], m = b.shape[0]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += g[i, j]
        rs[i] = acc
    for j in range(m):
        acc = 0.0
        for i in range(n):
            acc += g[i, j]
        cs[j] = acc
    ga = 2.0 * (rs[:, None] * a - np.dot(g, b))
    gb = 2.0 * (cs[:, None] * b - np.dot(g.T, a))
    return ga, gb


def sinkhorn_plan(object cost_obj, double eps, long iterations):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cost = np.ascontiguousarray(cost_obj)
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] K = np.empty((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.full(m, 1.0 / m)
    cdef double a = 1.0 / n, b = 1.0 / m
    cdef Py_ssize_t i, j, it
    cdef double acc
    for i in range(n):
        for j in range(m):
            K[i, j] = exp(-cost[i, j] / eps)
    for it in range(iterations):
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += K[i, j] * v[j]
            u[i] = a / acc
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += K[i, j] * u[i]
            v[j] = b / acc
    cdef cnp.ndarray[cnp.float64_t, ndim=2] plan = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            plan[i, j] = u[i] * K[i, j] * v[j]
    return plan


def nearest_centroid(object p_obj, object c_obj):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = pairwise_sqdist(p_obj, c_obj)
    cdef Py_ssize_t i, j, n = d.shape[0], k = d.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best = np.empty(n)
    cdef double bv
    cdef Py_ssize_t bj
    for i in range(n):
        bv = d[i, 0]
        bj = 0
        for j in range(1, k):
            if d[i, j] < bv:
                bv = d[i, j]
                bj = j
        labels[i] = bj
        best[i] = bv
    return labels, best


def group_sums(object p_obj, object l_obj, long k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(p_obj)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.ascontiguousarray(l_obj, dtype=np.int64)
    cdef Py_ssize_t i, j, n = p.shape[0], dim = p.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sums = np.zeros((k, dim))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] counts = np.zeros(k)
    cdef Py_ssize_t lab
    for i in range(n):
        lab = labels[i]
        counts[lab] += 1.0
        for j in range(dim):
            sums[lab, j] += p[i, j]
    return sums, counts
