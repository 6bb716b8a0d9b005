# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the two hot loops: signed scatter-add and fused Adam."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def signed_scatter_add(double[:, ::1] out, const Py_ssize_t[::1] dst,
                       const Py_ssize_t[::1] src, const double[::1] w,
                       const double[:, ::1] x):
    """out[dst[k], :] += w[k] * x[src[k], :] for every k, in k order."""
    cdef Py_ssize_t k, j, n = dst.shape[0], d = out.shape[1]
    cdef Py_ssize_t s, t
    cdef double wk
    for k in range(n):
        s = src[k]
        t = dst[k]
        wk = w[k]
        for j in range(d):
            out[t, j] += wk * x[s, j]


def adam_update(double[::1] p, const double[::1] g, double[::1] m,
                double[::1] v, double lr, double beta1, double beta2,
                double eps, double bc1, double bc2):
    """One fused Adam step on flat arrays, in place.

    bc1 = 1 - beta1**t and bc2 = 1 - beta2**t are precomputed by the caller.
    """
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double gi, mh, vh
    for i in range(n):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        mh = m[i] / bc1
        vh = v[i] / bc2
        p[i] -= lr * mh / (sqrt(vh) + eps)
