# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-major kernels for the triangular operator.

Each pass walks the rows once (backwards or forwards) while keeping one
running sum per feature, so the only auxiliary buffer is a length-D vector.
Summation order is fixed by the loop nest, which makes results bit-stable.
"""
import numpy as np

BLOCK_ROWS = 1


def operator_apply(const double[:, ::1] X, const double[::1] s, const double[::1] v):
    cdef Py_ssize_t n = X.shape[0], nd = X.shape[1]
    cdef Py_ssize_t i, d
    cdef double t, x, vi
    out_arr = np.empty(n)
    acc_arr = np.zeros(nd)
    cdef double[::1] out = out_arr
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n - 1, -1, -1):
            t = 0.0
            vi = v[i]
            for d in range(nd):
                x = X[i, d]
                t = t + s[d] * x * acc[d]
                acc[d] = acc[d] + x * vi
            out[i] = t
    return out_arr


def operator_apply_transpose(const double[:, ::1] X, const double[::1] s, const double[::1] v):
    cdef Py_ssize_t n = X.shape[0], nd = X.shape[1]
    cdef Py_ssize_t i, d
    cdef double t, x, vi
    out_arr = np.empty(n)
    acc_arr = np.zeros(nd)
    cdef double[::1] out = out_arr
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n):
            t = 0.0
            vi = v[i]
            for d in range(nd):
                x = X[i, d]
                t = t + s[d] * x * acc[d]
                acc[d] = acc[d] + x * vi
            out[i] = t
    return out_arr


def bilinear_accumulate(const double[:, ::1] X, const double[::1] w, const double[::1] u, out_arr):
    cdef Py_ssize_t n = X.shape[0], nd = X.shape[1]
    cdef Py_ssize_t i, d
    cdef double x, wi, ui
    acc_arr = np.zeros(nd)
    cdef double[::1] acc = acc_arr
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n - 1, -1, -1):
            wi = w[i]
            ui = u[i]
            for d in range(nd):
                x = X[i, d]
                out[d] = out[d] + wi * x * acc[d]
                acc[d] = acc[d] + x * ui
    return out_arr
