# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the sequential O(n) recurrences.

Everything here is a first-order scan that numpy cannot vectorize: the LDL^T
factorization of a symmetric tridiagonal matrix, forward/backward
substitution, the selected-inverse backward recursion, and the AR(1) state
scan.  The pure-Python twin lives in pncem.backends._ref.
"""

from libc.math cimport sqrt

import numpy as np

PIVOT_MIN = 1e-300


def ldl_factor(double[::1] diag, double[::1] off):
    """LDL^T pivots and multipliers; info > 0 flags pivot <= 1e-300 at info-1."""
    cdef Py_ssize_t n = diag.shape[0]
    d_arr = np.empty(n, dtype=np.float64)
    l_arr = np.empty(n - 1, dtype=np.float64)
    cdef double[::1] d = d_arr
    cdef double[::1] l = l_arr
    cdef Py_ssize_t t
    cdef int info = 0
    cdef double piv = diag[0]

    d[0] = piv
    if piv <= 1e-300:
        return d_arr, l_arr, 1
    for t in range(1, n):
        l[t - 1] = off[t - 1] / piv
        piv = diag[t] - l[t - 1] * off[t - 1]
        d[t] = piv
        if piv <= 1e-300:
            info = <int> t + 1
            break
    return d_arr, l_arr, info


def ldl_solve(double[::1] d, double[::1] l, double[::1] b):
    """Solve (L D L^T) x = b by forward/diagonal/backward sweeps."""
    cdef Py_ssize_t n = d.shape[0]
    x_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef Py_ssize_t t

    x[0] = b[0]
    for t in range(1, n):
        x[t] = b[t] - l[t - 1] * x[t - 1]
    for t in range(n):
        x[t] = x[t] / d[t]
    for t in range(n - 2, -1, -1):
        x[t] = x[t] - l[t] * x[t + 1]
    return x_arr


def selected_inverse(double[::1] d, double[::1] l):
    """Diagonal and first superdiagonal of (L D L^T)^{-1}, backward recursion."""
    cdef Py_ssize_t n = d.shape[0]
    sd_arr = np.empty(n, dtype=np.float64)
    so_arr = np.empty(n - 1, dtype=np.float64)
    cdef double[::1] sd = sd_arr
    cdef double[::1] so = so_arr
    cdef Py_ssize_t t

    sd[n - 1] = 1.0 / d[n - 1]
    for t in range(n - 2, -1, -1):
        so[t] = -l[t] * sd[t + 1]
        sd[t] = 1.0 / d[t] + l[t] * l[t] * sd[t + 1]
    return sd_arr, so_arr


def sqrt_solve(double[::1] d, double[::1] l, double[::1] xi):
    """u = L^{-T} D^{-1/2} xi, so cov(u) = (L D L^T)^{-1} for iid N(0,1) xi."""
    cdef Py_ssize_t n = d.shape[0]
    u_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef Py_ssize_t t

    u[n - 1] = xi[n - 1] / sqrt(d[n - 1])
    for t in range(n - 2, -1, -1):
        u[t] = xi[t] / sqrt(d[t]) - l[t] * u[t + 1]
    return u_arr


def ar1_scan(double phi, double x0c, double[::1] eta):
    """Centered AR(1) scan: x[0] = phi*x0c + eta[0], x[t] = phi*x[t-1] + eta[t]."""
    cdef Py_ssize_t n = eta.shape[0]
    x_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef Py_ssize_t t
    cdef double prev = x0c

    for t in range(n):
        prev = phi * prev + eta[t]
        x[t] = prev
    return x_arr
