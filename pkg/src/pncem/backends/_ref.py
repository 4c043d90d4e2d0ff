"""Fallback kernels used when the compiled extension is unavailable.

The factorization and solves go through LAPACK's positive-definite
tridiagonal routines (dpttrf/dpttrs), the triangular sampling solve through
the banded solver, and the AR(1) scan through scipy's IIR filter.  Only the
selected-inverse recursion has no LAPACK equivalent and runs as a Python
loop, which is the main reason this backend is slower (see
benchmarks/bench_backends.py).
"""

import numpy as np
from scipy.linalg import solve_banded
from scipy.linalg.lapack import dpttrf, dpttrs
from scipy.signal import lfilter

PIVOT_MIN = 1e-300


def ldl_factor(diag, off):
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    off = np.ascontiguousarray(off, dtype=np.float64)
    d, l, info = dpttrf(diag, off)
    if info > 0:
        return d, l, int(info)
    small = np.nonzero(d <= PIVOT_MIN)[0]
    if small.size:
        return d, l, int(small[0]) + 1
    return d, l, 0


def ldl_solve(d, l, b):
    x, info = dpttrs(d, l, np.ascontiguousarray(b, dtype=np.float64))
    if info != 0:  # only reachable with an invalid factorization
        raise np.linalg.LinAlgError(f"dpttrs failed with info={info}")
    return x


def selected_inverse(d, l):
    n = len(d)
    sd = np.empty(n)
    so = np.empty(n - 1)
    dl = d.tolist()
    ll = l.tolist()
    prev = 1.0 / dl[n - 1]
    sd[n - 1] = prev
    for t in range(n - 2, -1, -1):
        lt = ll[t]
        so[t] = -lt * prev
        prev = 1.0 / dl[t] + lt * lt * prev
        sd[t] = prev
    return sd, so


def sqrt_solve(d, l, xi):
    # L^T is unit upper bidiagonal with superdiagonal l
    n = len(d)
    ab = np.ones((2, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = l
    return solve_banded((0, 1), ab, xi / np.sqrt(d))


def ar1_scan(phi, x0c, eta):
    x, _ = lfilter([1.0], [1.0, -phi], eta, zi=[phi * x0c])
    return x
