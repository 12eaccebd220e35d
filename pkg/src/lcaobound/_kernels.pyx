# cython: language_level=3
"""Compiled numerical kernels (tridiagonal eigen/solve, pivoted Cholesky).

Mirrors ``_kernels_py`` call for call; both backends use the same start
vectors so their eigenvectors agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.stdint cimport uint64_t

cnp.import_array()

cdef double EPS = np.finfo(float).eps
cdef double SAFMIN = np.finfo(float).tiny


cdef void _fill_start(double[::1] out, long seed) noexcept nogil:
    cdef uint64_t m = (<uint64_t>1) << 32
    cdef uint64_t mult = <uint64_t>2654435761U
    cdef uint64_t state = (<uint64_t>seed * mult + 12345) % m
    cdef Py_ssize_t i
    for i in range(out.shape[0]):
        state = (<uint64_t>1664525 * state + <uint64_t>1013904223) % m
        out[i] = 2.0 * (<double>state) / 4294967296.0 - 1.0


def start_vector(Py_ssize_t n, long seed):
    out = np.empty(n)
    _fill_start(out, seed)
    return out


cdef double _pivmin(const double[::1] e) noexcept nogil:
    cdef double mx = 1.0
    cdef Py_ssize_t i
    for i in range(e.shape[0]):
        if e[i] * e[i] > mx:
            mx = e[i] * e[i]
    return SAFMIN * mx


def gershgorin(d, e):
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=float)
    cdef const double[::1] ev = np.ascontiguousarray(e, dtype=float)
    cdef Py_ssize_t n = dv.shape[0], i
    cdef double lo = 1e308, hi = -1e308, r
    for i in range(n):
        r = 0.0
        if i > 0:
            r += fabs(ev[i - 1])
        if i < n - 1:
            r += fabs(ev[i])
        if dv[i] - r < lo:
            lo = dv[i] - r
        if dv[i] + r > hi:
            hi = dv[i] + r
    return lo, hi


cdef Py_ssize_t _count(const double[::1] d, const double[::1] e2, double x,
                       double pivmin) noexcept nogil:
    cdef Py_ssize_t n = d.shape[0], i, cnt = 0
    cdef double q = d[0] - x
    if fabs(q) < pivmin:
        q = -pivmin
    if q < 0:
        cnt += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if fabs(q) < pivmin:
            q = -pivmin
        if q < 0:
            cnt += 1
    return cnt


def sturm_count(d, e, double x):
    """Number of eigenvalues of the tridiagonal matrix smaller than ``x``."""
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=float)
    ea = np.ascontiguousarray(e, dtype=float)
    cdef const double[::1] e2 = ea * ea
    return int(_count(dv, e2, x, _pivmin(ea)))


def bisect_eigvals(d, e, Py_ssize_t count, double abstol=0.0):
    """Lowest ``count`` eigenvalues by Sturm-sequence bisection, ascending."""
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=float)
    ea = np.ascontiguousarray(e, dtype=float)
    cdef const double[::1] e2 = ea * ea
    cdef double pivmin = _pivmin(ea)
    gl, gu = gershgorin(dv, ea)
    cdef Py_ssize_t n = dv.shape[0]
    cdef double width = max(abs(gl), abs(gu))
    cdef double glo = gl - 2.0 * EPS * width * n - 2.0 * pivmin
    cdef double ghi = gu + 2.0 * EPS * width * n + 2.0 * pivmin
    out = np.empty(count)
    cdef double[::1] w = out
    cdef Py_ssize_t j, it, c
    cdef double lo, hi, mid, tol
    with nogil:
        for j in range(count):
            lo = glo
            hi = ghi
            for it in range(200):
                tol = 2.0 * EPS * (fabs(lo) if fabs(lo) > fabs(hi) else fabs(hi))
                if abstol > tol:
                    tol = abstol
                tol = tol + pivmin
                if hi - lo <= tol:
                    break
                mid = 0.5 * (lo + hi)
                c = _count(dv, e2, mid, pivmin)
                if c > j:
                    hi = mid
                else:
                    lo = mid
            w[j] = 0.5 * (lo + hi)
    return out


cdef void _gttrf(double[::1] dl, double[::1] d, double[::1] du, double[::1] du2,
                 char[::1] swap) noexcept nogil:
    cdef Py_ssize_t n = d.shape[0], i
    cdef double fact, temp
    for i in range(n - 1):
        if i < n - 2:
            du2[i] = 0.0
        if fabs(d[i]) >= fabs(dl[i]):
            swap[i] = 0
            if d[i] != 0.0:
                fact = dl[i] / d[i]
                dl[i] = fact
                d[i + 1] = d[i + 1] - fact * du[i]
            else:
                dl[i] = 0.0
        else:
            swap[i] = 1
            fact = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]


cdef void _gttrs(const double[::1] dl, const double[::1] d, const double[::1] du,
                 const double[::1] du2, const char[::1] swap,
                 double[::1] x) noexcept nogil:
    cdef Py_ssize_t n = d.shape[0], i
    cdef double xi
    for i in range(n - 1):
        if swap[i]:
            xi = x[i]
            x[i] = x[i + 1]
            x[i + 1] = xi - dl[i] * x[i]
        else:
            x[i + 1] = x[i + 1] - dl[i] * x[i]
    x[n - 1] = x[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]


def inverse_iteration(d, e, w, int max_iter=10, double rtol=64.0):
    """Eigenvectors for the eigenvalues ``w`` by inverse iteration.

    Returns ``(Z, iterations, residuals)`` with unit Euclidean columns.
    """
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=float)
    ea = np.ascontiguousarray(e, dtype=float)
    cdef const double[::1] ev = ea
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef Py_ssize_t n = dv.shape[0], m = wv.shape[0]
    gl, gu = gershgorin(dv, ea)
    cdef double tnorm = max(abs(gl), abs(gu), SAFMIN)
    cdef double ortol = 1e-3 * tnorm
    cdef double conv_tol = rtol * EPS * tnorm
    cdef double tiny = EPS * tnorm

    Zarr = np.zeros((m, n))  # row-major per vector, transposed on return
    cdef double[:, ::1] Z = Zarr
    iters_arr = np.zeros(m, dtype=np.int64)
    resid_arr = np.full(m, np.inf)
    cdef long long[::1] iters = iters_arr
    cdef double[::1] resid = resid_arr
    cdef Py_ssize_t j, k, i, it, cs = 0, rep
    if n == 1:
        for j in range(m):
            Z[j, 0] = 1.0
            iters[j] = 1
            resid[j] = fabs(dv[0] - wv[j])
        return Zarr.T.copy(), iters_arr, resid_arr

    cdef double[::1] dl = np.empty(n - 1)
    cdef double[::1] dd = np.empty(n)
    cdef double[::1] du = np.empty(n - 1)
    cdef double[::1] du2 = np.empty(max(n - 2, 1))
    cdef char[::1] swap = np.empty(n - 1, dtype=np.int8)
    cdef double[::1] y = np.empty(n)
    cdef double nrm, dot, r, s

    with nogil:
        for j in range(m):
            if j > 0 and wv[j] - wv[j - 1] > ortol:
                cs = j
            for i in range(n):
                dd[i] = dv[i] - wv[j]
            for i in range(n - 1):
                dl[i] = ev[i]
                du[i] = ev[i]
            _gttrf(dl, dd, du, du2, swap)
            for i in range(n):
                if fabs(dd[i]) < tiny:
                    dd[i] = -tiny if dd[i] < 0 else tiny
            _fill_start(y, j)
            nrm = 0.0
            for i in range(n):
                nrm += y[i] * y[i]
            nrm = sqrt(nrm)
            for i in range(n):
                y[i] /= nrm
            for it in range(1, max_iter + 1):
                _gttrs(dl, dd, du, du2, swap, y)
                for rep in range(2):
                    for k in range(cs, j):
                        dot = 0.0
                        for i in range(n):
                            dot += Z[k, i] * y[i]
                        for i in range(n):
                            y[i] -= dot * Z[k, i]
                nrm = 0.0
                for i in range(n):
                    nrm += y[i] * y[i]
                nrm = sqrt(nrm)
                for i in range(n):
                    y[i] /= nrm
                    Z[j, i] = y[i]
                r = 0.0
                for i in range(n):
                    s = (dv[i] - wv[j]) * y[i]
                    if i > 0:
                        s += ev[i - 1] * y[i - 1]
                    if i < n - 1:
                        s += ev[i] * y[i + 1]
                    r += s * s
                resid[j] = sqrt(r)
                iters[j] = it
                if it >= 2 and resid[j] <= conv_tol:
                    break
    return Zarr.T.copy(), iters_arr, resid_arr


def ldl_solve(d, e, rhs):
    """LDL^T solve; returns ``(x, bad)`` with ``bad`` the first non-positive pivot or -1."""
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=float)
    cdef const double[::1] ev = np.ascontiguousarray(e, dtype=float)
    out = np.array(rhs, dtype=float, copy=True, order="C")
    cdef double[::1] b = out
    cdef Py_ssize_t n = dv.shape[0], i
    cdef double[::1] piv = np.empty(n)
    cdef double[::1] lo = np.empty(max(n - 1, 1))
    piv[0] = dv[0]
    if piv[0] <= 0.0:
        return out, 0
    for i in range(n - 1):
        lo[i] = ev[i] / piv[i]
        piv[i + 1] = dv[i + 1] - lo[i] * ev[i]
        if piv[i + 1] <= 0.0:
            return out, i + 1
    with nogil:
        for i in range(1, n):
            b[i] -= lo[i - 1] * b[i - 1]
        for i in range(n):
            b[i] /= piv[i]
        for i in range(n - 2, -1, -1):
            b[i] -= lo[i] * b[i + 1]
    return out, -1


def pivoted_cholesky(S, double drop_tol):
    """Greedy diagonally pivoted Cholesky; returns ``(perm, L, rank, min_diag)``."""
    Aarr = np.array(S, dtype=float, copy=True, order="C")
    cdef double[:, ::1] A = Aarr
    cdef Py_ssize_t n = A.shape[0], i, j, k, p
    perm_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] perm = perm_arr
    Larr = np.zeros((n, n))
    cdef double[:, ::1] L = Larr
    cdef double[::1] diag = np.empty(n)
    cdef double dmax0 = 0.0, best, piv, t, min_diag = 0.0
    cdef Py_ssize_t rank = 0
    for i in range(n):
        diag[i] = A[i, i]
        if i == 0 or diag[i] > dmax0:
            dmax0 = diag[i]
    with nogil:
        for i in range(n):
            j = i
            best = diag[i]
            for k in range(i + 1, n):
                if diag[k] > best:
                    best = diag[k]
                    j = k
            if best < drop_tol * dmax0 or best <= 0.0:
                break
            if j != i:
                p = perm[i]; perm[i] = perm[j]; perm[j] = p
                t = diag[i]; diag[i] = diag[j]; diag[j] = t
                for k in range(n):
                    t = A[i, k]; A[i, k] = A[j, k]; A[j, k] = t
                for k in range(n):
                    t = A[k, i]; A[k, i] = A[k, j]; A[k, j] = t
                for k in range(i):
                    t = L[i, k]; L[i, k] = L[j, k]; L[j, k] = t
            piv = sqrt(diag[i])
            L[i, i] = piv
            for k in range(i + 1, n):
                t = A[k, i]
                for p in range(i):
                    t -= L[k, p] * L[i, p]
                L[k, i] = t / piv
                diag[k] -= L[k, i] * L[k, i]
            rank = i + 1
        if rank < n:
            min_diag = diag[rank]
            for k in range(rank + 1, n):
                if diag[k] < min_diag:
                    min_diag = diag[k]
    return perm_arr, Larr[:, :rank].copy(), int(rank), float(min_diag)
