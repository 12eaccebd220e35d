"""Pure-Python/NumPy implementation of the numerical kernels.

Same call signatures and results as the compiled ``_kernels`` module; used
when the extension is unavailable or ``LCAOBOUND_PURE_PYTHON`` is set.
Loops that are sequential along the matrix are vectorised across shifts or
right-hand sides instead.
"""
import numpy as np

EPS = np.finfo(float).eps
SAFMIN = np.finfo(float).tiny

_LCG_A = 1664525
_LCG_C = 1013904223
_LCG_M = 2**32


def start_vector(n, seed):
    """Deterministic pseudo-random start vector in (-1, 1), shared by both backends."""
    out = np.empty(n)
    state = (seed * 2654435761 + 12345) % _LCG_M
    for i in range(n):
        state = (_LCG_A * state + _LCG_C) % _LCG_M
        out[i] = 2.0 * state / _LCG_M - 1.0
    return out


def _pivmin(e):
    if len(e) == 0:
        return SAFMIN
    return SAFMIN * max(1.0, float(np.max(e * e)))


def gershgorin(d, e):
    n = len(d)
    r = np.zeros(n)
    if n > 1:
        ae = np.abs(e)
        r[:-1] += ae
        r[1:] += ae
    return float(np.min(d - r)), float(np.max(d + r))


def sturm_count(d, e, x):
    """Number of eigenvalues of the tridiagonal matrix smaller than ``x``."""
    return int(_sturm_counts(np.asarray(d, float), np.asarray(e, float), np.atleast_1d(float(x)))[0])


def _sturm_counts(d, e, xs):
    pivmin = _pivmin(e)
    e2 = e * e
    q = d[0] - xs
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    cnt = (q < 0).astype(np.int64)
    for i in range(1, len(d)):
        q = d[i] - xs - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        cnt += q < 0
    return cnt


def bisect_eigvals(d, e, count, abstol=0.0):
    """Lowest ``count`` eigenvalues by Sturm-sequence bisection, ascending."""
    d = np.asarray(d, float)
    e = np.asarray(e, float)
    gl, gu = gershgorin(d, e)
    width = max(abs(gl), abs(gu))
    gl -= 2.0 * EPS * width * len(d) + 2.0 * _pivmin(e)
    gu += 2.0 * EPS * width * len(d) + 2.0 * _pivmin(e)
    lo = np.full(count, gl)
    hi = np.full(count, gu)
    idx = np.arange(count)
    for _ in range(200):
        tol = np.maximum(abstol, 2.0 * EPS * np.maximum(np.abs(lo), np.abs(hi))) + _pivmin(e)
        active = (hi - lo) > tol
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        c = _sturm_counts(d, e, mid)
        upper = c > idx
        hi = np.where(active & upper, mid, hi)
        lo = np.where(active & ~upper, mid, lo)
    return 0.5 * (lo + hi)


def _gttrf(a, b):
    """LU with partial pivoting of tridiagonal matrices, batched over columns.

    ``a`` has shape (n, m): one diagonal per column, ``b`` the shared
    off-diagonal of length n-1.  Returns the LAPACK-style factors.
    """
    n, m = a.shape
    d = a.copy()
    dl = np.repeat(b[:, None], m, axis=1) if n > 1 else np.zeros((0, m))
    du = dl.copy()
    du2 = np.zeros((max(n - 2, 0), m))
    swap = np.zeros((max(n - 1, 0), m), dtype=bool)
    for i in range(n - 1):
        sw = np.abs(d[i]) < np.abs(dl[i])
        # no interchange
        safe = np.where(d[i] != 0.0, d[i], 1.0)
        fact_n = np.where(d[i] != 0.0, dl[i] / safe, 0.0)
        dnext_n = d[i + 1] - fact_n * du[i]
        # interchange rows i and i+1
        fact_s = d[i] / np.where(sw, dl[i], 1.0)
        di_s = dl[i]
        dui_s = d[i + 1]
        dnext_s = du[i] - fact_s * d[i + 1]
        if i < n - 2:
            du2_s = du[i + 1]
            dunext_s = -fact_s * du[i + 1]
            du2[i] = np.where(sw, du2_s, 0.0)
            du[i + 1] = np.where(sw, dunext_s, du[i + 1])
        d[i] = np.where(sw, di_s, d[i])
        du[i] = np.where(sw, dui_s, du[i])
        dl[i] = np.where(sw, fact_s, fact_n)
        d[i + 1] = np.where(sw, dnext_s, dnext_n)
        swap[i] = sw
    return dl, d, du, du2, swap


def _gttrs(dl, d, du, du2, swap, rhs):
    n = d.shape[0]
    x = rhs.copy()
    for i in range(n - 1):
        xi = x[i].copy()
        x[i] = np.where(swap[i], x[i + 1], x[i])
        x[i + 1] = np.where(swap[i], xi - dl[i] * x[i], x[i + 1] - dl[i] * x[i])
    x[n - 1] = x[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return x


def _matvec(d, e, v):
    out = d[:, None] * v
    if len(e):
        out[:-1] += e[:, None] * v[1:]
        out[1:] += e[:, None] * v[:-1]
    return out


def inverse_iteration(d, e, w, max_iter=10, rtol=64.0):
    """Eigenvectors for the eigenvalues ``w`` by inverse iteration.

    Returns ``(Z, iterations, residuals)`` with ``Z`` of shape (n, m) and
    unit Euclidean columns.  Vectors whose eigenvalues fall within a cluster
    are re-orthogonalised against earlier members of the same cluster.
    """
    d = np.asarray(d, float)
    e = np.asarray(e, float)
    w = np.asarray(w, float)
    n, m = len(d), len(w)
    tnorm = max(abs(gershgorin(d, e)[0]), abs(gershgorin(d, e)[1]), SAFMIN)
    ortol = 1e-3 * tnorm
    conv_tol = rtol * EPS * tnorm
    Z = np.zeros((n, m))
    iters = np.zeros(m, dtype=np.int64)
    resid = np.full(m, np.inf)
    if n == 1:
        Z[0, :] = 1.0
        iters[:] = 1
        resid[:] = np.abs(d[0] - w)
        return Z, iters, resid

    # Cluster boundaries: j starts a new cluster if far from j-1.
    cluster_start = np.zeros(m, dtype=np.int64)
    for j in range(1, m):
        cluster_start[j] = cluster_start[j - 1] if (w[j] - w[j - 1]) <= ortol else j

    # Factor all shifted matrices at once; tiny pivots perturbed as in LAPACK.
    shifted = d[:, None] - w[None, :]
    dl, dd, du, du2, swap = _gttrf(shifted, e)
    tiny = EPS * tnorm
    dd = np.where(np.abs(dd) < tiny, np.where(dd < 0, -tiny, tiny), dd)

    V = np.empty((n, m))
    for j in range(m):
        V[:, j] = start_vector(n, j)
    V /= np.linalg.norm(V, axis=0)

    # Columns inside clusters need sequential Gram-Schmidt, so iterate column
    # blocks: isolated columns are advanced together.
    done = np.zeros(m, dtype=bool)
    for it in range(1, max_iter + 1):
        Y = _gttrs(dl, dd, du, du2, swap, V)
        for j in range(m):
            if done[j]:
                continue
            cs = cluster_start[j]
            for _ in range(2):
                for k in range(cs, j):
                    Y[:, j] -= (Z[:, k] @ Y[:, j]) * Z[:, k]
            nrm = np.linalg.norm(Y[:, j])
            V[:, j] = Y[:, j] / nrm
            r = _matvec(d, e, V[:, j:j + 1])[:, 0] - w[j] * V[:, j]
            resid[j] = np.linalg.norm(r)
            iters[j] = it
            Z[:, j] = V[:, j]
            if it >= 2 and resid[j] <= conv_tol:
                done[j] = True
        if done.all():
            break
    return Z, iters, resid


def ldl_solve(d, e, rhs):
    """Solve a symmetric tridiagonal system by LDL^T without pivoting.

    Returns ``(x, bad)`` where ``bad`` is the index of the first non-positive
    pivot, or -1 if the matrix is numerically positive definite.
    """
    d = np.asarray(d, float)
    e = np.asarray(e, float)
    b = np.array(rhs, dtype=float)
    n = len(d)
    piv = np.empty(n)
    lo = np.empty(max(n - 1, 0))
    piv[0] = d[0]
    if piv[0] <= 0.0:
        return b, 0
    for i in range(n - 1):
        lo[i] = e[i] / piv[i]
        piv[i + 1] = d[i + 1] - lo[i] * e[i]
        if piv[i + 1] <= 0.0:
            return b, i + 1
    for i in range(1, n):
        b[i] -= lo[i - 1] * b[i - 1]
    b /= piv
    for i in range(n - 2, -1, -1):
        b[i] -= lo[i] * b[i + 1]
    return b, -1


def pivoted_cholesky(S, drop_tol):
    """Greedy diagonally pivoted Cholesky of a PSD matrix.

    Returns ``(perm, L, rank, min_diag)``: ``S[perm][:, perm] ~ L @ L.T`` on the
    leading ``rank`` block, ``L`` of shape (n, rank) in permuted row order and
    ``min_diag`` the smallest remaining Schur-complement diagonal entry.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    perm = np.arange(n)
    diag = A.diagonal().copy()
    dmax0 = float(diag.max()) if n else 0.0
    L = np.zeros((n, n))
    rank = 0
    for i in range(n):
        j = i + int(np.argmax(diag[i:]))
        if diag[j] < drop_tol * dmax0 or diag[j] <= 0.0:
            break
        if j != i:
            perm[[i, j]] = perm[[j, i]]
            diag[[i, j]] = diag[[j, i]]
            A[[i, j], :] = A[[j, i], :]
            A[:, [i, j]] = A[:, [j, i]]
            L[[i, j], :i] = L[[j, i], :i]
        piv = np.sqrt(diag[i])
        L[i, i] = piv
        col = (A[i + 1:, i] - L[i + 1:, :i] @ L[i, :i]) / piv
        L[i + 1:, i] = col
        diag[i + 1:] -= col * col
        rank = i + 1
    min_diag = float(diag[rank:].min()) if rank < n else 0.0
    return perm, L[:, :rank].copy(), rank, min_diag
