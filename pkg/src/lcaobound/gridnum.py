"""Uniform-grid finite-difference infrastructure.

Symmetric tridiagonal eigen/linear solvers, trapezoid quadrature, pivoted
Cholesky and the dense generalised symmetric eigensolver used for Galerkin
problems.  The sequential tridiagonal kernels come from :mod:`._backend`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from ._backend import kernels
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateBasisError,
    NotCoerciveError,
    NotPSDError,
    ShapeError,
)

DISCRETE = "discrete-l2"
CONTINUUM = "continuum-L2"

_SIGN_THRESHOLD = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform 1D mesh including both end points.

    Parameters
    ----------
    x_min, x_max : float
        Box end points.
    n_points : int
        Number of points, at least 3.
    """

    x_min: float
    x_max: float
    n_points: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ConfigError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ConfigError(f"need x_min < x_max, got {self.x_min} >= {self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ConfigError(f"n_points must be an integer >= 3, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        pts = self.x_min + np.arange(self.n_points) * self.h
        pts[-1] = self.x_max
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def interior(self) -> np.ndarray:
        """Points carrying unknowns under homogeneous Dirichlet conditions."""
        return self.points[1:-1]


def make_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    """Uniform grid on ``[x_min, x_max]`` with ``n_points`` points."""
    return Grid(float(x_min), float(x_max), n_points)


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix acting on a contiguous block of grid points.

    ``start`` is the grid index of the first unknown, so the matrix acts on
    ``grid.points[start:start + n]``.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    start: int = 1

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or len(e) != len(d) - 1:
            raise ShapeError(f"diag/offdiag lengths {d.shape}/{e.shape} are inconsistent")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def grid_slice(self) -> slice:
        return slice(self.start, self.start + self.n)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def count_below(self, x: float) -> int:
        """Number of eigenvalues below ``x`` (Sturm count)."""
        return kernels.sturm_count(self.diag, self.offdiag, float(x))


def fd_operator(h: float, potential: np.ndarray, start: int = 1, kinetic: float = 0.5) -> SymTridiag:
    """Second-order Dirichlet discretisation of ``-kinetic * d2/dx2 + potential``."""
    potential = np.asarray(potential, dtype=float)
    c = kinetic / h**2
    return SymTridiag(2.0 * c + potential, np.full(len(potential) - 1, -c), start)


@dataclass(frozen=True)
class EigenPairs:
    """Ascending eigenvalues with column eigenvectors.

    ``normalization`` is :data:`DISCRETE` (plain Euclidean) or
    :data:`CONTINUUM` (``sum(v * w) * h == 1``).
    """

    values: np.ndarray
    vectors: np.ndarray
    normalization: str = DISCRETE

    def to_continuum(self, h: float) -> EigenPairs:
        if self.normalization == CONTINUUM:
            return self
        return EigenPairs(self.values, self.vectors / np.sqrt(h), CONTINUUM)

    def __len__(self):
        return len(self.values)


def apply_sign_rule(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry of magnitude above 1e-8 is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.ndim == 1:
        return apply_sign_rule(vectors[:, None])[:, 0]
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        big = np.flatnonzero(np.abs(col) > _SIGN_THRESHOLD)
        first = big[0] if len(big) else int(np.argmax(np.abs(col)))
        if col[first] < 0:
            vectors[:, j] = -col
    return vectors


def tridiag_eigen(T: SymTridiag, count: int, max_iter: int = 10) -> EigenPairs:
    """The ``count`` algebraically smallest eigenpairs of ``T``.

    Bisection on Sturm counts for the values, inverse iteration for the
    vectors.  Vectors are Euclidean-orthonormal with the deterministic sign
    rule applied.

    Raises
    ------
    ConvergenceError
        If some pair fails to reach a small residual; ``diagnostics`` holds
        the iteration counts and residual norms.
    """
    if count < 1 or count > T.n:
        raise ConfigError(f"count must be in [1, {T.n}], got {count}")
    w = kernels.bisect_eigvals(T.diag, T.offdiag, int(count), 0.0)
    Z, iters, resid = kernels.inverse_iteration(T.diag, T.offdiag, w, max_iter)
    tnorm = max(np.max(np.abs(T.diag)) + 2.0 * (np.max(np.abs(T.offdiag)) if T.n > 1 else 0.0), 1.0)
    tol = 1e3 * np.finfo(float).eps * tnorm
    bad = np.flatnonzero(~(resid <= tol))
    if len(bad):
        raise ConvergenceError(
            f"inverse iteration did not converge for {len(bad)} of {count} pairs",
            {"indices": bad.tolist(), "iterations": iters[bad].tolist(),
             "residuals": resid[bad].tolist(), "tolerance": tol},
        )
    return EigenPairs(np.asarray(w), apply_sign_rule(Z), DISCRETE)


def solve_tridiag(T: SymTridiag, rhs: np.ndarray) -> np.ndarray:
    """Solve ``T w = rhs`` for a symmetric positive definite ``T``.

    Raises
    ------
    NotCoerciveError
        If the LDL^T factorisation meets a non-positive pivot.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (T.n,):
        raise ShapeError(f"rhs shape {rhs.shape} does not match operator size {T.n}")
    x, bad = kernels.ldl_solve(T.diag, T.offdiag, rhs)
    if bad >= 0:
        raise NotCoerciveError(f"operator is not positive definite (pivot {bad} <= 0)")
    return x


def quad_inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Composite trapezoid approximation of the integral of ``f * g`` over the grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (grid.n_points,) or g.shape != (grid.n_points,):
        raise ShapeError(f"samples of shape {f.shape}, {g.shape} do not match grid of {grid.n_points}")
    fg = f * g
    return float(grid.h * (np.sum(fg[1:-1]) + 0.5 * (fg[0] + fg[-1])))


class CholeskyPivots(NamedTuple):
    """Result of :func:`pivoted_cholesky`.

    ``factor`` is lower trapezoidal of shape (n, rank) in pivoted row order:
    ``S[np.ix_(p, p)][:, :rank] ~ factor @ factor[:rank].T``.
    """

    permutation: np.ndarray
    factor: np.ndarray
    rank: int

    @property
    def retained(self) -> np.ndarray:
        """Original indices of the retained columns, in pivot order."""
        return self.permutation[: self.rank]

    @property
    def leading(self) -> np.ndarray:
        """Square Cholesky factor of the retained block."""
        return self.factor[: self.rank]


def pivoted_cholesky(S: np.ndarray, drop_tol: float = 1e-8) -> CholeskyPivots:
    """Greedy diagonally pivoted Cholesky factorisation of a PSD matrix.

    Stops when the largest remaining pivot drops below ``drop_tol`` times the
    largest initial diagonal entry.  Ties in the pivot search go to the lowest
    index, so the permutation is deterministic.

    Raises
    ------
    NotPSDError
        If a diagonal entry of some Schur complement is negative beyond
        ``drop_tol`` times the largest initial pivot.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {S.shape}")
    n = S.shape[0]
    if n == 0:
        return CholeskyPivots(np.zeros(0, dtype=np.intp), np.zeros((0, 0)), 0)
    dmax = float(np.max(np.diag(S)))
    if dmax < 0.0:
        raise NotPSDError("matrix has no non-negative diagonal entry")
    if dmax == 0.0:
        if np.any(S):
            raise NotPSDError("zero diagonal with non-zero off-diagonal entries")
        return CholeskyPivots(np.arange(n, dtype=np.intp), np.zeros((n, 0)), 0)
    perm, L, rank, min_diag = kernels.pivoted_cholesky(np.ascontiguousarray(S), float(drop_tol))
    if min_diag < -max(drop_tol, 1e-12) * dmax:
        raise NotPSDError(f"negative pivot {min_diag:.3e} (largest initial pivot {dmax:.3e})")
    return CholeskyPivots(np.asarray(perm, dtype=np.intp), np.asarray(L), int(rank))


def gen_sym_eig(A: np.ndarray, S: np.ndarray, drop_tol: float = 1e-8,
                chol: CholeskyPivots | None = None) -> EigenPairs:
    """Solve ``A c = lam S c`` on the subspace kept by pivoted Cholesky.

    With ``L L^T`` the factorisation of the retained block, the reduced
    standard problem ``L^-1 A_rr L^-T y = lam y`` is solved densely and
    ``c_r = L^-T y`` is scattered back; dropped functions get zero
    coefficients.  Columns are S-orthonormal.
    """
    A = np.asarray(A, dtype=float)
    S = np.asarray(S, dtype=float)
    if A.shape != S.shape:
        raise ShapeError(f"A {A.shape} and S {S.shape} differ in shape")
    if chol is None:
        chol = pivoted_cholesky(S, drop_tol)
    if chol.rank == 0:
        raise DegenerateBasisError("no basis function retained")
    idx = chol.retained
    L = chol.leading
    M = _whiten(A[np.ix_(idx, idx)], L)
    vals, Y = sla.eigh(M)
    C_r = sla.solve_triangular(L, Y, lower=True, trans="T")
    C = np.zeros((A.shape[0], chol.rank))
    C[idx] = C_r
    return EigenPairs(vals, apply_sign_rule(C), DISCRETE)


def _whiten(A_rr: np.ndarray, L: np.ndarray) -> np.ndarray:
    X = sla.solve_triangular(L, A_rr, lower=True)
    M = sla.solve_triangular(L, X.T, lower=True)
    return 0.5 * (M + M.T)


def reduced_solve(A: np.ndarray, chol: CholeskyPivots, b: np.ndarray) -> np.ndarray:
    """Solve ``A_rr x_r = b_r`` on the retained subspace, zero elsewhere."""
    idx = chol.retained
    L = chol.leading
    M = _whiten(A[np.ix_(idx, idx)], L)
    y = sla.solve_triangular(L, b[idx], lower=True)
    z = sla.solve(M, y, assume_a="sym")
    x = np.zeros(A.shape[0])
    x[idx] = sla.solve_triangular(L, z, lower=True, trans="T")
    return x
