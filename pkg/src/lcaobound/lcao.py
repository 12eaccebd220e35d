"""Atom-centred Hermite-function basis and Galerkin discretisation.

Basis functions are orthonormal Hermite functions ``h_n(x - R_k)``.  The
kinetic part of the operator is applied analytically through the harmonic
oscillator identity ``-h_n''/2 = (n + 1/2 - y**2/2) h_n``, so residuals are
exact up to round-off at every grid point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigError, DegenerateBasisError, ShapeError
from .gridnum import (
    CholeskyPivots,
    Grid,
    gen_sym_eig,
    pivoted_cholesky,
    quad_inner,
    reduced_solve,
)
from .model import MolecularSystem, ReferenceSolution, potential_total

_PI_QUARTER = np.pi ** -0.25
DECAY_TOL = 1e-14


class BasisDecayWarning(UserWarning):
    """A basis function is not negligible at the ends of the box."""


def hermite_table(n_max: int, y) -> np.ndarray:
    """Rows ``h_0 .. h_{n_max-1}`` evaluated at ``y`` (shape ``(n_max, len(y))``)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    H = np.empty((max(n_max, 1),) + y.shape)
    H[0] = _PI_QUARTER * np.exp(-0.5 * y * y)
    if n_max > 1:
        H[1] = np.sqrt(2.0) * y * H[0]
    for n in range(1, n_max - 1):
        H[n + 1] = np.sqrt(2.0 / (n + 1)) * y * H[n] - np.sqrt(n / (n + 1)) * H[n - 1]
    return H[:n_max]


def hermite_function(n: int, x):
    """Orthonormal Hermite function ``h_n`` at ``x`` (scalar or array)."""
    if n < 0:
        raise ConfigError(f"Hermite index must be non-negative, got {n}")
    out = hermite_table(n + 1, x)[n]
    return float(out[0]) if np.ndim(x) == 0 else out


def hermite_derivative_table(n_max: int, y, H: Optional[np.ndarray] = None) -> np.ndarray:
    """First derivatives ``h_n' = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}``."""
    if H is None or H.shape[0] < n_max + 1:
        H = hermite_table(n_max + 1, y)
    D = np.empty((n_max,) + H.shape[1:])
    for n in range(n_max):
        D[n] = -np.sqrt((n + 1) / 2.0) * H[n + 1]
        if n > 0:
            D[n] += np.sqrt(n / 2.0) * H[n - 1]
    return D


def oscillator_kinetic(n_max: int, y, H: Optional[np.ndarray] = None) -> np.ndarray:
    """``-h_n''/2`` via the oscillator identity."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if H is None:
        H = hermite_table(n_max, y)
    n = np.arange(n_max).reshape((-1,) + (1,) * y.ndim)
    return (n + 0.5 - 0.5 * y * y) * H[:n_max]


def apply_A_to_basis(sys: MolecularSystem, center: float, n: int, x):
    """``(A h_n(. - center))(x)`` with the kinetic part applied analytically."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    y = x_arr - center
    H = hermite_table(n + 1, y)
    out = oscillator_kinetic(n + 1, y, H)[n] + (potential_total(sys, x_arr) + sys.sigma) * H[n]
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class AOBasis:
    """Per-atom Hermite function counts.

    ``atoms`` is a tuple of ``(center, n_funcs)``; functions are enumerated
    atom by atom, ``n = 0 .. n_funcs-1`` within each atom.
    """

    atoms: tuple[tuple[float, int], ...]

    def __post_init__(self):
        atoms = tuple((float(c), int(n)) for c, n in self.atoms)
        if not atoms:
            raise ConfigError("basis needs at least one atom")
        for c, n in atoms:
            if n < 1:
                raise ConfigError(f"each atom needs at least one function, got {n}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def diatomic(cls, R: float, n1: int, n2: int) -> AOBasis:
        return cls(((-R, n1), (R, n2)))

    @property
    def size(self) -> int:
        return sum(n for _, n in self.atoms)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(n for _, n in self.atoms)

    def labels(self) -> list[tuple[int, int]]:
        """``(atom index, Hermite index)`` of every function in basis order."""
        return [(k, n) for k, (_, m) in enumerate(self.atoms) for n in range(m)]

    def sample(self, sys: MolecularSystem, x: np.ndarray):
        """Values, first derivatives and ``A``-images of all functions at ``x``."""
        x = np.asarray(x, dtype=float)
        v_shift = potential_total(sys, x) + sys.sigma
        chi, dchi, achi = [], [], []
        for c, n in self.atoms:
            y = x - c
            H = hermite_table(n + 1, y)
            chi.append(H[:n])
            dchi.append(hermite_derivative_table(n, y, H))
            achi.append(oscillator_kinetic(n, y, H) + v_shift * H[:n])
        return np.vstack(chi), np.vstack(dchi), np.vstack(achi)


@dataclass(frozen=True)
class GalerkinMatrices:
    """Galerkin matrices together with the basis samples they came from.

    ``chi``, ``dchi`` and ``achi`` hold the basis values, derivatives and
    ``A``-images on ``grid.points`` (shape ``(N, n_points)``).  ``chol`` is
    the pivoted Cholesky factorisation of ``S_chi`` selecting the retained
    subspace.
    """

    A_chi: np.ndarray
    S_chi: np.ndarray
    grid: Grid
    system: MolecularSystem
    basis: AOBasis
    chi: np.ndarray = field(repr=False)
    dchi: np.ndarray = field(repr=False)
    achi: np.ndarray = field(repr=False)
    chol: CholeskyPivots = field(repr=False)
    drop_tol: float = 1e-8

    @property
    def retained_rank(self) -> int:
        return self.chol.rank


def _trapezoid_gram(h: float, F: np.ndarray, G: np.ndarray) -> np.ndarray:
    w = np.full(F.shape[1], h)
    w[0] = w[-1] = 0.5 * h
    return (F * w) @ G.T


def assemble_galerkin(grid: Grid, sys: MolecularSystem, basis: AOBasis,
                      drop_tol: float = 1e-8) -> GalerkinMatrices:
    """Overlap and operator matrices by trapezoid quadrature on ``grid``.

    Emits :class:`BasisDecayWarning` if some function exceeds 1e-14 in
    magnitude at either end of the box.
    """
    chi, dchi, achi = basis.sample(sys, grid.points)
    edge = np.max(np.abs(chi[:, [0, -1]]))
    if edge > DECAY_TOL:
        warnings.warn("basis functions exceed 1e-14 at the box ends; enlarge the box",
                      BasisDecayWarning, stacklevel=2)
    S = _trapezoid_gram(grid.h, chi, chi)
    S = 0.5 * (S + S.T)
    A = _trapezoid_gram(grid.h, chi, achi)
    A = 0.5 * (A + A.T)
    chol = pivoted_cholesky(S, drop_tol)
    if chol.rank == 0:
        raise DegenerateBasisError("no basis function retained")
    for arr in (chi, dchi, achi, A, S):
        arr.flags.writeable = False
    return GalerkinMatrices(A, S, grid, sys, basis, chi, dchi, achi, chol, drop_tol)


@dataclass(frozen=True)
class DiscreteSolution:
    """Galerkin solution: coefficients in the AO basis plus eigen data if any.

    ``index`` is the 1-based eigenvalue index for ``kind == "eigen"``.
    """

    kind: str
    coefficients: np.ndarray
    mats: GalerkinMatrices = field(repr=False)
    lambda_iN: Optional[float] = None
    lambda_next: Optional[float] = None
    index: int = 1
    f_samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def basis(self) -> AOBasis:
        return self.mats.basis

    @property
    def lambda_2N(self) -> Optional[float]:
        return self.lambda_next

    def values(self) -> np.ndarray:
        """The solution sampled on the Galerkin grid."""
        return self.coefficients @ self.mats.chi

    def derivative(self) -> np.ndarray:
        return self.coefficients @ self.mats.dchi

    def applied(self) -> np.ndarray:
        """``A`` applied to the solution, sampled on the grid."""
        return self.coefficients @ self.mats.achi

    def residual(self) -> np.ndarray:
        """Residual on the Galerkin grid (``f - A u_N`` or ``lam phi - A phi``)."""
        if self.kind == "eigen":
            return self.lambda_iN * self.values() - self.applied()
        if self.f_samples is None:
            raise ConfigError("source residual needs the source samples")
        return self.f_samples - self.applied()


def project_source(mats: GalerkinMatrices, f_samples: np.ndarray) -> np.ndarray:
    """L2-projection coefficients of ``f`` onto the retained basis functions."""
    f_samples = np.asarray(f_samples, dtype=float)
    if f_samples.shape != (mats.grid.n_points,):
        raise ShapeError(f"source has shape {f_samples.shape}, grid has {mats.grid.n_points} points")
    b = _trapezoid_gram(mats.grid.h, mats.chi, f_samples[None, :])[:, 0]
    return reduced_solve(mats.S_chi, mats.chol, b)


def galerkin_source_solve(mats: GalerkinMatrices, f_chi: np.ndarray,
                          f_samples: Optional[np.ndarray] = None) -> DiscreteSolution:
    """Solve ``A_chi a = S_chi f_chi`` on the retained subspace.

    ``f_samples`` (the source on the grid) is attached so that the residual
    can later be evaluated.
    """
    f_chi = np.asarray(f_chi, dtype=float)
    if f_chi.shape != (mats.basis.size,):
        raise ShapeError(f"f_chi has shape {f_chi.shape}, basis has {mats.basis.size} functions")
    rhs = mats.S_chi @ f_chi
    a = reduced_solve(mats.A_chi, mats.chol, rhs)
    return DiscreteSolution("source", a, mats, f_samples=f_samples)


def galerkin_eig_solve(mats: GalerkinMatrices, i: int = 1,
                       reference: Optional[Union[ReferenceSolution, np.ndarray]] = None) -> DiscreteSolution:
    """The ``i``-th Galerkin eigenpair (1-based) and the next eigenvalue.

    The eigenvector is S-normalised.  If a reference eigenfunction is given
    (a :class:`ReferenceSolution` or samples on the grid) its sign is chosen
    so that the overlap with the reference is non-negative.
    """
    if i < 1:
        raise ConfigError(f"eigenvalue index is 1-based, got {i}")
    if mats.retained_rank < i + 1:
        raise DegenerateBasisError(
            f"retained rank {mats.retained_rank} too small for eigenpair {i} and its successor")
    ep = gen_sym_eig(mats.A_chi, mats.S_chi, mats.drop_tol, chol=mats.chol)
    c = ep.vectors[:, i - 1].copy()
    if reference is not None:
        phi_ref = reference.phi_1 if isinstance(reference, ReferenceSolution) else np.asarray(reference)
        if i == 2 and isinstance(reference, ReferenceSolution):
            phi_ref = reference.phi_2
        if quad_inner(mats.grid, phi_ref, c @ mats.chi) < 0:
            c = -c
    return DiscreteSolution("eigen", c, mats, float(ep.values[i - 1]), float(ep.values[i]), i)


def residual_eval(sys: MolecularSystem, sol: DiscreteSolution, x,
                  f: Optional[Callable] = None):
    """Pointwise residual at arbitrary ``x``, fully analytic in the basis.

    Source kind: ``f(x) - (A u_N)(x)`` with ``f`` a callable.  Eigen kind:
    ``lambda_iN phi_iN(x) - (A phi_iN)(x)``.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    chi, _, achi = sol.basis.sample(sys, x_arr)
    au = sol.coefficients @ achi
    if sol.kind == "eigen":
        out = sol.lambda_iN * (sol.coefficients @ chi) - au
    else:
        if f is None:
            raise ConfigError("source residual requires f")
        out = np.asarray(f(x_arr), dtype=float) - au
    return float(out[0]) if np.ndim(x) == 0 else out


def source_term_eval(sys: MolecularSystem, x):
    """Source whose pieces are the atomic operators applied to ``h_1`` at each nucleus.

    ``f = sum_k (-1/2 d2/dx2 + V_k + sigma_k) h_1(x - R_k)`` with the
    single-nucleus potentials ``V_k``.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x_arr)
    for k, (c, shift) in enumerate(zip(sys.centers, sys.atomic_shifts)):
        y = x_arr - c
        H = hermite_table(2, y)
        out += oscillator_kinetic(2, y, H)[1] + (sys.atomic_potential(k, x_arr) + shift) * H[1]
    return float(out[0]) if np.ndim(x) == 0 else out
