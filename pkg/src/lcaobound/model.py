"""Soft-Coulomb diatomic model and its finite-difference operators.

The full operator is ``-1/2 d2/dx2 + V(x) + sigma`` with two softened
Coulomb wells at ``-R`` and ``+R``.  Atomic operators live on balls around
each nucleus, the far-field operator is a shifted Laplacian on the box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, NotCoerciveError, ShapeError
from .gridnum import (
    CONTINUUM,
    EigenPairs,
    Grid,
    SymTridiag,
    fd_operator,
    make_grid,
    solve_tridiag,
    tridiag_eigen,
)


@dataclass(frozen=True)
class MolecularSystem:
    """Two soft-Coulomb nuclei at ``-R`` (left) and ``+R`` (right).

    Attributes
    ----------
    R : float
        Half the inter-nuclear distance.
    z_left, z_right : float
        Nuclear charges, non-negative.
    alpha : float
        Softness; the potential of a unit charge is ``1/sqrt(alpha**2 + x**2)``.
    sigma : float
        Shift of the full operator.
    sigma_1, sigma_2 : float
        Shifts of the two atomic operators.
    sigma_3 : float
        Shift of the far-field operator.
    """

    R: float = 1.0
    z_left: float = 1.0
    z_right: float = 1.0
    alpha: float = 0.5
    sigma: float = 4.0
    sigma_1: float = 1.0
    sigma_2: float = 1.0
    sigma_3: float = 1.0

    def __post_init__(self):
        for name in ("R", "z_left", "z_right", "alpha", "sigma", "sigma_1", "sigma_2", "sigma_3"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v}")
        if self.R <= 0:
            raise ConfigError(f"R must be positive, got {self.R}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.z_left < 0 or self.z_right < 0:
            raise ConfigError("nuclear charges must be non-negative")

    @property
    def centers(self) -> tuple[float, float]:
        return (-self.R, self.R)

    @property
    def charges(self) -> tuple[float, float]:
        return (self.z_left, self.z_right)

    @property
    def atomic_shifts(self) -> tuple[float, float]:
        return (self.sigma_1, self.sigma_2)

    @property
    def potential_floor(self) -> float:
        """Lower bound ``-(z_left + z_right)/alpha`` of the potential."""
        return -(self.z_left + self.z_right) / self.alpha

    def atomic_potential(self, k: int, x) -> np.ndarray:
        """Potential of nucleus ``k`` (0 = left, 1 = right) alone."""
        return -self.charges[k] * soft_coulomb(self.alpha, np.asarray(x, dtype=float) - self.centers[k])


@dataclass(frozen=True)
class Subdomain:
    """Open ball ``|x - center| < radius`` resolved on a grid.

    ``grid_slice`` selects the grid points strictly inside the ball; the
    neighbouring points carry the homogeneous Dirichlet condition.
    """

    center: float
    radius: float
    grid_slice: slice

    @classmethod
    def on_grid(cls, grid: Grid, center: float, radius: float) -> Subdomain:
        if radius <= 0:
            raise ConfigError(f"subdomain radius must be positive, got {radius}")
        tol = 1e-12 * max(1.0, abs(radius))
        inside = np.flatnonzero(np.abs(grid.points - center) < radius - tol)
        if len(inside) < 3:
            raise ConfigError(f"subdomain around {center} with radius {radius} has fewer than 3 grid points")
        if inside[0] == 0 or inside[-1] == grid.n_points - 1:
            raise ConfigError(f"subdomain around {center} with radius {radius} leaves the box")
        return cls(float(center), float(radius), slice(int(inside[0]), int(inside[-1]) + 1))

    @property
    def n(self) -> int:
        return self.grid_slice.stop - self.grid_slice.start


@dataclass(frozen=True)
class ReferenceSolution:
    """Finite-difference reference on a grid; samples include the zero boundary values.

    ``kind`` is ``"source"`` (``u`` set) or ``"eigen"`` (``lambda_1``,
    ``phi_1``, ``lambda_2``, ``phi_2`` set, eigenvectors L2-normalised).
    """

    kind: str
    grid: Grid
    u: Optional[np.ndarray] = None
    lambda_1: Optional[float] = None
    phi_1: Optional[np.ndarray] = None
    lambda_2: Optional[float] = None
    phi_2: Optional[np.ndarray] = None


def soft_coulomb(alpha: float, x):
    """Softened Coulomb potential ``1/sqrt(alpha**2 + x**2)`` of a unit charge."""
    x = np.asarray(x, dtype=float)
    return 1.0 / np.sqrt(alpha * alpha + x * x)


def potential_total(sys: MolecularSystem, x):
    """Electrostatic potential of both nuclei (the shift is not included)."""
    return sys.atomic_potential(0, x) + sys.atomic_potential(1, x)


def box_grid(sys: MolecularSystem, box_mult: float = 5.0, n_points: int = 2001) -> Grid:
    """Grid on ``[-box_mult R, box_mult R]``."""
    if box_mult <= 1.0:
        raise ConfigError(f"box_mult must exceed 1, got {box_mult}")
    return make_grid(-box_mult * sys.R, box_mult * sys.R, n_points)


def _check_coercive(T: SymTridiag, what: str) -> SymTridiag:
    if T.count_below(0.0) > 0:
        raise NotCoerciveError(f"{what} has a non-positive eigenvalue")
    return T


def assemble_hamiltonian(grid: Grid, sys: MolecularSystem, check: bool = True) -> SymTridiag:
    """Dirichlet FD matrix of the full operator on the interior grid points."""
    T = fd_operator(grid.h, potential_total(sys, grid.interior) + sys.sigma)
    return _check_coercive(T, "full operator") if check else T


def assemble_atomic_operator(grid: Grid, sub: Subdomain, charge: float, alpha: float,
                             shift: float, check: bool = True) -> SymTridiag:
    """Dirichlet FD matrix of one atom's operator on its subdomain."""
    x = grid.points[sub.grid_slice]
    v = -charge * soft_coulomb(alpha, x - sub.center) + shift
    T = fd_operator(grid.h, v, start=sub.grid_slice.start)
    return _check_coercive(T, f"atomic operator at {sub.center}") if check else T


def assemble_far_operator(grid: Grid, sigma_3: float) -> SymTridiag:
    """Shifted Dirichlet Laplacian on the whole box."""
    if not sigma_3 > 0:
        raise NotCoerciveError(f"far-field shift must be positive, got {sigma_3}")
    return fd_operator(grid.h, np.full(grid.n_points - 2, float(sigma_3)))


def _embed(grid: Grid, interior: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.n_points)
    out[1:-1] = interior
    return out


def reference_solve(grid: Grid, sys: MolecularSystem, kind: str = "eigen",
                    f: Optional[np.ndarray] = None) -> ReferenceSolution:
    """FD reference for the source problem ``A u = f`` or the two lowest eigenpairs."""
    T = assemble_hamiltonian(grid, sys)
    if kind == "source":
        if f is None:
            raise ConfigError("source reference requires f")
        f = np.asarray(f, dtype=float)
        if f.shape != (grid.n_points,):
            raise ShapeError(f"f has shape {f.shape}, grid has {grid.n_points} points")
        return ReferenceSolution("source", grid, u=_embed(grid, solve_tridiag(T, f[1:-1])))
    if kind != "eigen":
        raise ConfigError(f"unknown reference kind {kind!r}")
    ep = tridiag_eigen(T, 2).to_continuum(grid.h)
    return ReferenceSolution(
        "eigen", grid,
        lambda_1=float(ep.values[0]), phi_1=_embed(grid, ep.vectors[:, 0]),
        lambda_2=float(ep.values[1]), phi_2=_embed(grid, ep.vectors[:, 1]),
    )


def atomic_eigenpairs(grid: Grid, T: SymTridiag, count: int) -> EigenPairs:
    """Lowest pairs of an operator, L2-normalised on the grid."""
    return tridiag_eigen(T, count).to_continuum(grid.h)


def weyl_lower_bound(grid: Grid, sys: MolecularSystem) -> float:
    """Guaranteed lower bound for the second eigenvalue of the full operator.

    Splits the operator into two halves, each with half the kinetic energy,
    one nucleus and half the shift, and adds the lowest eigenvalue of the
    left half to the second eigenvalue of the right half.  Both halves are
    discretised on the full box grid.
    """
    x = grid.interior
    halves = []
    for k in range(2):
        T = fd_operator(grid.h, sys.atomic_potential(k, x) + 0.5 * sys.sigma, kinetic=0.25)
        halves.append(_check_coercive(T, f"half operator {k + 1}"))
    lam_left = tridiag_eigen(halves[0], 1).values[0]
    lam_right = tridiag_eigen(halves[1], 2).values[1]
    return float(lam_left + lam_right)
