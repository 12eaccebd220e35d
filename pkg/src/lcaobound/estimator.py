"""Guaranteed a posteriori bounds from localised residual dual norms.

The residual is split with the partition of unity.  Each atomic piece is
measured in the dual norm of its atomic operator using a truncated spectral
expansion with a two-sided remainder; the far-field piece needs one
shifted Poisson solve.  The pieces combine with the constant ``C`` and, for
eigenproblems, the gap constants.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, GapAssumptionError, NotCoerciveError
from .gridnum import Grid, SymTridiag, quad_inner, solve_tridiag, tridiag_eigen
from .lcao import DiscreteSolution
from .model import (
    MolecularSystem,
    ReferenceSolution,
    Subdomain,
    assemble_atomic_operator,
    assemble_far_operator,
    potential_total,
)
from .partition import PartitionOfUnity, partition_eval

REMAINDER_NEXT = "next"
REMAINDER_LAST = "last"

GAP_NONGUARANTEED = "nonguaranteed"
GAP_WEYL = "weyl"
GAP_ORACLE = "oracle"
GAP_MODES = (GAP_NONGUARANTEED, GAP_WEYL, GAP_ORACLE)


class FarFieldTruncationWarning(UserWarning):
    """The far-field residual is not negligible at the ends of the box."""


@dataclass(frozen=True)
class SpectralBasis:
    """Lowest ``J + 1`` Dirichlet eigenpairs of an atomic operator.

    ``vectors`` has shape ``(n_sub, J + 1)`` and is orthonormal for the
    grid inner product ``h * sum(v * w)`` on ``grid_slice``.
    """

    k: int
    J: int
    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    grid_slice: slice
    h: float

    def remainder_constant(self, rule: str = REMAINDER_NEXT) -> float:
        """Reciprocal eigenvalue scaling the unresolved part of the norm.

        ``"next"`` uses the first discarded eigenvalue, ``"last"`` the last
        retained one (smaller, hence more pessimistic).
        """
        if rule == REMAINDER_NEXT:
            eps = self.values[min(self.J, len(self.values) - 1)]
        elif rule == REMAINDER_LAST:
            eps = self.values[self.J - 1]
        else:
            raise ConfigError(f"unknown remainder rule {rule!r}")
        return float(1.0 / eps)


def atomic_spectral_basis(op: SymTridiag, grid: Grid, J: int, k: int = 0) -> SpectralBasis:
    """Lowest ``J + 1`` eigenpairs of ``op`` (or all of them if ``J`` equals its size)."""
    if J < 1 or J > op.n:
        raise ConfigError(f"J must lie in [1, {op.n}], got {J}")
    ep = tridiag_eigen(op, min(J + 1, op.n)).to_continuum(grid.h)
    return SpectralBasis(k, J, ep.values, ep.vectors, op.grid_slice, grid.h)


@dataclass(frozen=True)
class DualNormParts:
    """Two-sided estimate of ``<v, A_k^-1 v>``.

    ``lower`` is the truncated spectral sum, ``upper`` adds the scaled
    remainder ``||v||^2 - sum |<v, psi_j>|^2`` (clipped at zero).
    """

    lower: float
    upper: float
    I_k: float
    remainder: float


def partial_dual_norm(sb: SpectralBasis, v: np.ndarray, rule: str = REMAINDER_NEXT) -> DualNormParts:
    """Lower and upper bounds of ``<v, A_k^-1 v>`` from the spectral basis.

    ``v`` is sampled on the subdomain slice (or on the full grid, in which
    case it is restricted first).
    """
    v = np.asarray(v, dtype=float)
    n_sub = sb.vectors.shape[0]
    if v.shape != (n_sub,):
        if v.ndim == 1 and len(v) >= sb.grid_slice.stop:
            v = v[sb.grid_slice]
        else:
            raise ConfigError(f"vector of length {v.shape} does not fit subdomain of {n_sub} points")
    coef = sb.h * (sb.vectors[:, : sb.J].T @ v)
    I_k = float(np.sum(coef * coef / sb.values[: sb.J]))
    remainder = float(sb.h * (v @ v) - np.sum(coef * coef))
    remainder = max(remainder, 0.0)
    upper = I_k + remainder * sb.remainder_constant(rule)
    return DualNormParts(I_k, upper, I_k, remainder)


def far_field_dual_term(grid: Grid, sigma_3: float, w: np.ndarray,
                        op: Optional[SymTridiag] = None) -> float:
    """``<w, (-1/2 d2/dx2 + sigma_3)^-1 w>`` with Dirichlet conditions on the box.

    ``w`` is sampled on the full grid.  Warns when it is not negligible at
    the box ends, since the part outside the box is ignored.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.n_points,):
        raise ConfigError(f"w has shape {w.shape}, grid has {grid.n_points} points")
    edge = max(abs(w[0]), abs(w[-1]), abs(w[1]), abs(w[-2]))
    if edge > 1e-10:
        warnings.warn("far-field residual exceeds 1e-10 at the box ends",
                      FarFieldTruncationWarning, stacklevel=2)
    if not np.any(w[1:-1]):
        return 0.0
    if op is None:
        op = assemble_far_operator(grid, sigma_3)
    sol = solve_tridiag(op, w[1:-1])
    return max(float(grid.h * (w[1:-1] @ sol)), 0.0)


@dataclass(frozen=True)
class GapData:
    """Gap constants of the ``i``-th eigenpair.

    ``gamma`` scales the squared residual in the eigenvalue bound and
    ``gamma_hat`` enters the quartic term of the energy-norm bound.
    """

    lambda_iN: float
    lambda_lower_next: float
    lambda_upper_prev: Optional[float]
    mode: str
    gamma: float
    gamma_hat: float

    @property
    def inv_gamma(self) -> float:
        return 1.0 / self.gamma

    @property
    def inv_gamma_hat(self) -> float:
        return 1.0 / self.gamma_hat


def gap_constants(lambda_iN: float, lambda_lower_next: float,
                  lambda_upper_prev: Optional[float] = None,
                  mode: str = GAP_NONGUARANTEED) -> GapData:
    """Gap constants from a lower bound of the next eigenvalue.

    ``gamma = (1 - lam/next)**2`` and ``gamma_hat = gamma * next``; when an
    upper bound of the previous eigenvalue is given the same expressions in
    it enter through a minimum.

    Raises
    ------
    GapAssumptionError
        If ``lambda_iN`` is not strictly between the two neighbours.
    """
    if mode not in GAP_MODES:
        raise ConfigError(f"unknown gap mode {mode!r}")
    if not lambda_iN < lambda_lower_next:
        raise GapAssumptionError(
            f"computed eigenvalue {lambda_iN:.12g} is not below the next-eigenvalue bound {lambda_lower_next:.12g}")
    right = (1.0 - lambda_iN / lambda_lower_next) ** 2
    gamma, gamma_hat = right, right * lambda_lower_next
    if lambda_upper_prev is not None:
        if not lambda_upper_prev < lambda_iN:
            raise GapAssumptionError(
                f"previous-eigenvalue bound {lambda_upper_prev:.12g} is not below {lambda_iN:.12g}")
        left = (1.0 - lambda_iN / lambda_upper_prev) ** 2
        gamma = min(gamma, left)
        gamma_hat = min(gamma_hat, left * lambda_upper_prev)
    if not (gamma > 0 and gamma_hat > 0):
        raise GapAssumptionError("gap constants are not positive")
    return GapData(float(lambda_iN), float(lambda_lower_next),
                   None if lambda_upper_prev is None else float(lambda_upper_prev),
                   mode, float(gamma), float(gamma_hat))


@dataclass(frozen=True)
class EstimatorSetup:
    """Everything the bounds need that does not depend on the basis.

    Built once per configuration by :func:`prepare_estimator`.
    """

    grid: Grid
    system: MolecularSystem
    partition: PartitionOfUnity
    spectral: tuple[SpectralBasis, SpectralBasis]
    sqrt_p: np.ndarray = field(repr=False)
    far_op: SymTridiag = field(repr=False)
    C: float = 1.0
    c_A: float = 1.0
    remainder_rule: str = REMAINDER_NEXT


def atomic_subdomains(grid: Grid, sys: MolecularSystem, pu: PartitionOfUnity) -> tuple[Subdomain, Subdomain]:
    return tuple(Subdomain.on_grid(grid, c, pu.a_max) for c in sys.centers)


def prepare_estimator(grid: Grid, sys: MolecularSystem, pu: PartitionOfUnity, J: int | Sequence[int],
                      C: float, c_A: float, remainder_rule: str = REMAINDER_NEXT) -> EstimatorSetup:
    """Spectral bases of both atomic operators, partition weights and the far operator."""
    Js = (J, J) if np.ndim(J) == 0 else tuple(J)
    subs = atomic_subdomains(grid, sys, pu)
    sbs = []
    for k, sub in enumerate(subs):
        op = assemble_atomic_operator(grid, sub, sys.charges[k], sys.alpha, sys.atomic_shifts[k])
        sbs.append(atomic_spectral_basis(op, grid, int(Js[k]), k))
    ps = partition_eval(pu, grid.points)
    sqrt_p = np.sqrt(np.clip(ps.p, 0.0, 1.0))
    return EstimatorSetup(grid, sys, pu, tuple(sbs), sqrt_p, assemble_far_operator(grid, sys.sigma_3),
                          float(C), float(c_A), remainder_rule)


@dataclass(frozen=True)
class BoundReport:
    """Ingredients and results of a bound evaluation.

    ``atomic`` holds the two-sided dual-norm parts of the two atomic pieces
    and ``far`` the far-field term; ``r_tilde_sq`` is their upper sum.
    ``bound_A`` bounds the energy-norm error, ``bound_eig`` (eigenproblems
    only) bounds ``lambda_iN - lambda_i``.  ``eta_sq`` are the local
    indicators of both atoms and the far field.
    """

    kind: str
    atomic: tuple[DualNormParts, DualNormParts]
    far: float
    r_tilde_sq: float
    C: float
    c_A: float
    bound_A: float
    bound_eig: Optional[float] = None
    gaps: Optional[GapData] = None
    eta_sq: tuple[float, float, float] = (0.0, 0.0, 0.0)
    err_A: Optional[float] = None
    err_eig: Optional[float] = None

    @property
    def r_tilde_lower_sq(self) -> float:
        return self.atomic[0].lower + self.atomic[1].lower + self.far


def residual_pieces(setup: EstimatorSetup, residual: np.ndarray, with_far: bool = True):
    """Atomic dual-norm parts and far term of the localised residual."""
    parts = tuple(partial_dual_norm(sb, (setup.sqrt_p[k] * residual)[sb.grid_slice], setup.remainder_rule)
                  for k, sb in enumerate(setup.spectral))
    far = far_field_dual_term(setup.grid, setup.system.sigma_3, setup.sqrt_p[2] * residual,
                              setup.far_op) if with_far else 0.0
    return parts, far


def local_indicators(setup: EstimatorSetup, residual: np.ndarray, with_far: bool = False):
    """Refinement indicators of both atoms and, on request, the far field.

    The atomic indicator is the truncated spectral sum plus the remainder
    scaled by the first discarded eigenvalue, whatever the bound's rule.
    """
    etas = []
    for k, sb in enumerate(setup.spectral):
        parts = partial_dual_norm(sb, (setup.sqrt_p[k] * residual)[sb.grid_slice], REMAINDER_NEXT)
        etas.append(parts.upper)
    far = far_field_dual_term(setup.grid, setup.system.sigma_3, setup.sqrt_p[2] * residual,
                              setup.far_op) if with_far else 0.0
    return etas[0], etas[1], far


def _indicators_from(setup: EstimatorSetup, parts, far) -> tuple[float, float, float]:
    if setup.remainder_rule == REMAINDER_NEXT:
        return parts[0].upper, parts[1].upper, far
    return tuple(p.I_k + p.remainder * sb.remainder_constant(REMAINDER_NEXT)
                 for p, sb in zip(parts, setup.spectral)) + (far,)


def bound_source(setup: EstimatorSetup, sol: DiscreteSolution) -> BoundReport:
    """Energy-norm bound ``sqrt(C r~^2)`` for a Galerkin source solution."""
    if sol.kind != "source":
        raise ConfigError("bound_source needs a source solution")
    parts, far = residual_pieces(setup, sol.residual())
    r2 = parts[0].upper + parts[1].upper + far
    return BoundReport("source", parts, far, r2, setup.C, setup.c_A,
                       float(np.sqrt(setup.C * r2)), eta_sq=_indicators_from(setup, parts, far))


def bound_eigen(setup: EstimatorSetup, sol: DiscreteSolution, gaps: GapData) -> BoundReport:
    """Energy-norm and eigenvalue bounds for a Galerkin eigenpair.

    ``bound_A = sqrt(C r~^2/gamma + lam_N C^2 r~^4/gamma_hat^2)`` and
    ``bound_eig = C r~^2/gamma``.
    """
    if sol.kind != "eigen":
        raise ConfigError("bound_eigen needs an eigen solution")
    if not sol.lambda_iN > 0:
        raise NotCoerciveError(
            f"Galerkin eigenvalue {sol.lambda_iN:.6g} is not positive; the basis is under-resolved by the grid")
    parts, far = residual_pieces(setup, sol.residual())
    r2 = parts[0].upper + parts[1].upper + far
    C = setup.C
    bound_eig = C * r2 / gaps.gamma
    bound_A = np.sqrt(bound_eig + sol.lambda_iN * (C * r2 / gaps.gamma_hat) ** 2)
    return BoundReport("eigen", parts, far, r2, C, setup.c_A, float(bound_A), float(bound_eig),
                       gaps, _indicators_from(setup, parts, far))


def _centered_derivative(grid: Grid, u: np.ndarray) -> np.ndarray:
    return np.gradient(u, grid.h, edge_order=2)


def energy_norm(grid: Grid, sys: MolecularSystem, e: np.ndarray, de: np.ndarray) -> float:
    """``sqrt(1/2 int e'^2 + int (V + sigma) e^2)`` by trapezoid quadrature."""
    v = potential_total(sys, grid.points) + sys.sigma
    val = 0.5 * quad_inner(grid, de, de) + quad_inner(grid, e, v * e)
    return float(np.sqrt(max(val, 0.0)))


def true_errors(ref: ReferenceSolution, sol: DiscreteSolution, grid: Grid,
                sys: MolecularSystem) -> tuple[float, Optional[float]]:
    """Energy-norm error against the reference and, for eigenpairs, ``lambda_iN - lambda_i``.

    The Galerkin derivative is analytic; the reference derivative uses
    centred differences.
    """
    if grid.n_points != ref.grid.n_points or grid.h != ref.grid.h:
        raise ConfigError("reference and solution must share the grid")
    if sol.kind == "eigen":
        if sol.index == 1:
            u_ref, lam_ref = ref.phi_1, ref.lambda_1
        else:
            u_ref, lam_ref = ref.phi_2, ref.lambda_2
    else:
        u_ref, lam_ref = ref.u, None
    e = u_ref - sol.values()
    de = _centered_derivative(grid, u_ref) - sol.derivative()
    err_A = energy_norm(grid, sys, e, de)
    err_eig = None if lam_ref is None else float(sol.lambda_iN - lam_ref)
    return err_A, err_eig
