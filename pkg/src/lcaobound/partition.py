"""Smooth partition of unity over the two atomic balls and the far field.

Atom ``k`` carries ``p_k(x) = t(|x - R_k|)`` with the radial profile equal to
one inside ``a_min``, zero beyond ``a_max`` and ``1 - ramp`` in between.  The
far-field weight is the remainder.  Also hosts the coercivity constant
``c_A`` and the localisation constant ``C``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, ShiftTooSmallError
from .model import MolecularSystem, ReferenceSolution

OPTIMAL = "optimal"
GUARANTEED = "guaranteed"
_GRAD_GUARD = 1e-14


def _ramp_parts(a: float, b: float, x):
    """Ramp value, first and second derivative, plus ``q (1-q) g'^2`` helpers.

    Inside ``(a, b)`` the ramp is ``1/(1 + exp(g))`` with
    ``g = 1/(x-a) - 1/(b-x)``, evaluated as ``(1 - tanh(g/2))/2``.
    """
    x = np.asarray(x, dtype=float)
    q = np.where(x >= b, 1.0, 0.0)
    dq = np.zeros_like(x)
    ddq = np.zeros_like(x)
    gp_all = np.zeros_like(x)
    m = (x > a) & (x < b)
    if np.any(m):
        t = x[m] - a
        u = b - x[m]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            g = 1.0 / t - 1.0 / u
            qm = 0.5 * (1.0 - np.tanh(0.5 * g))
            gp = -1.0 / t**2 - 1.0 / u**2
            gpp = 2.0 / t**3 - 2.0 / u**3
            s = qm * (1.0 - qm)
            d1 = -s * gp
            d2 = -(1.0 - 2.0 * qm) * d1 * gp - s * gpp
        # right at an endpoint s underflows to zero, and so do the derivatives
        flat = s == 0.0
        q[m] = qm
        dq[m] = np.where(flat, 0.0, d1)
        ddq[m] = np.where(flat, 0.0, d2)
        gp_all[m] = np.where(flat, 0.0, gp)
    return q, dq, ddq, gp_all


def ramp(a: float, b: float, x):
    """Smooth monotone step from 0 at ``a`` to 1 at ``b``.

    Built from ``q(s) = exp(-1/s)`` as ``q(x-a) / (q(x-a) + q(b-x))``;
    satisfies ``ramp(x) + ramp(a+b-x) = 1``.
    """
    if not a < b:
        raise ConfigError(f"ramp needs a < b, got {a}, {b}")
    q = _ramp_parts(a, b, x)[0]
    return float(q) if np.ndim(x) == 0 else q


def ramp_derivatives(a: float, b: float, x):
    """``(ramp, ramp', ramp'')`` at ``x``."""
    q, dq, ddq, _ = _ramp_parts(a, b, x)
    return q, dq, ddq


@dataclass(frozen=True)
class PartitionSample:
    """Partition weights and derivatives, arrays of shape ``(3, len(x))``.

    Row ``k`` is atom 1, atom 2, far field.  ``grad_ratio`` holds
    ``p_k'^2 / p_k`` evaluated in a cancellation-free form and set to zero
    where ``p_k < 1e-14``.
    """

    p: np.ndarray
    dp: np.ndarray
    ddp: np.ndarray
    grad_ratio: np.ndarray


@dataclass(frozen=True)
class PartitionOfUnity:
    """Partition for nuclei at ``-R`` and ``+R``.

    Weights of atom ``k`` equal one on ``|x - R_k| <= a_min`` and vanish for
    ``|x - R_k| >= a_max``; ``a_min + a_max = 2R`` so the two atomic
    transition zones meet exactly at the midpoint.
    """

    R: float
    a_min: float
    a_max: float

    def __post_init__(self):
        if not (0.0 < self.a_min < self.a_max <= 2.0 * self.R * (1 + 1e-14)):
            raise ConfigError(
                f"need 0 < a_min < a_max <= 2R, got a_min={self.a_min}, a_max={self.a_max}, R={self.R}")
        if abs(self.a_min + self.a_max - 2.0 * self.R) > 1e-12 * self.R:
            raise ConfigError("a_min + a_max must equal 2R")

    @classmethod
    def from_ell(cls, R: float, ell: float) -> PartitionOfUnity:
        """Transition zones of half-width ``ell`` around each atom's radius ``R``.

        Gives ``a_min = R - ell`` and ``a_max = R + ell``; requires ``0 < ell < R``.
        """
        if not 0.0 < ell < R:
            raise ConfigError(f"ell must lie in (0, R), got ell={ell}, R={R}")
        return cls(float(R), float(R - ell), float(R + ell))

    @property
    def centers(self) -> tuple[float, float]:
        return (-self.R, self.R)

    @property
    def ell(self) -> float:
        return self.R - self.a_min

    @property
    def overlap_width(self) -> float:
        """Width ``a_max - a_min`` of the region where two weights overlap."""
        return self.a_max - self.a_min


def partition_eval(pu: PartitionOfUnity, x) -> PartitionSample:
    """Evaluate ``p_k``, ``p_k'``, ``p_k''`` and the gradient ratio at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.zeros((3,) + x.shape)
    dp = np.zeros_like(p)
    ddp = np.zeros_like(p)
    ratio = np.zeros_like(p)
    for k, c in enumerate(pu.centers):
        r = np.abs(x - c)
        s = np.where(x >= c, 1.0, -1.0)
        q, dq, ddq, gp = _ramp_parts(pu.a_min, pu.a_max, r)
        p[k] = 1.0 - q
        dp[k] = -dq * s
        ddp[k] = -ddq
        # (q')^2 / (1 - q) = q^2 (1 - q) g'^2
        ratio[k] = q * q * (1.0 - q) * gp * gp
    # far field: outside both atoms the weight is the ramp in |x| - R, zero between
    r3 = np.abs(x) - pu.R
    s3 = np.where(x >= 0, 1.0, -1.0)
    q, dq, ddq, gp = _ramp_parts(pu.a_min, pu.a_max, np.maximum(r3, 0.0))
    outer = r3 > 0
    p[2] = np.where(outer, q, 0.0)
    dp[2] = np.where(outer, dq * s3, 0.0)
    ddp[2] = np.where(outer, ddq, 0.0)
    # (q')^2 / q = q (1 - q)^2 g'^2
    ratio[2] = np.where(outer, q * (1.0 - q) ** 2 * gp * gp, 0.0)
    ratio = np.where(p < _GRAD_GUARD, 0.0, ratio)
    return PartitionSample(p, dp, ddp, ratio)


def constant_cA(sys: MolecularSystem, mode: str = OPTIMAL,
                ref: Optional[ReferenceSolution] = None) -> float:
    """Constant bounding the L2 norm by the energy norm.

    ``optimal`` uses ``1/sqrt(lambda_1)`` of the reference operator;
    ``guaranteed`` uses ``1/sqrt(sigma + V_min)`` with the potential floor
    ``V_min = -(z_left + z_right)/alpha``.
    """
    if mode == OPTIMAL:
        if ref is None or ref.lambda_1 is None:
            raise ConfigError("optimal c_A needs a reference eigenvalue")
        if ref.lambda_1 <= 0:
            raise ShiftTooSmallError(f"reference lambda_1 = {ref.lambda_1} is not positive")
        return float(1.0 / np.sqrt(ref.lambda_1))
    if mode == GUARANTEED:
        floor = sys.sigma + sys.potential_floor
        if floor <= 0:
            raise ShiftTooSmallError(
                f"sigma + V_min = {floor:.6g} <= 0; the guaranteed c_A is undefined")
        return float(1.0 / np.sqrt(floor))
    raise ConfigError(f"unknown c_A mode {mode!r}")


def localization_integrand(pu: PartitionOfUnity, sys: MolecularSystem, x) -> np.ndarray:
    """Pointwise quantity whose positive supremum enters ``C``.

    ``sum_k -p_k''/4 + p_k'^2/(8 p_k) + V_k (p_k - 1) + (sigma_k - sigma) p_k``
    over both atoms and the far field, whose potential is zero.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ps = partition_eval(pu, x)
    shifts = (sys.sigma_1, sys.sigma_2, sys.sigma_3)
    total = np.zeros_like(x)
    for k in range(3):
        vk = sys.atomic_potential(k, x) if k < 2 else 0.0
        total += (-0.25 * ps.ddp[k] + 0.125 * ps.grad_ratio[k]
                  + vk * (ps.p[k] - 1.0) + (shifts[k] - sys.sigma) * ps.p[k])
    return total


def integrand_supremum(pu: PartitionOfUnity, sys: MolecularSystem, x_min: float, x_max: float,
                       n_samples: int = 8004) -> float:
    """Supremum of :func:`localization_integrand` on ``[x_min, x_max]``.

    Dense sampling, then golden-section refinement of every sampled local
    maximum within its bracketing neighbours.
    """
    xs = np.linspace(x_min, x_max, int(n_samples))
    vals = localization_integrand(pu, sys, xs)
    best = float(vals.max())
    # rising into i and not falling out of it; a tied pair (a symmetric peak
    # between two samples) is bracketed by its midpoint
    interior = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    f = lambda t: -float(localization_integrand(pu, sys, t)[0])
    for i in interior:
        if vals[i] == vals[i + 1]:
            if i + 2 >= len(xs):
                continue
            lo, mid, hi = xs[i - 1], 0.5 * (xs[i] + xs[i + 1]), xs[i + 2]
        else:
            lo, mid, hi = xs[i - 1], xs[i], xs[i + 1]
        try:
            res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", options={"xtol": 1e-10})
        except ValueError:  # the midpoint does not rise above the pair
            continue
        if lo <= res.x <= hi:
            best = max(best, -float(res.fun))
    return best


def constant_C(pu: PartitionOfUnity, sys: MolecularSystem, c_A: float,
               x_min: Optional[float] = None, x_max: Optional[float] = None,
               n_samples: int = 8004) -> float:
    """Localisation constant ``1 + c_A^2 * max(sup integrand, 0)``.

    The supremum is taken over ``[x_min, x_max]`` (default ``[-5R, 5R]``).
    """
    x_min = -5.0 * sys.R if x_min is None else x_min
    x_max = 5.0 * sys.R if x_max is None else x_max
    sup = integrand_supremum(pu, sys, x_min, x_max, n_samples)
    return float(1.0 + c_A * c_A * max(sup, 0.0))
