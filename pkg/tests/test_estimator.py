from dataclasses import dataclass

import numpy as np
import pytest

from conftest import ALPHA
from lcaobound.errors import ConfigError, GapAssumptionError, NotCoerciveError
from lcaobound.estimator import (
    FarFieldTruncationWarning,
    atomic_spectral_basis,
    bound_eigen,
    bound_source,
    energy_norm,
    far_field_dual_term,
    gap_constants,
    local_indicators,
    partial_dual_norm,
    prepare_estimator,
    residual_pieces,
    true_errors,
)
from lcaobound.gridnum import make_grid, quad_inner, solve_tridiag, tridiag_eigen
from lcaobound.lcao import (
    AOBasis,
    assemble_galerkin,
    galerkin_eig_solve,
    galerkin_source_solve,
    project_source,
    source_term_eval,
)
from lcaobound.model import (
    MolecularSystem,
    Subdomain,
    assemble_atomic_operator,
    assemble_far_operator,
    reference_solve,
)
from lcaobound.partition import PartitionOfUnity, constant_C, constant_cA

GRID = make_grid(-14, 14, 28001)
SYS = MolecularSystem(alpha=ALPHA, sigma=4.0, sigma_1=3.0, sigma_2=3.0)


def make_setup(sys=SYS, ell=0.4, J=17, rule="next"):
    ref = reference_solve(GRID, sys, "eigen")
    c_A = constant_cA(sys, "optimal", ref)
    pu = PartitionOfUnity.from_ell(sys.R, ell)
    return prepare_estimator(GRID, sys, pu, J, constant_C(pu, sys, c_A), c_A, rule), ref


@pytest.fixture(scope="module")
def setup():
    return make_setup()[0]


@dataclass
class ZeroResidual:
    """Stand-in solution whose residual vanishes identically."""

    kind: str
    lambda_iN: float = 2.0

    def residual(self):
        return np.zeros(GRID.n_points)


def atomic_op(grid, c=-1.0, r=1.4, charge=1.0, shift=3.0):
    sub = Subdomain.on_grid(grid, c, r)
    return assemble_atomic_operator(grid, sub, charge, ALPHA, shift)


# -- spectral bases -----------------------------------------------------------


def test_spectral_basis_free_dirichlet_limit():
    g = make_grid(-3, 3, 12001)
    op = atomic_op(g, 0.0, 2.0, charge=0.0, shift=1.0)
    sb = atomic_spectral_basis(op, g, 5)
    j = np.arange(1, 7)
    np.testing.assert_allclose(sb.values, 0.5 * (j * np.pi / 4.0) ** 2 + 1.0, rtol=1e-6)


def test_spectral_basis_orthonormal_and_translation_invariant():
    g = make_grid(-5, 5, 4001)
    a = atomic_spectral_basis(atomic_op(g, -1.0), g, 17)
    b = atomic_spectral_basis(atomic_op(g, 1.0), g, 17)
    G = a.h * a.vectors.T @ a.vectors
    assert np.max(np.abs(G - np.eye(18))) <= 1e-9
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)
    assert a.values[0] > 0 and len(a.values) == 18


def test_spectral_basis_validation():
    g = make_grid(-5, 5, 401)
    op = atomic_op(g)
    with pytest.raises(ConfigError):
        atomic_spectral_basis(op, g, 0)
    with pytest.raises(ConfigError):
        atomic_spectral_basis(op, g, op.n + 1)
    sb = atomic_spectral_basis(op, g, 4)
    assert sb.remainder_constant("next") == pytest.approx(1 / sb.values[4])
    assert sb.remainder_constant("last") == pytest.approx(1 / sb.values[3])
    with pytest.raises(ConfigError):
        sb.remainder_constant("first")


# -- partial dual norm --------------------------------------------------------


def test_dual_norm_of_eigenfunction():
    g = make_grid(-5, 5, 2001)
    sb = atomic_spectral_basis(atomic_op(g), g, 9)
    parts = partial_dual_norm(sb, sb.vectors[:, 0])
    assert parts.lower == pytest.approx(1 / sb.values[0], rel=1e-10)
    assert parts.upper == pytest.approx(1 / sb.values[0], rel=1e-10)
    assert parts.remainder <= 1e-12


def test_dual_norm_full_truncation_matches_direct_solve(rng):
    g = make_grid(-3, 3, 301)
    op = atomic_op(g)
    sb = atomic_spectral_basis(op, g, op.n)
    v = rng.normal(size=op.n)
    exact = g.h * v @ solve_tridiag(op, v)
    parts = partial_dual_norm(sb, v)
    assert parts.upper - parts.lower <= 1e-10 * exact
    assert parts.lower == pytest.approx(exact, rel=1e-10)


def test_dual_norm_monotone_in_J(rng):
    g = make_grid(-5, 5, 2001)
    op = atomic_op(g)
    sub = slice(op.grid_slice.start, op.grid_slice.stop)
    x = g.points[sub]
    v = np.exp(-(x + 1.0) ** 2) * (1 + 0.3 * rng.normal(size=len(x)))
    exact = g.h * v @ solve_tridiag(op, v)
    lows, ups = [], []
    for J in (5, 9, 13, 17):
        p = partial_dual_norm(atomic_spectral_basis(op, g, J), v)
        lows.append(p.lower)
        ups.append(p.upper)
        assert p.lower <= exact <= p.upper
    assert np.all(np.diff(lows) >= 0) and np.all(np.diff(ups) <= 0)


def test_dual_norm_shape_check():
    g = make_grid(-5, 5, 401)
    sb = atomic_spectral_basis(atomic_op(g), g, 4)
    with pytest.raises(ConfigError):
        partial_dual_norm(sb, np.ones(7))
    full = partial_dual_norm(sb, np.ones(g.n_points))
    assert full.upper == pytest.approx(partial_dual_norm(sb, np.ones(sb.vectors.shape[0])).upper)


# -- far field ----------------------------------------------------------------


@pytest.mark.filterwarnings("ignore::lcaobound.estimator.FarFieldTruncationWarning")
def test_far_field_zero_and_eigenvector():
    g = make_grid(-5, 5, 401)
    assert far_field_dual_term(g, 1.0, np.zeros(401)) == 0.0
    op = assemble_far_operator(g, 1.0)
    ep = tridiag_eigen(op, 3)
    w = np.zeros(401)
    w[1:-1] = ep.vectors[:, 2]
    mu = ep.values[2]
    assert far_field_dual_term(g, 1.0, w) == pytest.approx(quad_inner(g, w, w) / mu, rel=1e-10)


def test_far_field_matches_diagonalisation():
    g = make_grid(-5, 5, 401)
    x = g.points
    w = np.exp(-x**2) * np.sin(3 * x) + 0.5 * np.exp(-4 * (x - 1) ** 2)
    w[[0, -1]] = 0.0
    T = assemble_far_operator(g, 1.0).to_dense()
    mu, Phi = np.linalg.eigh(T)
    coef = Phi.T @ w[1:-1]
    oracle = g.h * np.sum(coef**2 / mu)
    assert far_field_dual_term(g, 1.0, w) == pytest.approx(oracle, rel=1e-10)


def test_far_field_warns_when_not_decayed():
    g = make_grid(-5, 5, 401)
    with pytest.warns(FarFieldTruncationWarning):
        far_field_dual_term(g, 1.0, np.ones(401))
    with pytest.raises(ConfigError):
        far_field_dual_term(g, 1.0, np.ones(3))


# -- gap constants ------------------------------------------------------------


def test_gap_constants_algebra():
    g = gap_constants(1.5, 3.0)
    assert g.gamma == pytest.approx(0.25) and g.gamma_hat == pytest.approx(0.75)
    assert g.inv_gamma == pytest.approx(4.0)
    g2 = gap_constants(1.5, 3.0, 1.2)
    assert g2.gamma == pytest.approx(min(0.25, (1 - 1.5 / 1.2) ** 2))


@pytest.mark.parametrize("args", [(2.0, 2.0), (2.0, 1.5), (2.0, 3.0, 2.5)])
def test_gap_violation_raises(args):
    with pytest.raises(GapAssumptionError):
        gap_constants(*args)


def test_gap_mode_checked():
    with pytest.raises(ConfigError):
        gap_constants(1.0, 2.0, mode="exact")


@pytest.mark.parametrize("sigma, expected", [(3.0, 15.59), (8.0, 201.40)])
def test_gap_table_values(sigma, expected):
    g = make_grid(-5, 5, 2001)
    r = reference_solve(g, MolecularSystem(alpha=ALPHA, sigma=sigma), "eigen")
    assert gap_constants(r.lambda_1, r.lambda_2, mode="oracle").inv_gamma == pytest.approx(expected, rel=0.02)


# -- bounds -------------------------------------------------------------------


def test_zero_residual_bounds(setup):
    src = bound_source(setup, ZeroResidual("source"))
    assert src.bound_A == 0.0 and src.r_tilde_sq == 0.0
    eig = bound_eigen(setup, ZeroResidual("eigen"), gap_constants(2.0, 3.0))
    assert eig.r_tilde_sq <= 1e-10 and eig.bound_A <= 1e-5 and eig.bound_eig <= 1e-5


def test_zero_residual_source_from_basis(setup):
    mats = assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, 5, 5))
    target = np.zeros(10)
    target[[0, 7]] = (1.0, -0.5)
    f = target @ mats.achi
    sol = galerkin_source_solve(mats, project_source(mats, f), f)
    assert bound_source(setup, sol).bound_A <= 1e-5


def test_bound_kind_checked(setup):
    with pytest.raises(ConfigError):
        bound_source(setup, ZeroResidual("eigen"))
    with pytest.raises(ConfigError):
        bound_eigen(setup, ZeroResidual("source"), gap_constants(2.0, 3.0))
    with pytest.raises(NotCoerciveError):
        bound_eigen(setup, ZeroResidual("eigen", -1.0), gap_constants(-1.0, 3.0))


def test_eigen_bound_dominates_and_terms_nonnegative(setup):
    ref = reference_solve(GRID, SYS, "eigen")
    for n in (3, 8, 15):
        mats = assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, n, n))
        sol = galerkin_eig_solve(mats, 1, ref.phi_1)
        rep = bound_eigen(setup, sol, gap_constants(sol.lambda_iN, ref.lambda_2, mode="oracle"))
        err_A, err_eig = true_errors(ref, sol, GRID, SYS)
        assert 0.0 <= err_eig <= rep.bound_eig
        assert err_A <= rep.bound_A
        assert rep.far >= 0 and all(p.lower >= 0 and p.upper >= p.lower for p in rep.atomic)
        assert rep.r_tilde_lower_sq <= rep.r_tilde_sq


def test_source_bound_tighter_for_wider_overlap():
    f = source_term_eval(SYS, GRID.points)
    mats = assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, 15, 15))
    sol = galerkin_source_solve(mats, project_source(mats, f), f)
    narrow = bound_source(make_setup(ell=0.4)[0], sol).bound_A
    wide = bound_source(make_setup(ell=0.8)[0], sol).bound_A
    assert wide <= narrow


# -- indicators ---------------------------------------------------------------


def test_indicators_symmetric_system(setup):
    mats = assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, 5, 5))
    sol = galerkin_eig_solve(mats, 1)
    e1, e2, e3 = local_indicators(setup, sol.residual())
    assert e3 == 0.0
    assert abs(e1 - e2) / max(e1, e2) <= 1e-6
    parts, _ = residual_pieces(setup, sol.residual(), with_far=False)
    assert e1 >= parts[0].I_k and e2 >= parts[1].I_k


def test_indicators_follow_heavier_atom():
    sys = MolecularSystem(z_left=3.0, alpha=ALPHA, sigma=7.0, sigma_1=4.0, sigma_2=4.0)
    st, _ = make_setup(sys, ell=0.3)
    sol = galerkin_eig_solve(assemble_galerkin(GRID, sys, AOBasis.diatomic(1.0, 5, 5)), 1)
    e1, e2, e3 = local_indicators(st, sol.residual(), with_far=True)
    assert e1 > e2 and e3 >= 0.0


def test_indicators_use_next_rule_regardless_of_bound_rule():
    nxt, _ = make_setup(rule="next")
    last, _ = make_setup(rule="last")
    sol = galerkin_eig_solve(assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, 4, 4)), 1)
    gaps = gap_constants(sol.lambda_iN, 4.0)
    a, b = bound_eigen(nxt, sol, gaps), bound_eigen(last, sol, gaps)
    np.testing.assert_allclose(a.eta_sq, b.eta_sq, rtol=1e-14)
    assert b.r_tilde_sq >= a.r_tilde_sq


# -- norms and true errors ----------------------------------------------------


def test_energy_norm_of_ground_state():
    ref = reference_solve(GRID, SYS, "eigen")
    d = np.gradient(ref.phi_1, GRID.h, edge_order=2)
    assert energy_norm(GRID, SYS, ref.phi_1, d) == pytest.approx(np.sqrt(ref.lambda_1), rel=1e-5)


def test_true_errors_norm_comparison():
    ref = reference_solve(GRID, SYS, "eigen")
    sol = galerkin_eig_solve(assemble_galerkin(GRID, SYS, AOBasis.diatomic(1.0, 4, 4)), 1, ref.phi_1)
    err_A, err_eig = true_errors(ref, sol, GRID, SYS)
    e = ref.phi_1 - sol.values()
    assert err_eig >= 0.0
    assert err_A**2 >= ref.lambda_1 * quad_inner(GRID, e, e) * (1 - 1e-6)
    with pytest.raises(ConfigError):
        true_errors(reference_solve(make_grid(-14, 14, 2801), SYS, "eigen"), sol, GRID, SYS)
