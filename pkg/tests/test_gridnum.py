import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from lcaobound.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateBasisError,
    NotCoerciveError,
    NotPSDError,
    ShapeError,
)
from lcaobound.gridnum import (
    CONTINUUM,
    DISCRETE,
    SymTridiag,
    apply_sign_rule,
    fd_operator,
    gen_sym_eig,
    make_grid,
    pivoted_cholesky,
    quad_inner,
    reduced_solve,
    solve_tridiag,
    tridiag_eigen,
)
from lcaobound.lcao import AOBasis, assemble_galerkin, hermite_table
from lcaobound.model import MolecularSystem


def random_tridiag(rng, n):
    return SymTridiag(rng.normal(size=n), rng.normal(size=n - 1))


def random_spd_tridiag(rng, n):
    e = rng.normal(size=n - 1)
    d = 2.5 + np.abs(rng.normal(size=n)) + np.concatenate(([0.0], np.abs(e))) + np.concatenate((np.abs(e), [0.0]))
    return SymTridiag(d, e)


# -- grid ---------------------------------------------------------------------


def test_make_grid_reference_spacing():
    g = make_grid(-5, 5, 2001)
    assert g.h == pytest.approx(0.005, rel=1e-14)
    assert g.points[0] == -5 and g.points[-1] == 5


def test_make_grid_three_points():
    np.testing.assert_array_equal(make_grid(0, 1, 3).points, [0.0, 0.5, 1.0])


def test_make_grid_midpoint_exact():
    assert make_grid(-1, 1, 2001).points[1000] == 0.0


def test_grid_equispaced():
    g = make_grid(-14, 14, 28001)
    assert np.max(np.abs(np.diff(g.points) - g.h)) < 1e-12


@pytest.mark.parametrize("args", [(1, 0, 10), (0, 0, 10), (0, 1, 2), (0, np.inf, 10)])
def test_make_grid_rejects_bad_input(args):
    with pytest.raises(ConfigError):
        make_grid(*args)


def test_symtridiag_shape_checked():
    with pytest.raises(ShapeError):
        SymTridiag(np.ones(4), np.ones(4))


# -- tridiagonal eigenpairs ---------------------------------------------------


def test_tridiag_eigen_toeplitz_closed_form():
    ep = tridiag_eigen(SymTridiag(np.full(3, 2.0), np.full(2, -1.0)), 3)
    np.testing.assert_allclose(ep.values, [2 - np.sqrt(2), 2, 2 + np.sqrt(2)], atol=1e-13)


def test_dirichlet_laplacian_lowest_eigenvalue():
    g = make_grid(0.0, np.pi, 2001)
    ep = tridiag_eigen(fd_operator(g.h, np.zeros(g.n_points - 2)), 3)
    # continuum values k^2/2
    np.testing.assert_allclose(ep.values, [0.5, 2.0, 4.5], rtol=1e-5)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 120), count=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
def test_tridiag_eigen_matches_scipy(n, count, seed):
    rng = np.random.default_rng(seed)
    T = random_tridiag(rng, n)
    count = min(count, n)
    ep = tridiag_eigen(T, count)
    ref = sla.eigh_tridiagonal(T.diag, T.offdiag, eigvals_only=True, select="i", select_range=(0, count - 1))
    scale = max(1.0, np.max(np.abs(ref)))
    np.testing.assert_allclose(ep.values, ref, atol=1e-12 * scale)
    V = ep.vectors
    assert np.max(np.abs(V.T @ V - np.eye(count))) <= 1e-10
    A = T.to_dense()
    resid = np.linalg.norm(A @ V - V * ep.values, axis=0)
    assert np.all(resid <= 1e-9 * scale)


def test_tridiag_eigen_clustered_spectrum_orthonormal():
    # two decoupled copies give exactly double eigenvalues
    d = np.tile(np.linspace(1, 2, 50), 2)
    e = np.concatenate((np.full(49, 0.3), [0.0], np.full(49, 0.3)))
    ep = tridiag_eigen(SymTridiag(d, e), 10)
    assert np.max(np.abs(ep.vectors.T @ ep.vectors - np.eye(10))) < 1e-10


def test_tridiag_eigen_sign_rule():
    rng = np.random.default_rng(3)
    V = tridiag_eigen(random_tridiag(rng, 40), 5).vectors
    for j in range(5):
        first = V[np.flatnonzero(np.abs(V[:, j]) > 1e-8)[0], j]
        assert first > 0


def test_tridiag_eigen_rejects_bad_count():
    with pytest.raises(ConfigError):
        tridiag_eigen(SymTridiag(np.ones(3), np.zeros(2)), 4)


def test_tridiag_eigen_reports_diagnostics(monkeypatch):
    from lcaobound import gridnum

    real = gridnum.kernels

    class Stalling:
        def __getattr__(self, name):
            return getattr(real, name)

        @staticmethod
        def inverse_iteration(d, e, w, max_iter=10, rtol=64.0):
            Z, it, res = real.inverse_iteration(d, e, w, max_iter, rtol)
            return Z, it, res + 1.0

    monkeypatch.setattr(gridnum, "kernels", Stalling())
    with pytest.raises(ConvergenceError) as info:
        tridiag_eigen(SymTridiag(np.full(5, 2.0), np.full(4, -1.0)), 2)
    assert info.value.diagnostics["indices"] == [0, 1]


def test_eigenpairs_continuum_normalisation():
    g = make_grid(-5, 5, 401)
    ep = tridiag_eigen(fd_operator(g.h, np.ones(g.n_points - 2)), 4).to_continuum(g.h)
    assert ep.normalization == CONTINUUM
    np.testing.assert_allclose(g.h * ep.vectors.T @ ep.vectors, np.eye(4), atol=1e-10)


def test_apply_sign_rule_skips_tiny_entries():
    V = np.array([[1e-10, 0.0], [-0.5, 0.2], [0.1, -0.3]])
    W = apply_sign_rule(V)
    assert W[1, 0] > 0 and W[1, 1] > 0


# -- tridiagonal solves -------------------------------------------------------


def test_solve_tridiag_identity():
    r = np.arange(5.0)
    np.testing.assert_array_equal(solve_tridiag(SymTridiag(np.ones(5), np.zeros(4)), r), r)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 2**31 - 1))
def test_solve_tridiag_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    T = random_spd_tridiag(rng, max(n, 2))
    w = rng.normal(size=T.n)
    rhs = T.matvec(w)
    x = solve_tridiag(T, rhs)
    np.testing.assert_allclose(x, w, atol=1e-12 * max(1.0, np.max(np.abs(w))))
    assert np.linalg.norm(T.matvec(x) - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_solve_tridiag_shifted_laplacian_interior():
    g = make_grid(-5, 5, 2001)
    T = fd_operator(g.h, np.ones(g.n_points - 2))
    w = solve_tridiag(T, np.ones(T.n))
    # -w''/2 + w = 1, w(+-5) = 0
    exact = 1.0 - np.cosh(np.sqrt(2.0) * g.interior) / np.cosh(5.0 * np.sqrt(2.0))
    np.testing.assert_allclose(w, exact, atol=1e-5)
    assert np.all(np.abs(w[np.abs(g.interior) < 2.0] - 1.0) < 0.05)
    small = make_grid(-5, 5, 41)
    Ts = fd_operator(small.h, np.ones(39))
    np.testing.assert_allclose(solve_tridiag(Ts, np.ones(39)), np.linalg.solve(Ts.to_dense(), np.ones(39)),
                               rtol=1e-12)


def test_solve_tridiag_detects_indefinite():
    with pytest.raises(NotCoerciveError):
        solve_tridiag(SymTridiag(np.array([1.0, -1.0, 1.0]), np.zeros(2)), np.ones(3))


def test_solve_tridiag_shape_error():
    with pytest.raises(ShapeError):
        solve_tridiag(SymTridiag(np.ones(3), np.zeros(2)), np.ones(4))


def test_count_below_matches_eigenvalues():
    rng = np.random.default_rng(11)
    T = random_tridiag(rng, 60)
    vals = np.linalg.eigvalsh(T.to_dense())
    for x in (-1.0, 0.0, 0.7):
        assert T.count_below(x) == int(np.sum(vals < x))


# -- quadrature ---------------------------------------------------------------


def test_quad_inner_hermite_normalisation_and_parity():
    g = make_grid(-5, 5, 2001)
    H = hermite_table(2, g.points)
    assert quad_inner(g, H[0], H[0]) == pytest.approx(1.0, abs=1e-10)
    assert abs(quad_inner(g, H[0], H[1])) < 1e-10


def test_quad_inner_exact_for_constants_and_linear():
    g = make_grid(0, 1, 11)
    assert quad_inner(g, np.ones(11), np.ones(11)) == pytest.approx(1.0, abs=1e-15)
    assert quad_inner(g, g.points, np.ones(11)) == pytest.approx(0.5, abs=1e-15)


def test_quad_inner_symmetric_bilinear(rng):
    g = make_grid(-1, 2, 31)
    f, u, v = rng.normal(size=(3, 31))
    assert quad_inner(g, f, u) == pytest.approx(quad_inner(g, u, f))
    assert quad_inner(g, f, 2 * u + v) == pytest.approx(2 * quad_inner(g, f, u) + quad_inner(g, f, v))


def test_quad_inner_second_order():
    exact = 0.5 + np.sin(2.0) / 4.0  # int_0^1 cos^2
    errs = []
    for n in (11, 21, 41):
        g = make_grid(0, 1, n)
        errs.append(abs(quad_inner(g, np.cos(g.points), np.cos(g.points)) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.05)


def test_quad_inner_shape_error():
    with pytest.raises(ShapeError):
        quad_inner(make_grid(0, 1, 5), np.ones(5), np.ones(4))


# -- pivoted Cholesky ---------------------------------------------------------


def test_pivoted_cholesky_identity_full_rank():
    c = pivoted_cholesky(np.eye(7))
    assert c.rank == 7
    np.testing.assert_array_equal(c.permutation, np.arange(7))


def test_pivoted_cholesky_duplicate_column():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 6))
    X = np.column_stack([X, X[:, 2]])
    assert pivoted_cholesky(X.T @ X).rank == 6


def test_pivoted_cholesky_factor_reconstructs():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(12, 9))
    S = X.T @ X
    c = pivoted_cholesky(S)
    p = c.permutation
    np.testing.assert_allclose(S[np.ix_(p, p)][:, : c.rank], c.factor @ c.leading.T, atol=1e-10)


def test_pivoted_cholesky_two_atom_overcomplete():
    g = make_grid(-14, 14, 28001)
    system = MolecularSystem(alpha=0.5)
    mats = assemble_galerkin(g, system, AOBasis.diatomic(1.0, 30, 30))
    w = np.linalg.eigvalsh(mats.S_chi)
    assert mats.chol.rank < 60
    assert abs(mats.chol.rank - int(np.sum(w > 1e-8 * w[-1]))) <= 3


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 25), r=st.integers(1, 25), seed=st.integers(0, 2**31 - 1))
def test_pivoted_cholesky_rank_matches_eigenvalue_count(n, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, n)
    X = rng.normal(size=(r, n)) * np.exp(rng.uniform(-3, 0, size=(r, 1)))
    S = X.T @ X
    w = np.linalg.eigvalsh(S)
    count = int(np.sum(w > 1e-8 * w[-1]))
    assert abs(pivoted_cholesky(S, 1e-8).rank - count) <= 1


def test_pivoted_cholesky_rejects_indefinite():
    with pytest.raises(NotPSDError):
        pivoted_cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_pivoted_cholesky_rejects_non_square():
    with pytest.raises(ShapeError):
        pivoted_cholesky(np.ones((2, 3)))


# -- generalized eigenproblem -------------------------------------------------


def test_gen_sym_eig_identity_overlap(rng):
    A = rng.normal(size=(8, 8))
    A = A + A.T
    ep = gen_sym_eig(A, np.eye(8))
    np.testing.assert_allclose(ep.values, np.linalg.eigvalsh(A), atol=1e-12)
    assert ep.normalization == DISCRETE


def test_gen_sym_eig_proportional_pencil(rng):
    X = rng.normal(size=(5, 9))
    S = X.T @ X
    ep = gen_sym_eig(2 * S, S)
    assert len(ep.values) == 5
    np.testing.assert_allclose(ep.values, 2.0, atol=1e-9)


def test_gen_sym_eig_s_orthonormal(rng):
    X = rng.normal(size=(10, 10))
    S = X.T @ X + 0.1 * np.eye(10)
    A = rng.normal(size=(10, 10))
    A = A + A.T
    ep = gen_sym_eig(A, S)
    C = ep.vectors
    np.testing.assert_allclose(C.T @ S @ C, np.eye(10), atol=1e-10)
    np.testing.assert_allclose(ep.values, sla.eigh(A, S, eigvals_only=True), rtol=1e-9, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_gen_sym_eig_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(9, 9))
    S = X.T @ X + 0.5 * np.eye(9)
    A = rng.normal(size=(9, 9))
    A = A @ A.T
    p = rng.permutation(9)
    v0 = gen_sym_eig(A, S).values
    v1 = gen_sym_eig(A[np.ix_(p, p)], S[np.ix_(p, p)]).values
    np.testing.assert_allclose(v1, v0, rtol=1e-10, atol=1e-12)


def test_gen_sym_eig_empty_subspace():
    with pytest.raises(DegenerateBasisError):
        gen_sym_eig(np.zeros((3, 3)), np.zeros((3, 3)))


def test_gen_sym_eig_shape_mismatch():
    with pytest.raises(ShapeError):
        gen_sym_eig(np.eye(2), np.eye(3))


def test_gen_sym_eig_variational_single_atom():
    g = make_grid(-16, 16, 6401)
    system = MolecularSystem(z_left=1.0, z_right=0.0, alpha=0.5, sigma=4.0)
    prev = np.inf
    for n in range(16, 23):
        mats = assemble_galerkin(g, system, AOBasis(((-1.0, n),)))
        lam = gen_sym_eig(mats.A_chi, mats.S_chi).values[0]
        assert lam <= prev + 1e-12
        prev = lam


def test_reduced_solve_on_full_rank(rng):
    X = rng.normal(size=(6, 6))
    A = X @ X.T + np.eye(6)
    b = rng.normal(size=6)
    x = reduced_solve(A, pivoted_cholesky(np.eye(6)), b)
    np.testing.assert_allclose(A @ x, b, atol=1e-10)
