import numpy as np
import pytest
import scipy.sparse as sp

from fracfem.assembly import ElementQuadrature, assemble
from fracfem.fespace import FESpace
from fracfem.geometry import BoxDomain, MaterialField, MatrixRegion, random_network
from fracfem.linalg import (SolverError, ZeroSumOperator, apply_dirichlet, mmatrix_scans, solve,
                            spmv, transpose_apply)
from fracfem.mesh import build_mesh


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def stabilized_system(seed):
    rng = np.random.default_rng(seed)
    d = BoxDomain(0, 0, 1, 1)
    fr = random_network(rng, 3, 0.04, k_range=(1e-4, 1e-3))
    mat = MaterialField(d, [MatrixRegion((0, 0, 1, 1), 1.0, 1.0)], fr)
    mesh = build_mesh(d, 4, 4, fr, 2)
    space = FESpace(mesh)
    A = assemble(space, ElementQuadrature(mesh, mat).element_matrices("diffusion"), stabilize=True)
    x = space.dof_coords()
    bnd = np.flatnonzero((x[:, 0] == 0) | (x[:, 0] == 1))
    return A, bnd


class TestProducts:
    def test_identity(self, rng):
        x = rng.normal(size=7)
        np.testing.assert_array_equal(spmv(sp.identity(7, format="csr"), x), x)

    def test_dense_oracle(self, rng):
        A = rng.normal(size=(5, 5))
        A[rng.random((5, 5)) < 0.5] = 0
        x = rng.normal(size=5)
        S = sp.csr_matrix(A)
        np.testing.assert_allclose(spmv(S, x), A @ x, rtol=1e-15)
        np.testing.assert_allclose(transpose_apply(S, x), A.T @ x, rtol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmv(sp.identity(3, format="csr"), np.ones(4))

    def test_zero_sum_operator(self, rng):
        A = laplacian_1d(6).tolil()
        A[0, 0] = 1
        A[5, 5] = 1
        A = A.tocsr()
        x = rng.normal(size=6)
        np.testing.assert_allclose(ZeroSumOperator(A) @ x, A @ x, atol=1e-14)
        # side sums telescope: the total over all rows is exactly zero
        assert (ZeroSumOperator(A) @ x).sum() == pytest.approx(0, abs=1e-15)


class TestSolve:
    def test_diagonal(self):
        A = sp.diags([2.0, 4.0, 8.0]).tocsr()
        x, info = solve(A, np.array([1.0, 1.0, 1.0]), method="direct")
        np.testing.assert_array_equal(x, [0.5, 0.25, 0.125])

    @pytest.mark.parametrize("method", ["direct", "cg", "bicgstab"])
    def test_spd_against_dense(self, method):
        A = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]])
        b = np.array([1.0, -2.0, 0.5])
        x, info = solve(sp.csr_matrix(A), b, method=method, rtol=1e-14, symmetric=True)
        np.testing.assert_allclose(x, np.linalg.inv(A) @ b, atol=1e-12)
        assert info["method"] == method

    @pytest.mark.parametrize("method", ["direct", "cg"])
    def test_residual_contract(self, method):
        A = laplacian_1d(200)
        b = np.random.default_rng(1).normal(size=200)
        x, info = solve(A, b, method=method, rtol=1e-10, symmetric=True)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
        assert info["relative_residual"] <= 1e-10

    def test_auto_switches_to_iterative(self):
        A = laplacian_1d(50)
        _, info = solve(A, np.ones(50), symmetric=True, direct_max=10)
        assert info["method"] == "cg"
        _, info = solve(A, np.ones(50), direct_max=10)
        assert info["method"] == "bicgstab"

    def test_non_convergence_reports_residual(self):
        A = laplacian_1d(400)
        with pytest.raises(SolverError) as exc:
            solve(A, np.ones(400), method="cg", maxiter=3, symmetric=True)
        assert exc.value.diagnostics["iterations"] >= 3
        assert exc.value.diagnostics["residual"] > 0

    def test_singular(self):
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(SolverError):
            solve(A, np.ones(2), method="direct")

    def test_refinement_in_extended_precision(self):
        A = laplacian_1d(30)
        b = np.ones(30)
        x, info = solve(A, b, refine=2, extended=True)
        assert x.dtype == np.longdouble
        assert info["residual"] < 1e-12

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve(laplacian_1d(3), np.ones(3), method="gmres")


class TestDirichlet:
    def test_identity_rows(self):
        A = laplacian_1d(6)
        Am, rhs = apply_dirichlet(A, np.zeros(6), np.array([0, 5]), np.array([1.0, 3.0]))
        for i, g in ((0, 1.0), (5, 3.0)):
            row = Am[i].toarray().ravel()
            assert row[i] == 1 and np.count_nonzero(row) == 1
            assert rhs[i] == g

    def test_constant_solution(self, rng):
        A, bnd = stabilized_system(0)
        Am, rhs = apply_dirichlet(A, np.zeros(A.shape[0]), bnd, np.full(len(bnd), 2.5))
        x, _ = solve(Am, rhs)
        np.testing.assert_allclose(x, 2.5, rtol=1e-12)

    def test_elimination_matches_identity_rows(self, rng):
        A = laplacian_1d(8) + sp.diags(rng.random(8))
        b = rng.normal(size=8)
        D = np.array([0, 3, 7])
        g = rng.normal(size=3)
        Am, rhs = apply_dirichlet(A, b, D, g)
        x, _ = solve(Am, rhs)
        interior = np.setdiff1d(np.arange(8), D)
        Ad = A.toarray()
        xi = np.linalg.solve(Ad[np.ix_(interior, interior)], b[interior] - Ad[np.ix_(interior, D)] @ g)
        np.testing.assert_allclose(x[interior], xi, atol=1e-12)
        np.testing.assert_array_equal(x[D], g)


class TestMMatrix:
    def test_laplacian_with_dirichlet(self):
        A = laplacian_1d(5)
        Am, _ = apply_dirichlet(A, np.zeros(5), np.array([0]), np.array([0.0]))
        scans = mmatrix_scans(Am)
        assert scans["row_dominant"] and scans["strict_row"]
        assert scans["offdiag_nonpositive"] and scans["diag_positive"]

    def test_detects_positive_offdiagonal(self):
        A = sp.csr_matrix(np.array([[2.0, 0.1], [-1.0, 2.0]]))
        scans = mmatrix_scans(A)
        assert not scans["offdiag_nonpositive"]
        assert scans["max_offdiag"] == pytest.approx(0.1)

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_on_stabilized_systems(self, seed):
        A, bnd = stabilized_system(seed)
        rng = np.random.default_rng(seed)
        Am, rhs = apply_dirichlet(A, rng.random(A.shape[0]), bnd, rng.random(len(bnd)))
        scans = mmatrix_scans(Am)
        assert scans["row_dominant"] and scans["strict_row"] and scans["offdiag_nonpositive"]
        x, _ = solve(Am, rhs)
        assert x.min() >= 0
