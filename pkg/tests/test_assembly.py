import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import hanging_corner_mesh
from fracfem.assembly import (ElementQuadrature, assemble, assemble_global, discrete_diffusion,
                              local_advection, local_boundary_mass, local_convection,
                              local_diffusion, local_mass, lumped, restrict_elemental,
                              symmetrize)
from fracfem.fespace import FESpace
from fracfem.geometry import BoxDomain, Fracture, MaterialField, MatrixRegion
from fracfem.linalg import mmatrix_scans
from fracfem.mesh import build_mesh

# frozen oracles for the unit square element with one hanging corner
A_H = np.array([[2, -.5, -.5, -1], [-.5, 2, -1, -.5], [-.5, -1, 2, -.5], [-1, -.5, -.5, 2]]) / 3
R_E = np.array([[.5, 0, 0, 0], [.5, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
# reference order has the first two and last two dof labels swapped
A_R_REF = np.array([[8, 1, -4, -5], [1, 2, -2, -1], [-4, -2, 8, -2], [-5, -1, -2, 8]]) / 12
S_R_REF = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]) / 12
MIRROR = [1, 0, 3, 2]
T_H = np.array([[-2, -2, -1, -1], [2, 2, 1, 1], [-1, -1, -2, -2], [1, 1, 2, 2]]) / 12
S_T_H = np.array([[3, -2, 0, -1], [-2, 4, -1, -1], [0, -1, 3, -2], [-1, -1, -2, 4]]) / 12
T_R = np.array([[-1, -3, -1, -1], [1, 3, 1, 1], [-1, -3, -4, -4], [1, 3, 4, 4]]) / 24
S_T_R = np.array([[2, -1, 0, -1], [-1, 5, -1, -3], [0, -1, 5, -4], [-1, -3, -4, 8]]) / 24
MASS = np.array([[4, 2, 2, 1], [2, 4, 1, 2], [2, 1, 4, 2], [1, 2, 2, 4]]) / 36


def corner_restriction():
    mesh = hanging_corner_mesh()
    space = FESpace(mesh)
    e = mesh.locate(np.array([[0.5, 0.5]]))[0]
    return space.elemental_restriction(e)


class TestLocalMatrices:
    def test_diffusion(self):
        np.testing.assert_allclose(local_diffusion(), A_H, rtol=0, atol=1e-14)

    def test_diffusion_scales_with_k_not_size(self):
        np.testing.assert_allclose(local_diffusion(0.25, 0.25, 3.0), 3 * A_H, atol=1e-14)

    def test_rectangle_diffusion(self):
        A = local_diffusion(2.0, 1.0)
        np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-14)
        assert A[0, 2] < A[0, 1]  # the short edge couples more strongly

    def test_mass(self):
        np.testing.assert_allclose(local_mass(), MASS, atol=1e-15)
        assert local_mass(0.5, 0.5, 0.2).sum() == pytest.approx(0.05)

    def test_boundary_mass(self):
        B = local_boundary_mass(3.0, 0.5)
        np.testing.assert_allclose(B, [[0.5, 0.25], [0.25, 0.5]])

    def test_transport(self):
        np.testing.assert_allclose(local_convection((1.0, 0.0)), T_H, atol=1e-14)
        np.testing.assert_allclose(local_advection((1.0, 0.0)), -T_H, atol=1e-14)

    def test_convection_columns_sum_to_zero(self):
        # int N_j u.grad(sum_i N_i) = 0
        K = local_convection((0.3, -1.7), 0.5, 2.0)
        np.testing.assert_allclose(K.sum(axis=0), 0, atol=1e-14)


class TestHangingCornerElement:
    def test_restriction(self):
        dofs, R = corner_restriction()
        np.testing.assert_array_equal(R, R_E)
        assert len(dofs) == 4

    def test_restriction_dof_positions(self):
        mesh = hanging_corner_mesh()
        space = FESpace(mesh)
        dofs, _ = corner_restriction()
        np.testing.assert_array_equal(space.dof_coords()[dofs], [[-1, 0], [1, 0], [0, 1], [1, 1]])

    def test_restricted_diffusion(self):
        _, R = corner_restriction()
        Ar = restrict_elemental(A_H, R)
        np.testing.assert_allclose(Ar[np.ix_(MIRROR, MIRROR)], A_R_REF, rtol=0, atol=1e-14)

    def test_diffusion_stabilization(self):
        _, R = corner_restriction()
        S = discrete_diffusion(restrict_elemental(A_H, R))
        np.testing.assert_allclose(S[np.ix_(MIRROR, MIRROR)], S_R_REF, rtol=0, atol=1e-14)

    def test_stabilized_diffusion_is_mmatrix_block(self):
        _, R = corner_restriction()
        Ar = restrict_elemental(A_H, R)
        As = Ar + discrete_diffusion(Ar)
        np.testing.assert_allclose(12 * As[0], [3, 0, -1, -2], atol=1e-13)
        off = As[~np.eye(4, dtype=bool)]
        assert off.max() <= 0

    def test_transport_stabilization(self):
        np.testing.assert_allclose(discrete_diffusion(T_H), S_T_H, rtol=0, atol=1e-14)

    def test_restricted_transport(self):
        _, R = corner_restriction()
        Tr = restrict_elemental(local_convection((1.0, 0.0)), R)
        np.testing.assert_allclose(Tr, T_R, rtol=0, atol=1e-14)
        np.testing.assert_allclose(discrete_diffusion(Tr), S_T_R, rtol=0, atol=1e-14)


finite = st.floats(-10, 10, allow_nan=False)


class TestDiscreteDiffusion:
    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (5, 5), elements=finite))
    def test_sums_and_symmetry(self, A):
        S = discrete_diffusion(A)
        np.testing.assert_allclose(S, S.T, atol=0)
        np.testing.assert_allclose(S.sum(axis=0), 0, atol=1e-13)
        np.testing.assert_allclose(S.sum(axis=1), 0, atol=1e-13)
        B = A + S
        off = ~np.eye(5, dtype=bool)
        assert np.all(B[off] <= 1e-12)

    def test_nonpositive_input_untouched(self):
        A = -np.abs(np.random.default_rng(0).normal(size=(4, 4)))
        np.testing.assert_array_equal(discrete_diffusion(A), np.zeros((4, 4)))

    def test_sparse_matches_dense(self, rng):
        A = rng.normal(size=(6, 6))
        A[rng.random((6, 6)) < 0.4] = 0
        S = discrete_diffusion(sp.csr_matrix(A))
        np.testing.assert_allclose(S.toarray(), discrete_diffusion(A), atol=1e-15)


def graded_setup(k_frac=1e4):
    d = BoxDomain(0, 0, 1, 1)
    fr = [Fracture.from_segment((0.1, 0.2), (0.9, 0.7), 0.01, k_frac)]
    mat = MaterialField(d, [MatrixRegion((0, 0, 1, 1), 1.0, 1.0)], fr)
    mesh = build_mesh(d, 6, 6, fr, 3)
    return FESpace(mesh), ElementQuadrature(mesh, mat)


class TestAssembly:
    def test_elementwise_equals_global_route(self):
        space, quad = graded_setup()
        AH = quad.element_matrices("diffusion")
        A1 = assemble(space, AH)
        A2 = assemble_global(space, AH)
        assert abs(A1 - A2).max() < 1e-12 * abs(A2).max()

    def test_diffusion_annihilates_constants(self):
        space, quad = graded_setup()
        A = assemble(space, quad.element_matrices("diffusion"), stabilize=True)
        one = np.ones(space.n_dofs)
        assert np.abs(A @ one).max() < 1e-12 * abs(A).max()

    def test_stabilization_sums_vanish(self):
        space, quad = graded_setup()
        AH = quad.element_matrices("diffusion")
        S = assemble(space, AH, stabilize=True) - assemble(space, AH)
        scale = abs(S).max()
        assert scale > 0
        assert np.abs(np.asarray(S.sum(axis=0))).max() <= 1e-14 * scale
        assert np.abs(np.asarray(S.sum(axis=1))).max() <= 1e-14 * scale

    def test_stabilized_matrix_has_nonpositive_offdiagonals(self):
        space, quad = graded_setup()
        AH = quad.element_matrices("diffusion")
        A, flags = assemble(space, AH, stabilize=True, return_flags=True)
        assert flags.any()
        assert mmatrix_scans(A)["offdiag_nonpositive"]

    def test_mass_integrates_area(self):
        space, quad = graded_setup()
        M = assemble(space, quad.element_matrices("mass"))
        assert M.sum() == pytest.approx(1.0, rel=1e-13)
        assert np.all(lumped(M) > 0)

    def test_mass_with_porosity(self):
        d = BoxDomain(0, 0, 2, 1)
        mat = MaterialField(d, [MatrixRegion((0, 0, 2, 1), 1.0, 0.3),
                                MatrixRegion((1, 0, 2, 1), 1.0, 0.1)])
        mesh = build_mesh(d, 4, 2)
        space = FESpace(mesh)
        M = assemble(space, ElementQuadrature(mesh, mat).element_matrices("mass"))
        assert M.sum() == pytest.approx(0.4, rel=1e-13)

    def test_symmetrize(self):
        A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0 + 1e-16, 1.0]]))
        S = symmetrize(A)
        assert (S != S.T).nnz == 0
