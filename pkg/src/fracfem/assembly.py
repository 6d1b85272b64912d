"""Element matrices, restriction to regular dofs and global assembly."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import shape_gradients, shape_values
from .geometry import boxes_intersect_any
from .kernels import restrict_elements


@dataclass(frozen=True)
class Rule:
    """Tensor Gauss rule on the unit square; weights sum to one."""

    xi: np.ndarray
    eta: np.ndarray
    w: np.ndarray

    @classmethod
    def gauss(cls, n):
        x, w = np.polynomial.legendre.leggauss(n)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        XI, ETA = np.meshgrid(x, x, indexing="xy")
        W = np.outer(w, w)
        return cls(XI.ravel(), ETA.ravel(), W.ravel())

    @property
    def n(self):
        return len(self.w)

    def tables(self):
        N = shape_values(self.xi, self.eta)
        dxi, deta = shape_gradients(self.xi, self.eta)
        return N, dxi, deta


RULE_REGULAR = Rule.gauss(2)
RULE_CUT = Rule.gauss(4)


def gauss_1d(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# --------------------------------------------------------- element matrices
def diffusion_matrices(hx, hy, kq, rule):
    """``int_E k grad N_j . grad N_i`` for rectangles; ``kq`` is (nE, nq)."""
    _, dxi, deta = rule.tables()
    Gx = np.einsum("qi,qj->qij", dxi, dxi)
    Gy = np.einsum("qi,qj->qij", deta, deta)
    hx = np.asarray(hx, dtype=float)
    hy = np.asarray(hy, dtype=float)
    wk = np.asarray(kq) * rule.w
    return (np.einsum("eq,qij->eij", wk * (hy / hx)[:, None], Gx)
            + np.einsum("eq,qij->eij", wk * (hx / hy)[:, None], Gy))


def mass_matrices(hx, hy, phiq, rule):
    N, _, _ = rule.tables()
    G = np.einsum("qi,qj->qij", N, N)
    wk = np.asarray(phiq) * rule.w * (np.asarray(hx) * np.asarray(hy))[:, None]
    return np.einsum("eq,qij->eij", wk, G)


def convection_matrices(hx, hy, uq, rule):
    """``K_ij = int_E N_j (u . grad N_i)``; ``uq`` is (nE, nq, 2)."""
    N, dxi, deta = rule.tables()
    hx = np.asarray(hx, dtype=float)[:, None]
    hy = np.asarray(hy, dtype=float)[:, None]
    ax = uq[..., 0] * rule.w * hy  # hx*hy/hx
    ay = uq[..., 1] * rule.w * hx
    return np.einsum("eq,qi,qj->eij", ax, dxi, N) + np.einsum("eq,qi,qj->eij", ay, deta, N)


def local_diffusion(hx=1.0, hy=1.0, k=1.0):
    """Element diffusion matrix of a rectangle with constant ``k``."""
    r = RULE_REGULAR
    return diffusion_matrices([hx], [hy], np.full((1, r.n), k), r)[0]


def local_mass(hx=1.0, hy=1.0, phi=1.0):
    r = RULE_REGULAR
    return mass_matrices([hx], [hy], np.full((1, r.n), phi), r)[0]


def local_boundary_mass(length=1.0, phi=1.0):
    """Mass matrix of the linear trace on one edge."""
    return phi * length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])


def local_convection(u, hx=1.0, hy=1.0):
    """Volume convection matrix ``int_E N_j u . grad N_i`` for constant ``u``."""
    r = RULE_REGULAR
    uq = np.broadcast_to(np.asarray(u, dtype=float), (1, r.n, 2))
    return convection_matrices([hx], [hy], uq, r)[0]


def local_advection(u, hx=1.0, hy=1.0):
    """Element part of ``a(c, q) = -int c u.grad q + int_out c q u.n``.

    With a constant velocity the outflow term over the element boundary turns
    this into the standard convective form; here only the volume part is kept,
    so the result is ``-local_convection``.
    """
    return -local_convection(u, hx, hy)


def restrict_elemental(A, R):
    """``R A R^T`` for one element."""
    R = np.asarray(R, dtype=float)
    return R @ np.asarray(A, dtype=float) @ R.T


# ----------------------------------------------------------- discrete diffusion
def discrete_diffusion(A):
    """Artificial diffusion making every off-diagonal entry non-positive.

    Works for dense arrays and scipy sparse matrices. Rows of the result sum
    to zero and the result is symmetric.
    """
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        B = A.maximum(A.T).maximum(0).tocsr()
        B.setdiag(0.0)
        B.eliminate_zeros()
        return (sp.diags(np.asarray(B.sum(axis=1)).ravel()) - B).tocsr()
    A = np.asarray(A, dtype=float)
    B = np.maximum(np.maximum(A, A.T), 0.0)
    np.fill_diagonal(B, 0.0)
    return np.diag(B.sum(axis=1)) - B


# ------------------------------------------------------------------ quadrature
class ElementQuadrature:
    """Quadrature points of every leaf, 2x2 Gauss or 4x4 Gauss on cut leaves."""

    def __init__(self, mesh, material):
        self.mesh = mesh
        boxes = mesh.leaf_boxes()
        self.boxes = boxes
        self.hx = boxes[:, 2] - boxes[:, 0]
        self.hy = boxes[:, 3] - boxes[:, 1]
        self.cut = boxes_intersect_any(boxes, material.fractures)
        self.groups = []
        for rule, mask in ((RULE_REGULAR, ~self.cut), (RULE_CUT, self.cut)):
            idx = np.flatnonzero(mask)
            if len(idx) == 0:
                continue
            px = boxes[idx, 0:1] + self.hx[idx, None] * rule.xi
            py = boxes[idx, 1:2] + self.hy[idx, None] * rule.eta
            pts = np.column_stack([px.ravel(), py.ravel()])
            k, phi = material.evaluate(pts)
            in_frac = material.in_fracture(pts)
            shape = (len(idx), rule.n)
            self.groups.append({
                "rule": rule, "idx": idx, "x": px, "y": py,
                "k": k.reshape(shape), "phi": phi.reshape(shape),
                "frac": in_frac.reshape(shape),
            })

    def element_matrices(self, kind, coef=None, weight=None):
        """Stack of (nE, 4, 4) element matrices.

        ``kind`` is "diffusion" (uses k), "mass" (uses phi) or "convection"
        (``coef`` maps a group to velocities at its points). ``weight`` maps a
        group to an extra (nG, nq) factor, used for side restrictions.
        """
        out = np.zeros((self.mesh.n_leaves, 4, 4))
        for g in self.groups:
            idx, rule = g["idx"], g["rule"]
            w = 1.0 if weight is None else weight(g)
            if kind == "diffusion":
                out[idx] = diffusion_matrices(self.hx[idx], self.hy[idx], g["k"] * w, rule)
            elif kind == "mass":
                out[idx] = mass_matrices(self.hx[idx], self.hy[idx], g["phi"] * w, rule)
            elif kind == "convection":
                u = coef(g)
                if weight is not None:
                    u = u * np.asarray(w)[..., None]
                out[idx] = convection_matrices(self.hx[idx], self.hy[idx], u, rule)
            else:
                raise ValueError(kind)
        return out


# -------------------------------------------------------------------- assembly
def scatter(space, Ar):
    """Sum padded restricted element matrices into a CSR matrix."""
    dofs = space.elem_dofs
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    vals = Ar.reshape(len(dofs), -1).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = space.n_dofs
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble(space, element_mats, stabilize=False, backend=None, return_flags=False):
    """Restrict element matrices elementwise and assemble on regular dofs.

    With ``stabilize`` every restricted element matrix that has a positive
    off-diagonal entry gets its local discrete diffusion added first.
    """
    Ar, flagged = restrict_elements(space.elem_R, element_mats, stabilize, backend)
    A = scatter(space, Ar)
    if return_flags:
        return A, flagged
    return A


def element_stabilization(space, element_mats, backend=None):
    """Per-element ``S_E`` blocks (zero where no stabilization is needed)."""
    plain, flagged = restrict_elements(space.elem_R, element_mats, False, backend)
    stab, _ = restrict_elements(space.elem_R, element_mats, True, backend)
    return stab - plain, flagged


def assemble_global(space, element_mats):
    """Assemble ``R A^H P`` from the unrestricted global matrix (reference path)."""
    mesh = space.mesh
    cells = mesh.cells
    rows = np.repeat(cells, 4, axis=1).ravel()
    cols = np.tile(cells, (1, 4)).ravel()
    n = mesh.n_nodes
    AH = sp.coo_matrix((element_mats.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return (space.P.T @ AH @ space.P).tocsr()


def symmetrize(A):
    """Bitwise symmetric copy of an (almost) symmetric sparse matrix."""
    A = sp.csr_matrix(A)
    S = ((A + A.T) * 0.5).tocsr()
    S.sort_indices()
    return S


def lumped(M):
    return np.asarray(M.sum(axis=1)).ravel()
