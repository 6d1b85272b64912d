"""Conforming Q1 space on a 1-irregular quadtree.

Hanging nodes take half the value of each end of the coarse edge they sit on.
Chains are resolved until only regular nodes remain, which gives the
prolongation ``P`` (all nodes x regular dofs) and the restriction ``R = P^T``.
"""
import numpy as np
import scipy.sparse as sp

from .mesh import MeshError


def shape_values(xi, eta):
    """Bilinear shape functions in tensor-product order, shape ``(..., 4)``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta], axis=-1)


def shape_gradients(xi, eta):
    """Reference derivatives ``(dN/dxi, dN/deta)``, each of shape ``(..., 4)``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dxi = np.stack([-(1 - eta), 1 - eta, -eta, eta], axis=-1)
    deta = np.stack([-(1 - xi), -xi, 1 - xi, xi], axis=-1)
    return dxi, deta


def build_prolongation(n_nodes, hanging, masters):
    """Sparse ``P`` with ``u_all = P @ u_regular``; also the node-to-dof map."""
    is_hang = np.zeros(n_nodes, dtype=bool)
    is_hang[hanging] = True
    regular = np.flatnonzero(~is_hang)
    rows = np.concatenate([regular, np.repeat(hanging, 2)])
    cols = np.concatenate([regular, masters.ravel()])
    vals = np.concatenate([np.ones(len(regular)), np.full(2 * len(hanging), 0.5)])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
    P = T.copy()
    for _ in range(64):
        coo = P.tocoo()
        if not is_hang[coo.col].any():
            break
        P = (P @ T).tocsr()
    else:  # pragma: no cover
        raise MeshError("hanging node constraints do not resolve")
    node_to_dof = np.full(n_nodes, -1, dtype=np.int64)
    node_to_dof[regular] = np.arange(len(regular))
    P = P[:, regular].tocsr()
    P.sort_indices()
    P.eliminate_zeros()
    return P, node_to_dof, regular


def elemental_restrictions(cells, P):
    """Padded per-element dof lists and restriction blocks.

    Returns ``dofs (nE, m)`` with -1 padding and ``R (nE, m, 4)`` so that
    ``R[e] @ A_e @ R[e].T`` is the element matrix on ``dofs[e]``. Dofs are
    listed in order of first appearance over the corners.
    """
    n_el = len(cells)
    nodes = cells.ravel()
    start = P.indptr[nodes]
    count = P.indptr[nodes + 1] - start
    total = int(count.sum())
    slot = np.repeat(np.arange(4 * n_el), count)
    offs = np.arange(total) - np.repeat(np.cumsum(count) - count, count)
    ent = np.repeat(start, count) + offs
    col = P.indices[ent]
    w = P.data[ent]
    el = slot // 4
    corner = slot % 4
    n_dof = P.shape[1]
    key = el * n_dof + col
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    # rank each distinct (element, dof) by first appearance inside its element
    u_el = el[first]
    order = np.lexsort((first, u_el))
    rank = np.empty(len(first), dtype=np.int64)
    starts = np.searchsorted(u_el[order], u_el[order], side="left")
    rank[order] = np.arange(len(first)) - starts
    m = int(rank.max()) + 1 if len(rank) else 0
    dofs = np.full((n_el, m), -1, dtype=np.int64)
    dofs[u_el, rank] = col[first]
    R = np.zeros((n_el, m, 4))
    R[el, rank[inv], corner] = w
    return dofs, R


class FESpace:
    """Regular-dof Q1 space with its hanging-node constraint data."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.P, self.node_to_dof, self.dof_nodes = build_prolongation(
            mesh.n_nodes, mesh.hanging_nodes, mesh.hanging_masters)
        self.elem_dofs, self.elem_R = elemental_restrictions(mesh.cells, self.P)

    @property
    def n_dofs(self):
        return self.P.shape[1]

    @property
    def R(self):
        return self.P.T.tocsr()

    def dof_coords(self):
        return self.mesh.nodes[self.dof_nodes]

    def elemental_restriction(self, e):
        """``(J_r, R_E)`` of leaf ``e`` without padding."""
        d = self.elem_dofs[e]
        keep = d >= 0
        return d[keep], self.elem_R[e][keep]

    def to_nodes(self, u):
        return self.P @ u

    def restrict(self, f_all):
        return self.P.T @ f_all

    def interpolate(self, fn):
        x = self.dof_coords()
        return np.asarray(fn(x[:, 0], x[:, 1]), dtype=float)

    def local_coords(self, leaf, points):
        boxes = self.mesh.leaf_boxes()[leaf]
        p = np.atleast_2d(points)
        xi = (p[:, 0] - boxes[:, 0]) / (boxes[:, 2] - boxes[:, 0])
        eta = (p[:, 1] - boxes[:, 1]) / (boxes[:, 3] - boxes[:, 1])
        return np.clip(xi, 0.0, 1.0), np.clip(eta, 0.0, 1.0)

    def basis_at(self, points, leaf=None):
        """Conforming basis values at points.

        Returns ``(leaf, dofs, values)`` where ``dofs`` and ``values`` have
        shape ``(n, m)`` and padded slots carry dof -1 and value 0.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if leaf is None:
            leaf = self.mesh.locate(p)
        if np.any(leaf < 0):
            raise ValueError("point outside the mesh")
        xi, eta = self.local_coords(leaf, p)
        N = shape_values(xi, eta)
        vals = np.einsum("nak,nk->na", self.elem_R[leaf], N)
        return leaf, self.elem_dofs[leaf], vals

    def evaluate(self, u, points):
        """Point values of the finite element function with dof vector ``u``."""
        _, dofs, vals = self.basis_at(points)
        uu = np.where(dofs >= 0, np.asarray(u)[np.maximum(dofs, 0)], 0.0)
        return (uu * vals).sum(axis=1)

    def gradient(self, u, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        leaf = self.mesh.locate(p)
        xi, eta = self.local_coords(leaf, p)
        dxi, deta = shape_gradients(xi, eta)
        un = self.to_nodes(u)[self.mesh.cells[leaf]]
        hx, hy = self.mesh.leaf_sizes()
        return np.column_stack([(un * dxi).sum(1) / hx[leaf], (un * deta).sum(1) / hy[leaf]])


def segment_quadrature(mesh, a, b, n=2, breaks=()):
    """Gauss points along the straight segment ``a -> b``.

    The segment is split wherever it crosses a fine lattice line, so every
    piece lies inside one leaf, and at the extra parameters in ``breaks``.
    Returns ``(leaf, points, weights, t)`` where ``t`` is the parameter of each
    point along the segment.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    length = float(np.hypot(*d))
    if length == 0:
        return (np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    dom = mesh.domain
    hx, hy = mesh.lattice_spacing
    ts = [np.array([0.0, 1.0]), np.asarray(breaks, dtype=float).ravel()]
    for axis, (o, h) in enumerate(((dom.x0, hx), (dom.y0, hy))):
        if abs(d[axis]) > 1e-14 * length:
            u0 = (a[axis] - o) / h
            u1 = (b[axis] - o) / h
            lo, hi = sorted((u0, u1))
            k = np.arange(np.ceil(lo), np.floor(hi) + 1)
            ts.append((k - u0) / (u1 - u0))
    t = np.unique(np.clip(np.concatenate(ts), 0.0, 1.0))
    t = t[np.concatenate([[True], np.diff(t) > 1e-13])]
    t0, t1 = t[:-1], t[1:]
    mid = a + np.outer(0.5 * (t0 + t1), d)
    leaf = mesh.locate(mid)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    tq = (t0[:, None] + np.outer(t1 - t0, x)).ravel()
    wq = (np.outer(t1 - t0, w) * length).ravel()
    pts = a + np.outer(tq, d)
    return np.repeat(leaf, n), pts, wq, tq
