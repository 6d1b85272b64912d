"""Balanced quadtree meshes of bilinear quadrilaterals.

Leaves are stored as ``(level, ix, iy)``, where ``ix, iy`` index the cell on
the uniform grid of that level. Node positions live on the integer lattice of
the finest level, which keeps every geometric query exact.

Local corner order inside a cell is tensor-product order::

    2 --- 3
    |     |
    0 --- 1
"""
import numpy as np

from .geometry import BoxDomain, box_intersects_fracture


class MeshError(ValueError):
    pass


# corner offsets in tensor-product order
_CORNERS = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
# edges as (corner a, corner b); bottom, top, left, right
EDGES = ((0, 1), (2, 3), (0, 2), (1, 3))


def _snap(u, tol=1e-9):
    """Round lattice coordinates that are integers up to rounding noise."""
    r = np.round(u)
    return np.where(np.abs(u - r) < tol, r, u)


class QuadMesh:
    """Leaf set of a quadtree over a background grid of ``be_x * be_y`` cells."""

    def __init__(self, domain, be_x, be_y, level=None, ix=None, iy=None):
        if be_x < 1 or be_y < 1:
            raise MeshError("background grid needs at least one cell per direction")
        self.domain = domain
        self.be_x = int(be_x)
        self.be_y = int(be_y)
        if level is None:
            iy, ix = np.divmod(np.arange(self.be_x * self.be_y), self.be_x)
            level = np.zeros(len(ix), dtype=np.int64)
        self._set_leaves(np.asarray(level, dtype=np.int64),
                         np.asarray(ix, dtype=np.int64), np.asarray(iy, dtype=np.int64))

    @classmethod
    def uniform(cls, domain, be_x, be_y=None):
        if be_y is None:
            be_y = be_x
        return cls(domain, be_x, be_y)

    def _set_leaves(self, level, ix, iy):
        self.max_level = int(level.max()) if len(level) else 0
        L = self.max_level
        s = np.left_shift(1, L - level)
        x0 = ix * s
        y0 = iy * s
        order = np.lexsort((x0, y0))
        self.level = level[order]
        self.ix = ix[order]
        self.iy = iy[order]
        self._cache = {}

    # lattice -------------------------------------------------------------
    @property
    def n_leaves(self):
        return len(self.level)

    @property
    def lattice_shape(self):
        return self.be_x << self.max_level, self.be_y << self.max_level

    @property
    def lattice_spacing(self):
        nx, ny = self.lattice_shape
        return self.domain.width / nx, self.domain.height / ny

    def leaf_lattice(self):
        """Lower-left lattice corner and lattice size of every leaf."""
        s = np.left_shift(1, self.max_level - self.level)
        return self.ix * s, self.iy * s, s

    def leaf_boxes(self):
        X, Y, s = self.leaf_lattice()
        hx, hy = self.lattice_spacing
        d = self.domain
        return np.column_stack([d.x0 + X * hx, d.y0 + Y * hy,
                                d.x0 + (X + s) * hx, d.y0 + (Y + s) * hy])

    def leaf_sizes(self):
        hx, hy = self.lattice_spacing
        s = np.left_shift(1, self.max_level - self.level)
        return s * hx, s * hy

    def leaf_areas(self):
        hx, hy = self.leaf_sizes()
        return hx * hy

    # point location -------------------------------------------------------
    def _level_keys(self):
        if "level_keys" not in self._cache:
            keys = {}
            for lev in np.unique(self.level):
                idx = np.flatnonzero(self.level == lev)
                k = self.ix[idx] * (self.be_y << int(lev)) + self.iy[idx]
                o = np.argsort(k)
                keys[int(lev)] = (k[o], idx[o])
            self._cache["level_keys"] = keys
        return self._cache["level_keys"]

    def locate_lattice(self, fx, fy):
        """Leaf index containing fine lattice cells ``(fx, fy)``; -1 if outside."""
        fx = np.asarray(fx, dtype=np.int64)
        fy = np.asarray(fy, dtype=np.int64)
        nx, ny = self.lattice_shape
        out = np.full(fx.shape, -1, dtype=np.int64)
        inside = (fx >= 0) & (fx < nx) & (fy >= 0) & (fy < ny)
        for lev, (keys, idx) in self._level_keys().items():
            sh = self.max_level - lev
            k = (fx >> sh) * (self.be_y << lev) + (fy >> sh)
            pos = np.searchsorted(keys, k)
            pos = np.minimum(pos, len(keys) - 1)
            hit = inside & (keys[pos] == k)
            out[hit] = idx[pos[hit]]
        return out

    def locate(self, points):
        """Leaf index containing each point. Ties go to the upper/right leaf."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.domain
        hx, hy = self.lattice_spacing
        nx, ny = self.lattice_shape
        tol = 1e-12 * max(d.width, d.height)
        outside = ~d.contains(p, tol)
        fx = np.clip(np.floor(_snap((p[:, 0] - d.x0) / hx)), 0, nx - 1).astype(np.int64)
        fy = np.clip(np.floor(_snap((p[:, 1] - d.y0) / hy)), 0, ny - 1).astype(np.int64)
        out = self.locate_lattice(fx, fy)
        out[outside] = -1
        return out

    # refinement ------------------------------------------------------------
    def refine(self, marked):
        """Split marked leaves into four children, then restore 2:1 balance."""
        marked = np.asarray(marked)
        if marked.dtype == bool:
            marked = np.flatnonzero(marked)
        if len(marked) == 0:
            return self
        self._split(marked)
        self.balance()
        return self

    def _split(self, idx):
        keep = np.ones(self.n_leaves, dtype=bool)
        keep[idx] = False
        lev = self.level[idx] + 1
        cx = 2 * self.ix[idx]
        cy = 2 * self.iy[idx]
        new_lev = np.concatenate([self.level[keep]] + [lev] * 4)
        new_ix = np.concatenate([self.ix[keep], cx, cx + 1, cx, cx + 1])
        new_iy = np.concatenate([self.iy[keep], cy, cy, cy + 1, cy + 1])
        self._set_leaves(new_lev, new_ix, new_iy)

    def _coarse_neighbours(self):
        """Leaves lying across an edge from a leaf more than one level finer."""
        X, Y, s = self.leaf_lattice()
        fine = self.level >= 2
        X, Y, s, lev = X[fine], Y[fine], s[fine], self.level[fine]
        half = s // 2
        qx = np.concatenate([X - 1, X + s, X + half, X + half])
        qy = np.concatenate([Y + half, Y + half, Y - 1, Y + s])
        ql = np.concatenate([lev] * 4)
        nb = self.locate_lattice(qx, qy)
        ok = nb >= 0
        bad = nb[ok][self.level[nb[ok]] < ql[ok] - 1]
        return np.unique(bad)

    def balance(self):
        while True:
            bad = self._coarse_neighbours()
            if len(bad) == 0:
                return self
            self._split(bad)

    # derived topology -------------------------------------------------------
    def _topology(self):
        if "topo" in self._cache:
            return self._cache["topo"]
        X, Y, s = self.leaf_lattice()
        nx, _ = self.lattice_shape
        stride = nx + 1
        cx = X[:, None] + s[:, None] * _CORNERS[None, :, 0]
        cy = Y[:, None] + s[:, None] * _CORNERS[None, :, 1]
        ckeys = cy * stride + cx
        node_keys, cells = np.unique(ckeys.ravel(), return_inverse=True)
        cells = cells.reshape(-1, 4)
        # hanging nodes sit in the middle of an edge of the coarser leaf
        hang_nodes, hang_masters = [], []
        big = s >= 2
        for a, b in EDGES:
            mx = (cx[big, a] + cx[big, b]) // 2
            my = (cy[big, a] + cy[big, b]) // 2
            k = my * stride + mx
            pos = np.minimum(np.searchsorted(node_keys, k), len(node_keys) - 1)
            hit = node_keys[pos] == k
            hang_nodes.append(pos[hit])
            hang_masters.append(np.column_stack([cells[big, a][hit], cells[big, b][hit]]))
        hang = np.concatenate(hang_nodes)
        masters = np.concatenate(hang_masters).reshape(-1, 2)
        order = np.argsort(hang, kind="stable")
        hang, masters = hang[order], masters[order]
        if len(np.unique(hang)) != len(hang):
            raise MeshError("a node hangs on two edges; mesh is not 1-irregular")
        topo = {
            "node_keys": node_keys,
            "nodes_lattice": np.column_stack([node_keys % stride, node_keys // stride]),
            "cells": cells,
            "hanging": hang,
            "masters": masters,
        }
        self._cache["topo"] = topo
        return topo

    @property
    def cells(self):
        return self._topology()["cells"]

    @property
    def nodes(self):
        lat = self._topology()["nodes_lattice"]
        hx, hy = self.lattice_spacing
        return np.column_stack([self.domain.x0 + lat[:, 0] * hx,
                                self.domain.y0 + lat[:, 1] * hy])

    @property
    def n_nodes(self):
        return len(self._topology()["node_keys"])

    @property
    def hanging_nodes(self):
        return self._topology()["hanging"]

    @property
    def hanging_masters(self):
        """Endpoints of the coarse edge carrying each hanging node."""
        return self._topology()["masters"]

    def regular_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.hanging_nodes] = False
        return np.flatnonzero(mask)

    def boundary_nodes(self):
        lat = self._topology()["nodes_lattice"]
        nx, ny = self.lattice_shape
        return np.flatnonzero((lat[:, 0] == 0) | (lat[:, 0] == nx)
                              | (lat[:, 1] == 0) | (lat[:, 1] == ny))

    def classify_nodes(self):
        hang = np.zeros(self.n_nodes, dtype=bool)
        hang[self.hanging_nodes] = True
        bnd = np.zeros(self.n_nodes, dtype=bool)
        bnd[self.boundary_nodes()] = True
        return {"regular": np.flatnonzero(~hang), "hanging": np.flatnonzero(hang),
                "boundary": np.flatnonzero(bnd), "interior": np.flatnonzero(~bnd)}

    def boundary_edges(self):
        """Leaf edges on the domain boundary as ``(leaf, local a, local b, side)``.

        ``side`` is 0..3 for bottom, top, left, right.
        """
        X, Y, s = self.leaf_lattice()
        nx, ny = self.lattice_shape
        rows = []
        for side, (a, b), m in ((0, EDGES[0], Y == 0), (1, EDGES[1], Y + s == ny),
                                (2, EDGES[2], X == 0), (3, EDGES[3], X + s == nx)):
            e = np.flatnonzero(m)
            rows.append(np.column_stack([e, np.full(len(e), a), np.full(len(e), b),
                                         np.full(len(e), side)]))
        return np.concatenate(rows).astype(np.int64)

    def summary(self):
        return {"leaves": self.n_leaves, "nodes": self.n_nodes,
                "hanging": len(self.hanging_nodes),
                "regular": self.n_nodes - len(self.hanging_nodes),
                "max_level": self.max_level}


def build_mesh(domain, be_x, be_y, fractures=(), amr_steps=0):
    """Uniform background grid refined ``amr_steps`` times around fractures."""
    mesh = QuadMesh.uniform(domain, be_x, be_y)
    for _ in range(amr_steps):
        cand = np.flatnonzero(mesh.level == mesh.max_level)
        boxes = mesh.leaf_boxes()[cand]
        hit = np.zeros(len(cand), dtype=bool)
        for f in fractures:
            hit |= box_intersects_fracture(boxes, f)
        if not hit.any():
            break
        mesh.refine(cand[hit])
    return mesh


def audit_mesh(mesh, rtol=1e-12):
    """Independent structural checks. Returns a list of problem strings."""
    problems = []
    area = mesh.leaf_areas().sum()
    if abs(area - mesh.domain.area) > rtol * mesh.domain.area:
        problems.append(f"leaf areas sum to {area!r}, domain area {mesh.domain.area!r}")

    topo = mesh._topology()
    lat = topo["nodes_lattice"]
    X, Y, s = mesh.leaf_lattice()
    nx, ny = mesh.lattice_shape
    # count nodes strictly inside every leaf edge; at most one is allowed
    kv = lat[:, 0] * (ny + 1) + lat[:, 1]
    kv.sort()
    kh = lat[:, 1] * (nx + 1) + lat[:, 0]
    kh.sort()
    counts = []
    for x in (X, X + s):
        lo = np.searchsorted(kv, x * (ny + 1) + Y, side="right")
        hi = np.searchsorted(kv, x * (ny + 1) + Y + s, side="left")
        counts.append(hi - lo)
    for y in (Y, Y + s):
        lo = np.searchsorted(kh, y * (nx + 1) + X, side="right")
        hi = np.searchsorted(kh, y * (nx + 1) + X + s, side="left")
        counts.append(hi - lo)
    counts = np.concatenate(counts)
    if counts.max(initial=0) > 1:
        problems.append(f"{int((counts > 1).sum())} leaf edges carry more than one node")

    # level jump across every edge, probed from both quarter points
    q = np.maximum(s // 4, 0)
    q3 = np.maximum(s - 1 - s // 4, 0)
    qx = np.concatenate([X - 1, X - 1, X + s, X + s, X + q, X + q3, X + q, X + q3])
    qy = np.concatenate([Y + q, Y + q3, Y + q, Y + q3, Y - 1, Y - 1, Y + s, Y + s])
    own = np.tile(mesh.level, 8)
    nb = mesh.locate_lattice(qx, qy)
    ok = nb >= 0
    jump = np.abs(mesh.level[nb[ok]] - own[ok])
    if jump.max(initial=0) > 1:
        problems.append(f"{int((jump > 1).sum())} edge neighbours differ by more than one level")

    # every hanging node must sit at the exact midpoint of its masters
    h, m = topo["hanging"], topo["masters"]
    if len(h):
        mid2 = lat[m[:, 0]] + lat[m[:, 1]]
        if np.any(mid2 != 2 * lat[h]):
            problems.append("hanging node off its master edge midpoint")
    return problems


def uniform_mesh_for(domain, be, square=True):
    """Background grid with roughly square cells and ``be`` cells along x."""
    if isinstance(domain, (tuple, list)):
        domain = BoxDomain(*domain)
    be_y = max(1, int(round(be * domain.height / domain.width))) if square else be
    return QuadMesh.uniform(domain, be, be_y)
