"""Darcy pressure solve and conservative boundary and interface fluxes.

Neumann data and all reported fluxes are Darcy normal fluxes ``u . n`` with
``u = -k grad p``, so a negative Neumann value is an inflow. The residual
``r_i = d(p, N_i) - f(N_i)`` over regular dofs equals minus the weak boundary
flux on Dirichlet nodes, and restricting the forms to one side of an
interface gives nodal interface fluxes whose sides cancel node by node.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .assembly import ElementQuadrature, scatter, symmetrize
from .fespace import FESpace, segment_quadrature, shape_gradients, shape_values
from .kernels import restrict_elements
from .linalg import SolverError, ZeroSumOperator, apply_dirichlet, mmatrix_scans, solve

SIDES = ("bottom", "top", "left", "right")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySegment:
    """Part of one side of the domain box, ``start..end`` along that side."""

    side: str
    start: float
    end: float
    kind: str  # "dirichlet" or "neumann"
    value: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise ConfigError(f"unknown boundary side {self.side!r}")
        if self.kind not in ("dirichlet", "neumann"):
            raise ConfigError(f"unknown boundary kind {self.kind!r}")
        if not self.end > self.start:
            raise ConfigError("boundary segment must have end > start")

    def endpoints(self, domain):
        x0, y0, x1, y1 = domain.bounds
        s, e = self.start, self.end
        return {
            "bottom": ((s, y0), (e, y0)),
            "top": ((s, y1), (e, y1)),
            "left": ((x0, s), (x0, e)),
            "right": ((x1, s), (x1, e)),
        }[self.side]

    def outward_normal(self):
        return {"bottom": (0.0, -1.0), "top": (0.0, 1.0),
                "left": (-1.0, 0.0), "right": (1.0, 0.0)}[self.side]


def full_sides(domain):
    return [BoundarySegment("bottom", domain.x0, domain.x1, "neumann", 0.0),
            BoundarySegment("top", domain.x0, domain.x1, "neumann", 0.0),
            BoundarySegment("left", domain.y0, domain.y1, "neumann", 0.0),
            BoundarySegment("right", domain.y0, domain.y1, "neumann", 0.0)]


def nodes_on_segments(space, segments):
    """Regular dofs lying on any of the given boundary segments, with values."""
    x = space.dof_coords()
    dom = space.mesh.domain
    tol = 1e-9 * max(dom.width, dom.height)
    dofs, vals = [], []
    for s in segments:
        (ax, ay), (bx, by) = s.endpoints(dom)
        on = ((x[:, 0] >= min(ax, bx) - tol) & (x[:, 0] <= max(ax, bx) + tol)
              & (x[:, 1] >= min(ay, by) - tol) & (x[:, 1] <= max(ay, by) + tol))
        idx = np.flatnonzero(on)
        dofs.append(idx)
        vals.append(np.full(len(idx), float(s.value)))
    if not dofs:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    d = np.concatenate(dofs)
    v = np.concatenate(vals)
    d, first = np.unique(d, return_index=True)
    return d, v[first]


def trace_points(space, segments, n=2, breaks=None):
    """Quadrature on a list of segments given as ``(a, b)`` pairs.

    Returns ``(dofs, values, weights, points, segment_id)`` with conforming
    basis values per point.
    """
    out = {"dofs": [], "vals": [], "w": [], "pts": [], "seg": []}
    for i, (a, b) in enumerate(segments):
        br = () if breaks is None else breaks(a, b)
        leaf, pts, w, _ = segment_quadrature(space.mesh, a, b, n, br)
        if len(w) == 0:
            continue
        _, dofs, vals = space.basis_at(pts, leaf)
        out["dofs"].append(dofs)
        out["vals"].append(vals)
        out["w"].append(w)
        out["pts"].append(pts)
        out["seg"].append(np.full(len(w), i))
    if not out["w"]:
        m = space.elem_dofs.shape[1]
        return (np.zeros((0, m), dtype=np.int64), np.zeros((0, m)), np.zeros(0),
                np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
    return (np.concatenate(out["dofs"]), np.concatenate(out["vals"]),
            np.concatenate(out["w"]), np.concatenate(out["pts"]), np.concatenate(out["seg"]))


def _load(n, dofs, vals, coef):
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=(vals * coef[:, None])[keep], minlength=n).astype(float)


def _trace_mass(n, dofs, vals, w):
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    v = (vals[:, :, None] * vals[:, None, :] * w[:, None, None]).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix((v[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()


# ------------------------------------------------------------------ interfaces
class LineInterface:
    """Straight interface through ``point`` with unit ``normal``.

    Side 1 is ``(x - point) . normal < 0``; the normal points out of side 1.
    """

    def __init__(self, point, normal, name="line"):
        self.point = np.asarray(point, dtype=float)
        n = np.asarray(normal, dtype=float)
        self.normal = n / np.hypot(*n)
        self.name = name

    def side(self, points):
        p = np.atleast_2d(points)
        return np.where((p - self.point) @ self.normal < 0, 1, 2)

    def crossings(self, a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        da = (a - self.point) @ self.normal
        db = (b - self.point) @ self.normal
        if da * db < 0:
            return [da / (da - db)]
        return []

    def trace_segments(self, material):
        d = material.domain
        t = np.array([-self.normal[1], self.normal[0]])
        # clip the infinite line to the domain box
        lo, hi = -np.inf, np.inf
        for axis, (mn, mx) in enumerate(((d.x0, d.x1), (d.y0, d.y1))):
            if abs(t[axis]) < 1e-15:
                if not (mn <= self.point[axis] <= mx):
                    return []
                continue
            s0 = (mn - self.point[axis]) / t[axis]
            s1 = (mx - self.point[axis]) / t[axis]
            lo, hi = max(lo, min(s0, s1)), min(hi, max(s0, s1))
        if hi <= lo:
            return []
        return [(self.point + lo * t, self.point + hi * t)]

    def clip(self, box, side):
        """Polygon of ``box`` on the given side, or None if the line misses it."""
        x0, y0, x1, y1 = box
        poly = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        s = (poly - self.point) @ self.normal
        if np.all(s <= 0) or np.all(s >= 0):
            return None
        if side == 2:
            s = -s
        out = []
        for i in range(4):
            j = (i + 1) % 4
            if s[i] <= 0:
                out.append(poly[i])
            if s[i] * s[j] < 0:
                out.append(poly[i] + s[i] / (s[i] - s[j]) * (poly[j] - poly[i]))
        return np.array(out)


class FractureInterface:
    """Boundary between the fracture union (side 2) and the matrix (side 1)."""

    def __init__(self, name="fracture"):
        self.name = name
        self.material = None

    def bind(self, material):
        self.material = material
        return self

    def side(self, points):
        return np.where(self.material.in_fracture(points), 2, 1)

    def crossings(self, a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        ts = []
        for f in self.material.fractures:
            c = f.corners()
            for i in range(4):
                t = _segment_intersection(a, b, c[i], c[(i + 1) % 4])
                if t is not None:
                    ts.append(t)
        return ts

    def trace_segments(self, material):
        self.material = material
        d = material.domain
        tol = 1e-12 * max(d.width, d.height)
        segs = []
        for i, f in enumerate(material.fractures):
            c = f.corners()
            others = [g for j, g in enumerate(material.fractures) if j != i]
            for k in range(4):
                a, b = c[k], c[(k + 1) % 4]
                ts = [0.0, 1.0]
                for g in others:
                    gc = g.corners()
                    for m in range(4):
                        t = _segment_intersection(a, b, gc[m], gc[(m + 1) % 4])
                        if t is not None:
                            ts.append(t)
                # clip to the domain box
                for axis, (mn, mx) in enumerate(((d.x0, d.x1), (d.y0, d.y1))):
                    da = b[axis] - a[axis]
                    if abs(da) > 0:
                        ts += [(mn - a[axis]) / da, (mx - a[axis]) / da]
                ts = np.unique(np.clip(ts, 0.0, 1.0))
                for t0, t1 in zip(ts[:-1], ts[1:]):
                    if t1 - t0 < 1e-14:
                        continue
                    p0, p1 = a + t0 * (b - a), a + t1 * (b - a)
                    mid = 0.5 * (p0 + p1)
                    if not d.contains(mid[None, :], tol)[0]:
                        continue
                    on_edge = (min(abs(mid[0] - d.x0), abs(mid[0] - d.x1),
                                   abs(mid[1] - d.y0), abs(mid[1] - d.y1)) < tol)
                    inside_other = any(g.contains(mid[None, :])[0] for g in others)
                    if on_edge or inside_other:
                        continue
                    segs.append((p0, p1))
        return segs


def _segment_intersection(a, b, c, d):
    """Parameter along ``a -> b`` of a proper crossing with ``c -> d``."""
    r = b - a
    s = d - c
    den = r[0] * s[1] - r[1] * s[0]
    if abs(den) < 1e-300:
        return None
    q = c - a
    t = (q[0] * s[1] - q[1] * s[0]) / den
    u = (q[0] * r[1] - q[1] * r[0]) / den
    if 0.0 < t < 1.0 and 0.0 <= u <= 1.0:
        return t
    return None


def _interface_density(ML, r, trace):
    """Solve the trace mass system; fall back to the lumped one when the traces
    of the basis on L are linearly dependent (L cutting through cells)."""
    if len(r) == 0:
        return np.zeros(0), "consistent"
    try:
        q = splu(ML.tocsc()).solve(r)
        if np.all(np.isfinite(q)) and np.linalg.norm(ML @ q - r) <= 1e-8 * max(np.linalg.norm(r), 1e-300):
            return q, "consistent"
    except RuntimeError:
        pass
    return r / trace, "lumped"


def _triangle_rule(tri):
    """Edge-midpoint rule, exact for quadratics: points and weights."""
    a, b, c = tri
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    pts = np.array([0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)])
    return pts, np.full(3, area / 3.0)


# ------------------------------------------------------------------- solution
@dataclass
class InterfaceFlux:
    name: str
    side: int
    total: float
    dofs: np.ndarray  # J_L
    residual: np.ndarray  # r^a on J_L
    density: np.ndarray  # nodal flux density on J_L
    off_interface: float  # sum of |r^a| outside J_L
    residual_all: np.ndarray = field(repr=False, default=None)
    density_kind: str = "consistent"


@dataclass
class FlowSolution:
    space: FESpace
    quad: ElementQuadrature
    material: object
    boundary: list
    p: np.ndarray  # extended precision; use ``pressure`` for plain floats
    A: sp.csr_matrix
    f: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    stabilized: np.ndarray  # per-element flags
    element_matrices: np.ndarray = field(repr=False)
    stab_blocks: np.ndarray = field(repr=False)
    info: dict = field(default_factory=dict)

    @property
    def pressure(self):
        return np.asarray(self.p, dtype=float)

    # -- residuals and boundary fluxes
    def residual(self):
        return ZeroSumOperator(self.A) @ self.p - self.f

    def dirichlet_segments(self):
        return [s for s in self.boundary if s.kind == "dirichlet"]

    def neumann_segments(self):
        return [s for s in self.boundary if s.kind == "neumann"]

    def neumann_total(self):
        return float(sum(s.value * (s.end - s.start) for s in self.neumann_segments()))

    def dirichlet_flux(self):
        """Darcy flux ``u . n`` on Dirichlet dofs: nodal values and density.

        The nodal flux is minus the residual; the density solves the boundary
        mass system ``B_DD q = -r_D``.
        """
        n = self.space.n_dofs
        dom = self.space.mesh.domain
        segs = [s.endpoints(dom) for s in self.dirichlet_segments()]
        dofs, vals, w, _, _ = trace_points(self.space, segs)
        B = _trace_mass(n, dofs, vals, w)
        D = self.dirichlet_dofs
        r = -self.residual()
        density = spsolve(B[D][:, D].tocsc(), r[D]) if len(D) else np.zeros(0)
        return {"dofs": D, "density": np.atleast_1d(density), "residual": r[D],
                "total": float(r[D].sum())}

    def balance(self):
        """``int_D q + int_N h`` and the tolerance it is held to."""
        q = self.dirichlet_flux()["total"]
        h = self.neumann_total()
        return {"dirichlet": q, "neumann": h, "imbalance": q + h,
                "tolerance": 1e-10 * (1.0 + abs(h))}

    # -- velocity
    def group_velocity(self, g):
        """Darcy velocity ``-k grad p`` at the quadrature points of one group."""
        mesh = self.space.mesh
        idx, rule = g["idx"], g["rule"]
        un = self.space.to_nodes(self.pressure)[mesh.cells[idx]]
        _, dxi, deta = rule.tables()
        gx = un @ dxi.T / self.quad.hx[idx, None]
        gy = un @ deta.T / self.quad.hy[idx, None]
        return np.stack([-g["k"] * gx, -g["k"] * gy], axis=-1)

    def velocity_at(self, points, leaf=None):
        pts = np.atleast_2d(points)
        mesh = self.space.mesh
        if leaf is None:
            leaf = mesh.locate(pts)
        xi, eta = self.space.local_coords(leaf, pts)
        dxi, deta = shape_gradients(xi, eta)
        un = self.space.to_nodes(self.pressure)[mesh.cells[leaf]]
        hx, hy = mesh.leaf_sizes()
        k, _ = self.material.evaluate(pts)
        return np.column_stack([-k * (un * dxi).sum(1) / hx[leaf],
                                -k * (un * deta).sum(1) / hy[leaf]])

    # -- interface fluxes
    def side_operator(self, interface, side):
        """Diffusion operator restricted to one side of an interface."""
        quad, space = self.quad, self.space
        mesh = space.mesh
        theta = np.zeros(mesh.n_leaves)

        def weight(g):
            pts = np.column_stack([g["x"].ravel(), g["y"].ravel()])
            chi = (interface.side(pts) == side).reshape(g["x"].shape).astype(float)
            theta[g["idx"]] = (chi * g["rule"].w).sum(axis=1)
            return chi

        AH = quad.element_matrices("diffusion", weight=weight)
        if isinstance(interface, LineInterface):
            self._clip_line_cells(interface, side, AH, theta)
        Ar, _ = restrict_elements(space.elem_R, AH, False)
        Ar += theta[:, None, None] * self.stab_blocks
        return symmetrize(scatter(space, Ar))

    def _clip_line_cells(self, iface, side, AH, theta):
        """Exact side integrals on cells cut by a line with uniform material."""
        quad = self.quad
        boxes = quad.boxes
        corners = np.stack([boxes[:, [0, 1]], boxes[:, [2, 1]],
                            boxes[:, [0, 3]], boxes[:, [2, 3]]], axis=1)
        s = (corners - iface.point) @ iface.normal
        cut = np.flatnonzero((s.min(axis=1) < 0) & (s.max(axis=1) > 0))
        kmin = np.zeros(len(boxes))
        kmax = np.zeros(len(boxes))
        for g in quad.groups:
            kmin[g["idx"]] = g["k"].min(axis=1)
            kmax[g["idx"]] = g["k"].max(axis=1)
        for e in cut:
            if kmin[e] != kmax[e]:
                continue
            poly = iface.clip(boxes[e], side)
            hx, hy = quad.hx[e], quad.hy[e]
            mat = np.zeros((4, 4))
            area = 0.0
            for i in range(1, len(poly) - 1):
                pts, w = _triangle_rule((poly[0], poly[i], poly[i + 1]))
                xi = (pts[:, 0] - boxes[e, 0]) / hx
                eta = (pts[:, 1] - boxes[e, 1]) / hy
                dxi, deta = shape_gradients(xi, eta)
                gx, gy = dxi / hx, deta / hy
                mat += np.einsum("q,qi,qj->ij", w, gx, gx) + np.einsum("q,qi,qj->ij", w, gy, gy)
                area += w.sum()
            AH[e] = kmin[e] * mat
            theta[e] = area / (hx * hy)

    def interface_flux(self, interface, side=1):
        """Conservative Darcy flux ``int_L u . n_a`` out of side ``side``."""
        if isinstance(interface, FractureInterface):
            interface.bind(self.material)
        space = self.space
        n = space.n_dofs
        dom = space.mesh.domain
        D = self.side_operator(interface, side)
        r = ZeroSumOperator(D) @ self.p

        def on_side(pts):
            return (interface.side(pts) == side).astype(float)

        # Neumann load on this side
        nseg = self.neumann_segments()
        if nseg:
            dofs, vals, w, pts, sid = trace_points(
                space, [s.endpoints(dom) for s in nseg], breaks=interface.crossings)
            h = np.array([s.value for s in nseg])[sid]
            r += _load(n, dofs, vals, h * w * on_side(pts))
        # each side's Dirichlet flux is its own variational residual, so the
        # side residual vanishes on Dirichlet dofs
        r[self.dirichlet_dofs] = 0.0
        r = -r  # Darcy flux u.n_a rather than k grad p . n_a
        # interface dofs from the trace of the basis on L
        segs = interface.trace_segments(self.material)
        dofs, vals, w, _, _ = trace_points(space, segs, n=3)
        trace = _load(n, dofs, vals, w)
        length = float(w.sum())
        JL = np.flatnonzero(trace > 1e-12 * max(length, 1e-300))
        ML = _trace_mass(n, dofs, vals, w)[JL][:, JL]
        density, kind = _interface_density(ML, r[JL], trace[JL])
        outside = np.ones(n, dtype=bool)
        outside[JL] = False
        return InterfaceFlux(interface.name, side, float(r[JL].sum()), JL, r[JL],
                             density, float(np.abs(r[outside]).sum()), r, kind)


def compute_velocity(sol):
    """Darcy velocity at every quadrature point, as ``(leaf ids, points, u)`` per group."""
    out = []
    for g in sol.quad.groups:
        pts = np.stack([g["x"], g["y"]], axis=-1)
        out.append((g["idx"], pts, sol.group_velocity(g)))
    return out


def density_function(space, flux):
    """Trace function ``x -> sum_i q_i N_i(x)`` of a nodal interface density."""
    q = np.zeros(space.n_dofs)
    q[flux.dofs] = flux.density

    def fn(points):
        return space.evaluate(q, points)

    return fn


def flux_error(q, q_ref, segments, n=1001):
    """Relative L2 distance of two densities along ``segments``.

    ``q`` and ``q_ref`` map points ``(m, 2)`` to values; each segment ``(a, b)``
    is sampled at ``n`` points and integrated with the trapezoid rule.
    """
    num = den = 0.0
    for a, b in segments:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = np.linspace(0.0, 1.0, n)
        pts = a + np.outer(t, b - a)
        s = t * float(np.hypot(*(b - a)))
        d = np.asarray(q(pts)) - np.asarray(q_ref(pts))
        num += np.trapezoid(d * d, s)
        den += np.trapezoid(np.asarray(q_ref(pts)) ** 2, s)
    if den == 0:
        raise ValueError("reference density vanishes on the interface")
    return float(np.sqrt(num / den))


def assemble_flow(space, quad, stabilize=True, backend=None):
    AH = quad.element_matrices("diffusion")
    plain, flags = restrict_elements(space.elem_R, AH, False, backend)
    if stabilize:
        stab, _ = restrict_elements(space.elem_R, AH, True, backend)
        blocks = stab - plain
    else:
        stab = plain
        blocks = np.zeros_like(plain)
    return symmetrize(scatter(space, stab)), AH, blocks, flags


def neumann_load(space, segments):
    n = space.n_dofs
    segs = [s for s in segments if s.kind == "neumann" and s.value != 0.0]
    if not segs:
        return np.zeros(n)
    dom = space.mesh.domain
    dofs, vals, w, _, sid = trace_points(space, [s.endpoints(dom) for s in segs])
    h = np.array([s.value for s in segs])[sid]
    # h is the Darcy normal flux u.n, so k grad p . n = -h
    return _load(n, dofs, vals, -h * w)


def solve_flow(space, material, boundary, stabilize=True, quad=None, method="auto",
               rtol=1e-10, direct_max=None, refine=2, backend=None):
    """Assemble and solve the pressure problem. Returns a ``FlowSolution``."""
    if quad is None:
        quad = ElementQuadrature(space.mesh, material)
    A, AH, blocks, flags = assemble_flow(space, quad, stabilize, backend)
    f = neumann_load(space, boundary)
    D, g = nodes_on_segments(space, [s for s in boundary if s.kind == "dirichlet"])
    if len(D) == 0:
        raise ConfigError("flow problem needs at least one Dirichlet segment")
    A_mod, rhs = apply_dirichlet(A, f, D, g)
    Z = ZeroSumOperator(A)
    interior = np.ones(space.n_dofs, dtype=bool)
    interior[D] = False

    def residual(x):
        return np.where(interior, Z @ x - f, 0.0)

    kw = {} if direct_max is None else {"direct_max": direct_max}
    p, info = solve(A_mod, rhs, method=method, rtol=rtol, symmetric=True,
                    refine=refine, residual=residual, extended=True, **kw)
    p[D] = g
    info["stabilized_elements"] = int(flags.sum()) if stabilize else 0
    info["flagged_elements"] = int(flags.sum())
    return FlowSolution(space, quad, material, list(boundary), p, A, f, D, g,
                        flags if stabilize else np.zeros_like(flags), AH, blocks, info)


def flow_mmatrix_report(sol):
    A_mod, _ = apply_dirichlet(sol.A, sol.f, sol.dirichlet_dofs, sol.dirichlet_values)
    return mmatrix_scans(A_mod)


__all__ = ["BoundarySegment", "ConfigError", "FlowSolution", "FractureInterface",
           "InterfaceFlux", "LineInterface", "SolverError", "assemble_flow", "compute_velocity",
           "density_function", "flux_error",
           "full_sides", "neumann_load", "nodes_on_segments", "solve_flow",
           "flow_mmatrix_report", "shape_values"]
