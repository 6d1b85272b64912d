"""Domain, fracture and material description.

Fractures are rotated rectangles. Matrix regions are axis-aligned boxes with
"last listed wins" precedence, and any fracture overrides the matrix.
"""
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class BoxDomain:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError(f"degenerate domain box {self.bounds}")

    @property
    def bounds(self):
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def contains(self, points, tol=0.0):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return ((p[:, 0] >= self.x0 - tol) & (p[:, 0] <= self.x1 + tol)
                & (p[:, 1] >= self.y0 - tol) & (p[:, 1] <= self.y1 + tol))


@dataclass(frozen=True)
class Fracture:
    """Rectangle of length ``2*half_length`` and aperture ``2*half_aperture``.

    ``angle`` is the direction of the long axis, in radians.
    """

    center: tuple
    half_length: float
    half_aperture: float
    angle: float = 0.0
    k: float = 1.0
    phi: float = 1.0

    def __post_init__(self):
        if self.half_length <= 0 or self.half_aperture <= 0:
            raise GeometryError("fracture extents must be positive")
        if self.k <= 0 or not (0 < self.phi <= 1):
            raise GeometryError("fracture needs k > 0 and 0 < phi <= 1")

    @classmethod
    def from_segment(cls, start, end, aperture, k=1.0, phi=1.0):
        a = np.asarray(start, dtype=float)
        b = np.asarray(end, dtype=float)
        d = b - a
        length = float(np.hypot(*d))
        if length == 0:
            raise GeometryError("fracture segment has zero length")
        c = 0.5 * (a + b)
        return cls((float(c[0]), float(c[1])), 0.5 * length, 0.5 * aperture,
                   float(np.arctan2(d[1], d[0])), k, phi)

    @classmethod
    def from_corners(cls, corners, k=1.0, phi=1.0):
        """Build from four corners listed around the rectangle."""
        c = np.asarray(corners, dtype=float).reshape(4, 2)
        e0 = c[1] - c[0]
        e1 = c[2] - c[1]
        l0, l1 = np.hypot(*e0), np.hypot(*e1)
        if abs(np.dot(e0, e1)) > 1e-9 * l0 * l1 or not np.allclose(c[3] - c[2], -e0):
            raise GeometryError("corners do not form a rectangle")
        long_edge, short = (e0, l1) if l0 >= l1 else (e1, l0)
        center = c.mean(axis=0)
        return cls((float(center[0]), float(center[1])), 0.5 * max(l0, l1),
                   0.5 * short, float(np.arctan2(long_edge[1], long_edge[0])), k, phi)

    @property
    def tangent(self):
        return np.array([np.cos(self.angle), np.sin(self.angle)])

    @property
    def normal(self):
        return np.array([-np.sin(self.angle), np.cos(self.angle)])

    @property
    def aperture(self):
        return 2.0 * self.half_aperture

    def corners(self):
        """Corners in counterclockwise order."""
        c = np.asarray(self.center, dtype=float)
        t = self.half_length * self.tangent
        n = self.half_aperture * self.normal
        return np.array([c - t - n, c + t - n, c + t + n, c - t + n])

    def local_coords(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.center)
        return p @ self.tangent, p @ self.normal

    def contains(self, points):
        s, t = self.local_coords(points)
        return (np.abs(s) <= self.half_length) & (np.abs(t) <= self.half_aperture)

    def bbox(self):
        c = self.corners()
        return (*c.min(axis=0), *c.max(axis=0))


@dataclass(frozen=True)
class MatrixRegion:
    box: tuple  # (x0, y0, x1, y1)
    k: float
    phi: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise GeometryError(f"degenerate matrix region {self.box}")
        if self.k <= 0 or not (0 < self.phi <= 1):
            raise GeometryError("matrix region needs k > 0 and 0 < phi <= 1")

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x0, y0, x1, y1 = self.box
        return (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)


FRACTURE = 1
MATRIX = 0


@dataclass
class MaterialField:
    domain: BoxDomain
    matrix_regions: list
    fractures: list = field(default_factory=list)

    def __post_init__(self):
        if not self.matrix_regions:
            raise GeometryError("at least one matrix region is required")
        d = self.domain
        for i, f in enumerate(self.fractures):
            # the long ends may poke out by at most the aperture (oblique cuts)
            x0, y0, x1, y1 = f.bbox()
            tol = 2.0 * f.half_aperture + 1e-12 * max(d.width, d.height)
            if x0 < d.x0 - tol or y0 < d.y0 - tol or x1 > d.x1 + tol or y1 > d.y1 + tol:
                raise GeometryError(f"fracture {i} leaves the domain")
        corners = np.array([[d.x0, d.y0], [d.x1, d.y0], [d.x0, d.y1], [d.x1, d.y1],
                            [0.5 * (d.x0 + d.x1), 0.5 * (d.y0 + d.y1)]])
        kind, _ = self.classify(corners)
        if np.any(kind < 0):
            raise GeometryError("matrix regions do not cover the domain")

    def classify(self, points):
        """Return ``(kind, index)`` per point.

        ``kind`` is FRACTURE, MATRIX, or -1 when no region covers the point.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        kind = np.full(len(p), -1, dtype=np.int8)
        index = np.full(len(p), -1, dtype=np.int64)
        for j, reg in enumerate(self.matrix_regions):
            m = reg.contains(p)
            kind[m] = MATRIX
            index[m] = j
        # first listed fracture wins
        for j in range(len(self.fractures) - 1, -1, -1):
            m = self.fractures[j].contains(p)
            kind[m] = FRACTURE
            index[m] = j
        return kind, index

    def in_fracture(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(p), dtype=bool)
        for f in self.fractures:
            out |= f.contains(p)
        return out

    def evaluate(self, points):
        """Permeability and porosity at ``points``."""
        kind, index = self.classify(points)
        if np.any(kind < 0):
            raise GeometryError("point outside every material region")
        k = np.empty(len(kind))
        phi = np.empty(len(kind))
        for j, reg in enumerate(self.matrix_regions):
            m = (kind == MATRIX) & (index == j)
            k[m], phi[m] = reg.k, reg.phi
        for j, f in enumerate(self.fractures):
            m = (kind == FRACTURE) & (index == j)
            k[m], phi[m] = f.k, f.phi
        return k, phi


def box_intersects_fracture(boxes, fracture):
    """Separating-axis test between axis-aligned boxes and one fracture.

    ``boxes`` has rows ``(x0, y0, x1, y1)``. True means the open interiors
    overlap, so touching along an edge or a corner does not count.
    """
    b = np.atleast_2d(np.asarray(boxes, dtype=float))
    corners = fracture.corners()
    # axes of the box
    fx0, fy0 = corners.min(axis=0)
    fx1, fy1 = corners.max(axis=0)
    hit = (b[:, 0] < fx1) & (fx0 < b[:, 2]) & (b[:, 1] < fy1) & (fy0 < b[:, 3])
    # axes of the fracture
    c = np.asarray(fracture.center)
    cx = 0.5 * (b[:, 0] + b[:, 2]) - c[0]
    cy = 0.5 * (b[:, 1] + b[:, 3]) - c[1]
    hx = 0.5 * (b[:, 2] - b[:, 0])
    hy = 0.5 * (b[:, 3] - b[:, 1])
    for axis, half in ((fracture.tangent, fracture.half_length),
                       (fracture.normal, fracture.half_aperture)):
        centre = cx * axis[0] + cy * axis[1]
        radius = hx * abs(axis[0]) + hy * abs(axis[1])
        hit &= np.abs(centre) < radius + half
    return hit


def boxes_intersect_any(boxes, fractures):
    b = np.atleast_2d(np.asarray(boxes, dtype=float))
    out = np.zeros(len(b), dtype=bool)
    for f in fractures:
        out |= box_intersects_fracture(b, f)
    return out


def random_network(rng, n_fractures, aperture, k_range=(1e4, 1e6), phi=1.0,
                   domain=None, length_range=(0.2, 0.6), margin=0.05):
    """Random straight fractures inside ``domain`` (unit square by default).

    Permeabilities are log-uniform in ``k_range``. Endpoints keep ``margin``
    (relative) away from the boundary so every fracture validates.
    """
    domain = domain or BoxDomain(0.0, 0.0, 1.0, 1.0)
    size = min(domain.width, domain.height)
    lo = np.array([domain.x0, domain.y0]) + margin * size
    hi = np.array([domain.x1, domain.y1]) - margin * size
    out = []
    while len(out) < n_fractures:
        c = rng.uniform(lo, hi)
        half = 0.5 * size * rng.uniform(*length_range)
        ang = rng.uniform(0.0, np.pi)
        t = np.array([np.cos(ang), np.sin(ang)])
        a, b = c - half * t, c + half * t
        if np.any(np.minimum(a, b) < lo) or np.any(np.maximum(a, b) > hi):
            continue
        k = float(np.exp(rng.uniform(*np.log(k_range))))
        out.append(Fracture.from_segment(a, b, aperture, k, phi))
    return out
