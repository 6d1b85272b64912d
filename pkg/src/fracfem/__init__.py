"""Flow and advective transport in fractured porous media on quadtree meshes.

Fractures are thin inclusions of the same dimension as the matrix. Meshes are
1-irregular quadtrees refined towards the fractures, and the conforming Q1
space is built on them through hanging-node constraints.
"""
from .fespace import FESpace
from .flow import (BoundarySegment, FractureInterface, LineInterface, solve_flow)
from .geometry import BoxDomain, Fracture, MaterialField, MatrixRegion
from .linalg import SolverError
from .mesh import QuadMesh, audit_mesh, build_mesh
from .transport import TransportConfig, build_transport_operators, run_transport

__version__ = "0.1.0"
