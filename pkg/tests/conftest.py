import numpy as np
import pytest

from fracfem.fespace import FESpace
from fracfem.flow import BoundarySegment, solve_flow
from fracfem.geometry import BoxDomain, Fracture, MaterialField, MatrixRegion
from fracfem.mesh import QuadMesh, build_mesh

REGULAR_SEGMENTS = [((0, .5), (1, .5)), ((.5, .75), (1, .75)), ((.5, .625), (.75, .625)),
                    ((.5, 0), (.5, 1)), ((.75, .5), (.75, 1)), ((.625, .5), (.625, .75))]


def regular_setup():
    d = BoxDomain(0.0, 0.0, 1.0, 1.0)
    fr = [Fracture.from_segment(a, b, 1e-4, 1e4, 1.0) for a, b in REGULAR_SEGMENTS]
    mat = MaterialField(d, [MatrixRegion((0, 0, 1, 1), 1.0, 1.0)], fr)
    bnd = [BoundarySegment("left", 0, 1, "neumann", -1.0),
           BoundarySegment("right", 0, 1, "dirichlet", 1.0)]
    return d, fr, mat, bnd


def single_setup():
    d = BoxDomain(-50.0, -50.0, 50.0, 50.0)
    fr = [Fracture.from_segment((-50, 30), (50, -30), 0.01, 0.1, 0.4)]
    mat = MaterialField(d, [MatrixRegion((-50, -40, 50, 50), 1e-6, 0.25),
                            MatrixRegion((-50, -50, 50, -40), 1e-5, 0.2)], fr)
    bnd = [BoundarySegment("left", 40, 50, "dirichlet", 4.0),
           BoundarySegment("right", -50, -40, "dirichlet", 1.0)]
    return d, fr, mat, bnd


def solve_case(setup, be, amr, stabilize=True):
    d, fr, mat, bnd = setup()
    mesh = build_mesh(d, be, be, fr, amr)
    space = FESpace(mesh)
    return solve_flow(space, mat, bnd, stabilize=stabilize)


def hanging_corner_mesh():
    """Two coarse cells side by side, the right one split once.

    The lower-left child of the split cell, spanning (0,0)-(1,1), has its
    lower-left corner hanging between (-1,0) and (1,0).
    """
    d = BoxDomain(-1.0, -2.0, 1.0, 2.0)
    mesh = QuadMesh.uniform(d, 1, 2)
    return mesh.refine(np.array([mesh.locate(np.array([[0.5, 0.5]]))[0]]))


@pytest.fixture(scope="session")
def regular_coarse():
    return solve_case(regular_setup, 20, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


class Criterion:
    """Collects named checks for one acceptance criterion and fails on any miss."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []
        self.notes = []

    def note(self, text):
        self.notes.append(text)

    def check(self, name, ok, value=""):
        self.checks.append((name, bool(ok), value))
        return ok

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        failed = [f"{n} ({v})" if v != "" else n for n, ok, v in self.checks if not ok]
        if exc is not None:
            failed.append(f"{kind.__name__}: {exc}")
        _CRITERIA[self.number] = (self.title, not failed, len(self.checks), failed, self.notes)
        print(_line(self.number))
        if exc is None and failed:
            raise AssertionError("failed checks: " + "; ".join(failed))
        return False


def _line(number):
    title, ok, count, failed, notes = _CRITERIA[number]
    tail = "; ".join([f"{count} checks" if ok else "failed: " + "; ".join(failed)] + notes)
    return f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} [{tail}]"


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_line(n))
