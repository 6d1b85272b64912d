import numpy as np
import pytest

from conftest import regular_setup
from fracfem.geometry import BoxDomain, Fracture
from fracfem.mesh import MeshError, QuadMesh, audit_mesh, build_mesh, uniform_mesh_for

UNIT = BoxDomain(0.0, 0.0, 1.0, 1.0)


def brute_force_audit(mesh):
    """Level jumps and edge-interior node counts by direct geometry, O(n^2)."""
    boxes = mesh.leaf_boxes()
    nodes = mesh.nodes
    worst_jump, worst_count = 0, 0
    for i, (x0, y0, x1, y1) in enumerate(boxes):
        for a, b in (((x0, y0), (x1, y0)), ((x0, y1), (x1, y1)), ((x0, y0), (x0, y1)), ((x1, y0), (x1, y1))):
            horiz = a[1] == b[1]
            if horiz:
                on = (nodes[:, 1] == a[1]) & (nodes[:, 0] > a[0]) & (nodes[:, 0] < b[0])
            else:
                on = (nodes[:, 0] == a[0]) & (nodes[:, 1] > a[1]) & (nodes[:, 1] < b[1])
            worst_count = max(worst_count, int(on.sum()))
        # neighbours share a boundary segment of positive length
        ox = np.minimum(boxes[:, 2], x1) - np.maximum(boxes[:, 0], x0)
        oy = np.minimum(boxes[:, 3], y1) - np.maximum(boxes[:, 1], y0)
        nb = ((ox == 0) & (oy > 0)) | ((oy == 0) & (ox > 0))
        if nb.any():
            worst_jump = max(worst_jump, int(np.abs(mesh.level[nb] - mesh.level[i]).max()))
    return worst_jump, worst_count


class TestUniform:
    def test_two_by_two(self):
        m = QuadMesh.uniform(UNIT, 2, 2)
        assert (m.n_leaves, m.n_nodes, len(m.hanging_nodes)) == (4, 9, 0)

    def test_eighty(self):
        m = QuadMesh.uniform(UNIT, 80, 80)
        assert (m.n_leaves, m.n_nodes) == (6400, 6561)

    def test_rectangular_grid_of_square_cells(self):
        m = uniform_mesh_for(BoxDomain(0, 0, 700, 600), 14)
        assert (m.be_x, m.be_y) == (14, 12)
        hx, hy = m.leaf_sizes()
        np.testing.assert_allclose(hx, hy)

    def test_zero_cells(self):
        with pytest.raises(MeshError):
            QuadMesh.uniform(UNIT, 0, 3)

    def test_cells_counterclockwise_after_permutation(self):
        m = QuadMesh.uniform(UNIT, 3, 2)
        p = m.nodes[m.cells[:, [0, 1, 3, 2]]]
        x, y = p[..., 0], p[..., 1]
        area = 0.5 * (x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1)
        assert np.all(area > 0)


class TestRefine:
    def test_corner_of_two_by_two(self):
        m = QuadMesh.uniform(UNIT, 2, 2)
        m.refine(m.locate(np.array([[0.1, 0.1]])))
        assert m.n_leaves == 7
        assert sorted(map(tuple, m.nodes[m.hanging_nodes])) == [(0.25, 0.5), (0.5, 0.25)]

    def test_refine_all_is_uniform(self):
        m = QuadMesh.uniform(UNIT, 3, 3)
        m.refine(np.ones(m.n_leaves, dtype=bool))
        assert m.n_leaves == 36 and len(m.hanging_nodes) == 0
        assert m.n_nodes == 49

    def test_repeated_refinement_keeps_balance(self):
        m = QuadMesh.uniform(UNIT, 4, 4)
        for _ in range(3):
            m.refine(m.locate(np.array([[0.3, 0.3]])))
        assert m.max_level == 3
        assert audit_mesh(m) == []
        jump, count = brute_force_audit(m)
        assert jump <= 1 and count <= 1

    def test_empty_mark_is_noop(self):
        m = QuadMesh.uniform(UNIT, 2, 2)
        m.refine([])
        assert m.n_leaves == 4

    def test_hanging_nodes_are_master_midpoints(self, rng):
        m = QuadMesh.uniform(UNIT, 5, 5)
        for _ in range(4):
            m.refine(rng.random(m.n_leaves) < 0.15)
        x = m.nodes
        assert len(m.hanging_nodes)
        mid = 0.5 * (x[m.hanging_masters[:, 0]] + x[m.hanging_masters[:, 1]])
        np.testing.assert_allclose(mid, x[m.hanging_nodes], rtol=0, atol=1e-15)

    def test_classification_partitions_nodes(self, rng):
        m = QuadMesh.uniform(UNIT, 4, 4)
        m.refine(rng.random(16) < 0.3)
        c = m.classify_nodes()
        assert len(c["regular"]) + len(c["hanging"]) == m.n_nodes
        assert not np.intersect1d(c["regular"], c["hanging"]).size
        assert not np.intersect1d(c["hanging"], c["boundary"]).size


class TestAMR:
    def test_zero_steps(self):
        f = Fracture.from_segment((0, 0.5), (1, 0.5), 0.01)
        m = build_mesh(UNIT, 4, 4, [f], 0)
        assert m.n_leaves == 16

    def test_horizontal_strip(self):
        f = Fracture.from_segment((0, 0.5), (1, 0.5), 0.01)
        m = build_mesh(UNIT, 4, 4, [f], 1)
        fine = m.leaf_boxes()[m.level == 1]
        assert m.n_leaves == 8 + 32
        assert fine[:, 1].min() == 0.25 and fine[:, 3].max() == 0.75

    def test_fracture_missing_every_cell(self):
        f = Fracture.from_segment((2, 2), (3, 2), 0.01)
        m = build_mesh(UNIT, 4, 4, [f], 3)
        assert m.n_leaves == 16

    def test_deterministic(self):
        _, fr, _, _ = regular_setup()
        a = build_mesh(UNIT, 10, 10, fr, 4)
        b = build_mesh(UNIT, 10, 10, fr, 4)
        np.testing.assert_array_equal(a.cells, b.cells)
        np.testing.assert_array_equal(a.nodes, b.nodes)

    def test_regular_network_counts_amr8(self):
        # frozen element and regular node counts of the U^80_8 mesh
        _, fr, _, _ = regular_setup()
        m = build_mesh(UNIT, 80, 80, fr, 8)
        assert m.n_leaves == 434_224
        assert m.n_nodes - len(m.hanging_nodes) == 363_225


class TestAudit:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_meshes(self, seed):
        rng = np.random.default_rng(seed)
        m = QuadMesh.uniform(BoxDomain(-1, 0, 2, 2), 3, 2)
        for _ in range(5):
            m.refine(rng.random(m.n_leaves) < 0.2)
        assert audit_mesh(m) == []
        jump, count = brute_force_audit(m)
        assert jump <= 1 and count <= 1
        assert abs(m.leaf_areas().sum() - 6.0) <= 1e-12 * 6.0

    def test_detects_unbalanced_mesh(self):
        m = QuadMesh.uniform(UNIT, 2, 2)
        m._split(m.locate(np.array([[0.1, 0.1]])))
        m._split(m.locate(np.array([[0.4, 0.4]])))
        # the new level-2 cells at x = 0.5 touch a level-0 neighbour
        assert any("level" in p for p in audit_mesh(m))
