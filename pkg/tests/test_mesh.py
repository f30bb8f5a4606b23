import json

import numpy as np
import pytest

from padfeec.errors import InvalidParameter, MeshError, Unsupported
from padfeec.mesh import (
    Mesh,
    canonically_equal,
    generate_structured,
    refine_uniform,
    shape_report,
)


class TestGeneration:
    def test_counts_n2(self):
        m = generate_structured(2, 2)
        assert m.num_vertices == 9
        assert m.num_cells == 8
        assert m.subsimplices(1).count == 16
        verts = m.subsimplices(0)
        assert sum(not b for b in verts.boundary) == 1

    def test_counts_n1(self):
        m = generate_structured(2, 1)
        assert m.num_vertices == 4
        assert m.num_cells == 2
        assert m.subsimplices(1).count == 5

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_count_formulas(self, n):
        m = generate_structured(2, n)
        assert m.num_vertices == (n + 1) ** 2
        assert m.num_cells == 2 * n * n
        assert m.subsimplices(1).count == 3 * n * n + 2 * n

    def test_hole_euler_characteristic(self):
        m = generate_structured(2, 4, domain="hole")
        V = m.subsimplices(0).count
        E = m.subsimplices(1).count
        F = m.num_cells
        assert V - E + F == 0  # annulus

    def test_box_euler_characteristic(self):
        m = generate_structured(2, 3)
        assert m.subsimplices(0).count - m.subsimplices(1).count + m.num_cells == 1

    def test_hole_needs_divisible_by_four(self):
        with pytest.raises(InvalidParameter):
            generate_structured(2, 6, domain="hole")

    def test_volumes(self):
        assert generate_structured(2, 3).total_volume() == pytest.approx(1.0, abs=1e-12)
        assert generate_structured(2, 4, "hole").total_volume() == pytest.approx(
            0.75, abs=1e-12
        )
        assert generate_structured(3, 2).total_volume() == pytest.approx(1.0, abs=1e-12)

    def test_3d_counts(self):
        m = generate_structured(3, 2)
        assert m.num_vertices == 27
        assert m.num_cells == 48


class TestSubsimplices:
    def test_edge_boundary_split_n1(self):
        m = generate_structured(2, 1)
        edges = m.subsimplices(1)
        assert edges.count == 5
        assert sum(edges.boundary) == 4
        assert sum(~edges.boundary) == 1

    def test_vertex_boundary_split_n2(self):
        m = generate_structured(2, 2)
        verts = m.subsimplices(0)
        assert verts.count == 9
        assert sum(verts.boundary) == 8

    def test_top_level_is_cells(self):
        m = generate_structured(2, 2)
        table = m.subsimplices(2)
        assert table.count == m.num_cells
        assert not table.boundary.any()

    @pytest.mark.parametrize("dim,n", [(2, 3), (3, 2)])
    def test_facets_shared_by_at_most_two(self, dim, n):
        m = generate_structured(dim, n)
        facets = m.subsimplices(dim - 1)
        owners = np.zeros(facets.count, dtype=int)
        for row in facets.cell_incidence:
            for gid in row:
                owners[gid] += 1
        assert set(owners) <= {1, 2}
        assert all((owners[i] == 1) == facets.boundary[i] for i in range(facets.count))

    @pytest.mark.parametrize("dim,n", [(2, 2), (2, 4), (3, 2)])
    def test_chain_complex(self, dim, n):
        m = generate_structured(dim, n)
        for k in range(2, dim + 1):
            prod = m.boundary_matrix(k - 1) @ m.boundary_matrix(k)
            assert prod.dtype.kind == "i"
            assert not prod.any()


class TestVertexPatch:
    def test_center_vertex_six_cells(self):
        m = generate_structured(2, 2)
        center = None
        for i, v in enumerate(m.vertices):
            if np.allclose(v, [0.5, 0.5]):
                center = i
        patch = m.vertex_patch(center)
        assert len(patch.cells) == 6
        # adjacency ordering: consecutive cells share an edge through the center
        for a, b in zip(patch.cells, patch.cells[1:]):
            shared = set(m.cells[a]) & set(m.cells[b])
            assert center in shared and len(shared) == 2

    def test_diagonal_corner_two_cells(self):
        m = generate_structured(2, 2)
        corner = int(np.argmin(np.linalg.norm(m.vertices, axis=1)))  # (0,0)
        assert len(m.vertex_patch(corner).cells) == 2

    def test_n1_diagonal_vertices(self):
        m = generate_structured(2, 1)
        diag = [i for i, v in enumerate(m.vertices) if np.isclose(v[0], v[1])]
        for v in diag:
            assert len(m.vertex_patch(v).cells) == 2


class TestRefinement:
    def test_cell_count_quadruples(self):
        m = generate_structured(2, 1)
        assert refine_uniform(m).num_cells == 8

    def test_double_refine_is_16x(self):
        m = generate_structured(2, 1)
        assert refine_uniform(refine_uniform(m)).num_cells == 16 * m.num_cells

    def test_refined_equals_regenerated(self):
        fine = refine_uniform(generate_structured(2, 2))
        direct = generate_structured(2, 4)
        assert canonically_equal(fine, direct)

    def test_3d_unsupported(self):
        with pytest.raises(Unsupported):
            refine_uniform(generate_structured(3, 1))

    def test_shape_regularity_preserved(self):
        m = generate_structured(2, 2)
        before = shape_report(m)
        after = shape_report(refine_uniform(m))
        assert after["min_angle_deg"] == pytest.approx(before["min_angle_deg"], abs=1e-9)


class TestValidation:
    def test_nonconforming_rejected_with_named_facet(self):
        vertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -1.0]]
        cells = [(0, 1, 2), (1, 3, 2), (0, 1, 3), (0, 1, 4)]
        with pytest.raises(MeshError, match=r"\(0, 1\)"):
            Mesh(2, vertices, cells)

    def test_degenerate_cell_rejected(self):
        with pytest.raises(MeshError):
            Mesh(2, [[0, 0], [1, 0], [2, 0]], [(0, 1, 2)])

    def test_repeated_vertex_rejected(self):
        with pytest.raises(MeshError):
            Mesh(2, [[0, 0], [1, 0], [0, 1]], [(0, 1, 1)])

    def test_roundtrip_json(self, tmp_path):
        m = generate_structured(2, 2)
        path = tmp_path / "mesh.json"
        m.save(path)
        loaded = Mesh.load(path)
        assert canonically_equal(m, loaded)
        data = json.loads(path.read_text())
        assert set(data) == {"dim", "vertices", "cells"}

    def test_vertex_hypothesis_flag_matches_oracle(self):
        # independent recomputation: a boundary vertex needs an interior neighbour
        for mesh in (generate_structured(2, 2), generate_structured(2, 4, "hole")):
            verts = mesh.subsimplices(0)
            interior = {
                v[0] for i, v in enumerate(verts.simplices) if not verts.boundary[i]
            }
            ok = True
            for i, v in enumerate(verts.simplices):
                if not verts.boundary[i]:
                    continue
                nbrs = set()
                for a, b in mesh.subsimplices(1).simplices:
                    if a == v[0]:
                        nbrs.add(b)
                    if b == v[0]:
                        nbrs.add(a)
                if not nbrs & interior:
                    ok = False
            assert mesh.satisfies_vertex_hypothesis == ok

    def test_signed_volume_positive_under_stored_orientation(self):
        for mesh in (generate_structured(2, 2), generate_structured(3, 1)):
            for i in range(mesh.num_cells):
                assert mesh.signed_volume(i) > 0
