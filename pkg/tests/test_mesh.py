import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpplast.mesh import (
    QuadMesh,
    build_rectangle_mesh,
    p_refine,
    read_mesh_text,
    refine,
    uniform_overkill,
)


def edge_kinds(mesh):
    kinds = [e.kind for e in mesh.edges]
    return {k: kinds.count(k) for k in ("interior", "dirichlet", "neumann")}


def check_invariants(mesh):
    assert mesh.is_one_irregular()
    assert mesh.max_degree_gap() <= 1
    x0, x1, y0, y1 = mesh.domain
    assert math.fsum(mesh.areas) == pytest.approx((x1 - x0) * (y1 - y0), rel=1e-12)
    v = mesh.vertices[mesh.element_vertices]  # (ne, 4, 2)
    # counterclockwise: positive shoelace area
    x, y = v[..., 0], v[..., 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
    np.testing.assert_allclose(signed, mesh.areas, rtol=1e-12)


class TestBuild:
    def test_single_element(self):
        m = build_rectangle_mesh(nx=1, ny=1, p=1)
        assert m.n_elements == 1
        assert len(m.edges) == 4
        assert edge_kinds(m) == {"interior": 0, "dirichlet": 1, "neumann": 3}

    def test_two_by_two_interior_edges(self):
        m = build_rectangle_mesh(nx=2, ny=2)
        assert m.n_elements == 4
        assert edge_kinds(m)["interior"] == 4

    def test_h04_grid(self):
        m = build_rectangle_mesh(nx=5, ny=5, p=3)
        np.testing.assert_allclose(m.sizes, 0.4, rtol=1e-14)
        assert set(m.degree.tolist()) == {3}

    def test_dirichlet_on_bottom_only(self):
        m = build_rectangle_mesh(nx=3, ny=2)
        for e in m.edges:
            if e.kind == "dirichlet":
                ys = m.vertices[list(e.vertex_ids), 1]
                np.testing.assert_array_equal(ys, -1.0)

    @pytest.mark.parametrize("domain", [(0, 0, 0, 1), (1, 0, 0, 1)])
    def test_degenerate_domain(self, domain):
        with pytest.raises(ValueError):
            build_rectangle_mesh(domain, 1, 1)

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            build_rectangle_mesh(nx=0, ny=1)
        with pytest.raises(ValueError):
            build_rectangle_mesh(nx=1, ny=1, p=0)


class TestGeometry:
    def test_reference_square(self):
        m = build_rectangle_mesh((0, 2, 0, 2), 1, 1)
        assert m.h_T(0) == pytest.approx(2 * math.sqrt(2))
        _, det = m.jacobian(0, (0.3, -0.2))
        assert det == pytest.approx(1.0)

    def test_centroid(self):
        m = build_rectangle_mesh(nx=3, ny=2)
        for e in range(m.n_elements):
            np.testing.assert_allclose(m.map_F_T(e, (0.0, 0.0))[0], m.centers[e], atol=1e-15)

    def test_edge_length(self):
        m = refine(build_rectangle_mesh(nx=2, ny=2), range(4))
        assert {round(e.length, 15) for e in m.edges} == {0.5}

    def test_det_is_quarter_area(self):
        m = refine(build_rectangle_mesh(nx=2, ny=2), [0])
        np.testing.assert_allclose(m.jac_det, m.areas / 4.0, rtol=1e-15)

    def test_to_reference_roundtrip(self, rng):
        m = refine(build_rectangle_mesh(nx=2, ny=2), [1, 2])
        ref = rng.uniform(-1, 1, size=(m.n_elements, 2))
        phys = np.array([m.map_F_T(e, r)[0] for e, r in enumerate(ref)])
        np.testing.assert_allclose(m.to_reference(np.arange(m.n_elements), phys), ref, atol=1e-13)
        np.testing.assert_array_equal(m.locate(phys), np.arange(m.n_elements))

    def test_locate_outside(self):
        m = build_rectangle_mesh(nx=2, ny=2)
        with pytest.raises(ValueError):
            m.locate([[1.5, 0.0]])


class TestRefine:
    def test_refine_all_single(self):
        m = refine(build_rectangle_mesh(nx=1, ny=1), [0])
        assert m.n_elements == 4
        np.testing.assert_allclose(m.diameters, build_rectangle_mesh(nx=1, ny=1).diameters[0] / 2)

    def test_corner_of_two_by_two(self):
        m = refine(build_rectangle_mesh(nx=2, ny=2), [0])
        assert m.n_elements == 7
        check_invariants(m)
        # two coarse neighbours each see one hanging node
        assert sorted(m.hanging_counts().tolist()) == [1] * 5 + [2, 2]

    def test_twice_same_corner_forces_closure(self):
        m = refine(build_rectangle_mesh(nx=2, ny=2), [3])
        m = refine(m, [m.lookup[(1, 2, 2)]])
        check_invariants(m)
        # neighbours of the refined level-1 child were split too
        assert m.n_elements > 10
        assert m.max_level == 2

    def test_children_inherit_degree(self):
        m = build_rectangle_mesh(nx=2, ny=2).with_degrees([1, 2, 2, 2])
        r = refine(m, [0])
        assert set(r.degree[r.level == 1].tolist()) == {1}

    def test_deterministic(self):
        m = build_rectangle_mesh(nx=3, ny=3)
        a = refine(refine(m, [4, 0]), [2, 7])
        b = refine(refine(m, [0, 4]), [7, 2])
        assert a.keys == b.keys
        assert a.export_text() == b.export_text()

    def test_bad_marker(self):
        with pytest.raises(IndexError):
            refine(build_rectangle_mesh(nx=1, ny=1), [1])

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=4), min_size=1, max_size=4))
    def test_random_sequences_keep_invariants(self, rounds):
        m = build_rectangle_mesh(nx=2, ny=2, p=2)
        for marks in rounds:
            m = refine(m, [k % m.n_elements for k in marks])
            m = p_refine(m, [marks[0] % m.n_elements])
        check_invariants(m)


class TestPRefine:
    def test_single(self):
        m = p_refine(build_rectangle_mesh(nx=1, ny=1), [0])
        assert m.degree.tolist() == [2]

    def test_neighbours_untouched(self):
        m = p_refine(build_rectangle_mesh(nx=3, ny=3, p=2), [4])
        assert m.degree.tolist() == [2, 2, 2, 2, 3, 2, 2, 2, 2]

    def test_twice_raises_ring_once(self):
        m = build_rectangle_mesh(nx=3, ny=3, p=1)
        m = p_refine(p_refine(m, [4]), [4])
        assert m.degree.tolist() == [1, 2, 1, 2, 3, 2, 1, 2, 1]
        assert m.max_degree_gap() == 1

    def test_mesh_unchanged(self):
        m = build_rectangle_mesh(nx=2, ny=2)
        assert p_refine(m, [0, 3]).keys == m.keys


class TestExport:
    def test_roundtrip(self):
        m = p_refine(refine(build_rectangle_mesh(nx=2, ny=2), [0]), [1])
        text = m.export_text()
        head = text.splitlines()[0].split()
        verts, elems, degs = read_mesh_text(text)
        assert (int(head[0]), int(head[1])) == (len(verts), len(elems))
        np.testing.assert_array_equal(degs, m.degree)
        np.testing.assert_allclose(verts[elems], m.vertices[m.element_vertices])

    def test_overkill(self):
        m = refine(build_rectangle_mesh(nx=2, ny=2, p=2), [0])
        o = uniform_overkill(m)
        assert o.n_elements == 4 * m.n_elements
        np.testing.assert_array_equal(o.degree,
                                      m.degree[o.ancestor_in(m)] + 1)
