import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import valence_counts
from quadcoarse.errors import InvalidSpec, NonManifold, NonQuad, ParseError
from quadcoarse.generators import generate_test_mesh, grid
from quadcoarse.mesh import (
    QuadMesh,
    classify_vertices,
    detect_features,
    format_native,
    irregular_vertices,
    load_mesh,
    save_mesh,
    write_obj,
)

GRID_2X2 = """quadcoarse-mesh v1
# 2x2 grid
vertices
0 0 0 0
1 1 0 0
2 2 0 0
3 0 1 0
4 1 1 0
5 2 1 0
6 0 2 0
7 1 2 0
8 2 2 0
quads
0 1 4 3
1 2 5 4
3 4 7 6
4 5 8 7
"""


def test_load_native_grid(tmp_path):
    p = tmp_path / "g.qcm"
    p.write_text(GRID_2X2)
    m = load_mesh(p)
    assert m.n_vertices == 9 and m.n_quads == 4
    assert len(m.edges) == 12
    assert m.boundary_edge_count() == 8


def test_triangle_face_is_rejected(tmp_path):
    p = tmp_path / "t.qcm"
    p.write_text(GRID_2X2.replace("4 5 8 7", "4 5 8"))
    with pytest.raises(NonQuad):
        load_mesh(p)


def test_obj_triangle_is_rejected(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(NonQuad):
        load_mesh(p)


def test_three_quads_on_one_edge():
    verts = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [1, -1, 0], [0, -1, 0], [0.5, 0.5, 1], [0.5, -0.5, 1]]
    quads = [[0, 1, 2, 3], [1, 0, 5, 4], [0, 1, 7, 6]]
    with pytest.raises(NonManifold):
        QuadMesh(verts, quads)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.qcm"
    p.write_text("quadcoarse-mesh v1\nvertices\n0 a b c\n")
    with pytest.raises(ParseError):
        load_mesh(p)
    p.write_text("vertices\n0 0 0 0\n")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_native_round_trip(tmp_path):
    m = generate_test_mesh("ellipse_fig2")
    p = tmp_path / "e.qcm"
    save_mesh(m, p)
    m2 = load_mesh(p)
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.quads, m2.quads)
    assert m.feature_edges == m2.feature_edges
    assert m.corners == m2.corners
    assert format_native(m2) == p.read_text()


def test_obj_detects_boundary_and_corners(tmp_path):
    g = grid(3, 3)
    p = tmp_path / "g.obj"
    write_obj(p, g.vertices, g.quads)
    m = load_mesh(p)
    assert m.boundary_edge_count() == 12
    assert sorted(m.corners) == sorted(g.corners)
    assert all(k == 1 for k in m.corners.values())


def test_dihedral_feature_detection():
    # two unit squares folded at 90 degrees along x = 1
    verts = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [1, 0, 1], [1, 1, 1]]
    quads = [[0, 1, 2, 3], [1, 4, 5, 2]]
    tags, corners = detect_features(verts, quads)
    assert (1, 2) in tags
    m = QuadMesh(verts, quads, tags, corners)
    assert m.is_feature(1, 2)


def test_interior_valence_five_is_irregular():
    m = generate_test_mesh("disk_with_pair")
    cls = classify_vertices(m)
    five = [v for v, c in cls.items() if c.site == "interior" and c.valence == 5]
    assert len(five) == 1 and cls[five[0]].irregular


def test_grid_interior_regular():
    cls = classify_vertices(grid(4, 4))
    assert all(c.kind == "regular" for c in cls.values())


def test_disk_with_pair_inventory():
    m = generate_test_mesh("disk_with_pair")
    val = valence_counts(m.quads.tolist(), m.n_vertices)
    interior = [v for v in range(m.n_vertices) if not m.on_curve[v]]
    assert sorted(val[v] for v in interior if val[v] != 4) == [3, 5]
    cls = classify_vertices(m)
    inner_irr = [v for v in irregular_vertices(cls) if cls[v].site == "interior"]
    assert sorted(cls[v].valence for v in inner_irr) == [3, 5]


def test_ellipse_fig2_inventory():
    m = generate_test_mesh("ellipse_fig2")
    cls = classify_vertices(m)
    inner = sorted(cls[v].valence for v in irregular_vertices(cls) if cls[v].site == "interior")
    assert inner == [3, 5]
    assert len(m.corners) == 2 and all(k == 2 for k in m.corners.values())
    assert len(set(m.feature_edges.values())) == 1
    on_curve_irr = [v for v in irregular_vertices(cls) if cls[v].site == "on-curve"]
    assert on_curve_irr


def test_annulus_counts():
    m = generate_test_mesh("annulus(8,3)")
    assert m.n_vertices == 32 and m.n_quads == 24
    assert not irregular_vertices(classify_vertices(m))
    assert len(set(m.feature_edges.values())) == 2
    assert not m.corners


def test_grid_4x4_counts():
    m = generate_test_mesh("grid(4,4)")
    assert m.n_vertices == 25 and m.n_quads == 16
    assert not irregular_vertices(classify_vertices(m))


@pytest.mark.parametrize("spec", ["grid(1)", "nothing(2,2)", "grid(a,b)", "disk_with_pair(3,3)"])
def test_invalid_spec(spec):
    with pytest.raises(InvalidSpec):
        generate_test_mesh(spec)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9))
def test_grid_counts_property(n, m):
    g = grid(n, m)
    assert g.n_quads == n * m
    assert not irregular_vertices(classify_vertices(g))


@settings(max_examples=15, deadline=None)
@given(st.permutations(list(range(48))))
def test_classification_ignores_quad_order(order):
    m = generate_test_mesh("ellipse_fig2")
    assert classify_vertices(m.with_quads_permuted(order)) == classify_vertices(m)
