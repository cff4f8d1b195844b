import numpy as np
import pytest
from numpy.polynomial import legendre as npleg

from conftest import pipeline
from oracles import dedup_node_count
from quadcoarse.errors import DegenerateEdge, IoError, ParseError
from quadcoarse.extraction import build_layout, place, subdivide
from quadcoarse.generators import generate_test_mesh
from quadcoarse.highorder import (
    HighOrderMesh,
    build_high_order,
    export_high_order,
    gauss_lobatto,
    import_high_order,
    parse_high_order,
    sample_polyline,
    spacing_parameters,
)
from quadcoarse.proxy import GeometryProxy
from quadcoarse.tmesh import build_tmesh, propagate_traces


def grid_bsm(across, along, scale=1.0):
    mesh = generate_test_mesh("grid(4,4)")
    tm = build_tmesh(mesh, propagate_traces(mesh))
    sides = tm.patches[0].sides
    q = [0] * len(tm.arcs)
    for s, val in ((0, across), (2, across), (1, along), (3, along)):
        q[sides[s][0][0]] = val
    layout = place(build_layout(tm, q), tm, q)
    return subdivide(layout, mesh, scale), GeometryProxy(mesh)


@pytest.mark.parametrize("n", range(1, 13))
def test_gauss_lobatto_against_legendre_roots(n):
    inner = np.sort(npleg.legroots(npleg.legder([0] * n + [1]))) if n > 1 else np.array([])
    expected = np.concatenate([[-1.0], inner, [1.0]])
    x = gauss_lobatto(n)
    assert np.max(np.abs(x - expected)) < 1e-12
    assert np.all(np.diff(x) > 0)
    assert np.allclose(x, -x[::-1], atol=0)


def test_spacing_parameters():
    assert np.allclose(spacing_parameters(5, "eq"), [0, 0.2, 0.4, 0.6, 0.8, 1])
    gl = spacing_parameters(4, "gl")
    assert gl[0] == 0 and gl[-1] == 1 and gl[2] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        spacing_parameters(3, "cheb")


def test_sample_polyline_uses_arc_length():
    pts = np.array([[0, 0, 0], [1, 0, 0], [1, 3, 0]], float)
    got = sample_polyline(pts, np.array([0, 0.25, 0.5, 1.0]))
    assert np.allclose(got, [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 3, 0]])
    with pytest.raises(DegenerateEdge):
        sample_polyline(np.zeros((3, 3)), np.array([0.5]))


def test_straight_edge_order5():
    bsm, proxy = grid_bsm(1, 1)
    ho = build_high_order(bsm, 5, "eq", proxy)
    lat = ho.lattice(0)
    P = ho.nodes[lat[:, 0]]
    d = np.linalg.norm(P - P[0], axis=1) / np.linalg.norm(P[-1] - P[0])
    assert np.allclose(d, [0, 0.2, 0.4, 0.6, 0.8, 1.0], atol=1e-12)
    assert np.allclose(np.cross(P[1:] - P[0], P[-1] - P[0]), 0, atol=1e-12)


def test_unit_square_order2_centre():
    bsm, proxy = grid_bsm(1, 1)
    ho = build_high_order(bsm, 2, "eq", proxy)
    assert ho.n_nodes == 9
    assert np.allclose(ho.nodes[ho.lattice(0)[1, 1]], [2.0, 2.0, 0.0])


def test_order5_counts_one_element():
    bsm, proxy = grid_bsm(1, 1)
    ho = build_high_order(bsm, 5, "eq", proxy)
    lat = ho.lattice(0)
    assert lat[1:-1, 1:-1].size == 16
    assert ho.n_nodes == 36 == dedup_node_count(ho.nodes)


def test_two_patches_share_an_edge():
    bsm, proxy = grid_bsm(2, 1)
    assert bsm.layout.n_quads == 2
    ho = build_high_order(bsm, 2, "eq", proxy)
    # V + E (N-1) + F (N-1)^2 = 6 + 7 + 2
    assert ho.n_nodes == 15 == dedup_node_count(ho.nodes)
    shared = set(ho.elements[0].tolist()) & set(ho.elements[1].tolist())
    assert len(shared) == 3


def test_orientation_matches_layout():
    res = pipeline("disk_with_pair")
    ho = res.high_order
    for k, quad in enumerate(res.layout.quads.tolist()):
        lat = ho.lattice(k)
        N = ho.order
        assert [lat[0, 0], lat[N, 0], lat[N, N], lat[0, N]] == quad


def test_element_orientation_consistent():
    res = pipeline("ellipse_fig2")
    ho = res.high_order
    N = ho.order
    normals = []
    for k in range(ho.n_elements):
        lat = ho.lattice(k)
        a, b, c = ho.nodes[lat[0, 0]], ho.nodes[lat[N, 0]], ho.nodes[lat[0, N]]
        normals.append(np.cross(b - a, c - a)[2])
    assert all(n > 0 for n in normals) or all(n < 0 for n in normals)


def test_node_formula_on_pipeline(any_result):
    ho = any_result.high_order
    lay = any_result.layout
    N = ho.order
    assert ho.n_nodes == lay.n_vertices + len(lay.edges) * (N - 1) + lay.n_quads * (N - 1) ** 2
    assert ho.n_elements == lay.n_quads
    if lay.n_quads <= 10:
        assert dedup_node_count(ho.nodes) == ho.n_nodes


def test_equidistant_gaps_straight():
    bsm, proxy = grid_bsm(2, 2)
    ho = build_high_order(bsm, 4, "eq", proxy)
    for k in range(ho.n_elements):
        lat = ho.lattice(k)
        for row in (lat[:, 0], lat[:, -1], lat[0, :], lat[-1, :]):
            gaps = np.linalg.norm(np.diff(ho.nodes[row], axis=0), axis=1)
            assert np.ptp(gaps) < 1e-9


def test_gl_spacing_on_edges():
    bsm, proxy = grid_bsm(1, 1)
    ho = build_high_order(bsm, 4, "gl", proxy)
    P = ho.nodes[ho.lattice(0)[:, 0]]
    d = np.linalg.norm(P - P[0], axis=1) / np.linalg.norm(P[-1] - P[0])
    assert np.allclose(d, spacing_parameters(4, "gl"), atol=1e-12)


def test_round_trip_bit_exact(tmp_path):
    ho = pipeline("disk_with_pair").high_order
    path = tmp_path / "m.ho"
    export_high_order(ho, path)
    back = import_high_order(path)
    assert back.order == ho.order and back.spacing == ho.spacing
    assert np.array_equal(back.nodes, ho.nodes) and np.array_equal(back.elements, ho.elements)
    export_high_order(back, tmp_path / "again.ho")
    assert (tmp_path / "again.ho").read_bytes() == path.read_bytes()


def test_obj_only_for_linear(tmp_path):
    bsm, proxy = grid_bsm(2, 1)
    with pytest.raises(IoError):
        export_high_order(build_high_order(bsm, 2), tmp_path / "x.obj", format="obj")
    export_high_order(build_high_order(bsm, 1), tmp_path / "x.obj", format="obj")
    lines = (tmp_path / "x.obj").read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 6
    assert sum(ln.startswith("f ") for ln in lines) == 2


@pytest.mark.parametrize("text", [
    "",
    "quadcoarse-ho v1\norder 1\n",
    "quadcoarse-ho v1\norder 1\nspacing eq\nrepresentation lagrange\nnodes 1\n0 0 0 0\nelements 1\n0 0 0\n",
    "quadcoarse-ho v1\norder x\nspacing eq\nrepresentation lagrange\nnodes 0\nelements 0\n",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_high_order(text)


def test_order_must_be_positive():
    bsm, _ = grid_bsm(1, 1)
    with pytest.raises(ValueError):
        build_high_order(bsm, 0)
    assert isinstance(build_high_order(bsm, 1), HighOrderMesh)
