"""Independent reference computations used to freeze expected values.

Nothing here calls the package's solver, tracer or layout code; inputs are
plain vertex arrays and quad lists.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from quadcoarse.generators import grid, rotate_edge
from quadcoarse.mesh import QuadMesh


def valence_counts(quads, n_vertices):
    val = np.zeros(n_vertices, dtype=int)
    for q in quads:
        for v in q:
            val[v] += 1
    return val


def edge_quad_map(quads):
    out = defaultdict(list)
    for k, q in enumerate(quads):
        for i in range(4):
            a, b = q[i], q[(i + 1) % 4]
            out[(min(a, b), max(a, b))].append(k)
    return out


def boundary_vertices(quads):
    out = set()
    for (a, b), qs in edge_quad_map(quads).items():
        if len(qs) == 1:
            out.update((a, b))
    return out


def straight_continuation(quads, prev, cur):
    """Vertex after ``prev -> cur`` through a valence-4 interior ``cur``."""
    fan = [q for q in quads if cur in q]
    if len(fan) != 4:
        return None
    nbrs = set()
    beside = set()
    for q in fan:
        i = q.index(cur)
        a, b = q[i - 1], q[(i + 1) % 4]
        nbrs.update((a, b))
        if prev in (a, b):
            beside.update((a, b))
    rest = nbrs - beside
    return rest.pop() if len(rest) == 1 else None


def separatrix_patch_count(quads, n_vertices, feature_pairs, origins, stops):
    """Quad-layout patch count: cut along features and along every
    separatrix walked straight from ``origins`` until a vertex in ``stops``.
    """
    quads = [list(q) for q in quads]
    eq = edge_quad_map(quads)
    bnd = boundary_vertices(quads)
    cut = {(min(a, b), max(a, b)) for a, b in feature_pairs}
    nbrs = defaultdict(set)
    for a, b in eq:
        nbrs[a].add(b)
        nbrs[b].add(a)
    for v in origins:
        for n in sorted(nbrs[v]):
            e = (min(v, n), max(v, n))
            if e in cut and len(eq[e]) == 1:
                continue
            prev, cur = v, n
            walked = set()
            while True:
                e = (min(prev, cur), max(prev, cur))
                if e in walked:
                    break
                walked.add(e)
                cut.add(e)
                if cur in stops or cur in bnd:
                    break
                nxt = straight_continuation(quads, prev, cur)
                if nxt is None:
                    break
                prev, cur = cur, nxt
    rows, cols = [], []
    for e, qs in eq.items():
        if len(qs) == 2 and e not in cut:
            rows.append(qs[0])
            cols.append(qs[1])
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(quads), len(quads)))
    return connected_components(g, directed=False)[0]


def dedup_node_count(points, decimals=9):
    return len(np.unique(np.round(np.asarray(points, dtype=float), decimals), axis=0))


def winslow_center(P):
    """One Winslow update of the center of a 3x3 point array ``P[i, j]``."""
    E, W, N, S = P[2, 1], P[0, 1], P[1, 2], P[1, 0]
    NE, NW, SW, SE = P[2, 2], P[0, 2], P[0, 0], P[2, 0]
    xxi = (E - W) / 2
    xeta = (N - S) / 2
    a = xeta @ xeta
    b = xxi @ xeta
    c = xxi @ xxi
    xm = (NE - NW - SE + SW) / 4
    return (a * (E + W) + c * (N + S) - 2 * b * xm) / (2 * (a + c))


def random_mesh(rng, sizes=(3, 8), max_rotations=3):
    """Grid with a few random edge rotations, keeping the grid's tags."""
    n, m = int(rng.integers(*sizes)), int(rng.integers(*sizes))
    g = grid(n, m)
    quads = g.quads.tolist()
    for _ in range(int(rng.integers(0, max_rotations))):
        cur = QuadMesh(g.vertices, quads)
        inner = [e for e, qs in enumerate(cur.edge_quads) if len(qs) == 2]
        a, b = cur.edge_quads[inner[int(rng.integers(len(inner)))]]
        rotate_edge(quads, a, b)
    tags = {tuple(int(x) for x in g.edges[e]): c for e, c in g.feature_edges.items()}
    return QuadMesh(g.vertices, quads, tags, dict(g.corners))


def tri_disk(k):
    """Triangle split into three k x k blocks around one valence-3 center."""
    T = np.array([[0.0, 1.0], [-np.sqrt(3) / 2, -0.5], [np.sqrt(3) / 2, -0.5]])
    C = T.mean(axis=0)
    index: dict[tuple, int] = {}
    verts: list = []

    def vid(p):
        key = tuple(np.round(p, 9))
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    quads = []
    for i in range(3):
        a = (T[i - 1] + T[i]) / 2
        b = (T[i] + T[(i + 1) % 3]) / 2
        corners = [C, b, T[i], a]
        ids = {}
        for s in range(k + 1):
            for t in range(k + 1):
                u, v = s / k, t / k
                p = (1 - u) * (1 - v) * corners[0] + u * (1 - v) * corners[1] + u * v * corners[2] + (1 - u) * v * corners[3]
                ids[s, t] = vid(p)
        for s in range(k):
            for t in range(k):
                quads.append([ids[s, t], ids[s + 1, t], ids[s + 1, t + 1], ids[s, t + 1]])
    return QuadMesh(np.array(verts), quads), vid(C)
