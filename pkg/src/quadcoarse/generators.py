"""Deterministic synthetic quad meshes with a known irregular-vertex inventory.

Supported specs (``generate_test_mesh`` accepts the string form):

``grid(n,m)``
    Structured ``n x m`` square grid, four corners of nominal valence 1.
``annulus(n,m)``
    ``n`` angular by ``m`` radial quads, two closed feature loops.
``disk_with_pair``
    Disk with one interior valence-3/valence-5 pair next to the boundary.
``ellipse_fig2``
    Small ellipse with two tagged corners at the tips of the major axis,
    one interior 3-5 pair and misaligned boundary irregular vertices.
``disk(n,k)``, ``annulus_pairs(n,m,k)``, ``ellipse(n,m,k)``
    Larger meshes with ``k`` edge rotations, each injecting two 3-5 pairs
    at low-discrepancy (not random) positions.

No generator uses a random number generator.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidSpec
from .mesh import QuadMesh, parse_call

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _grid_quads(n, m, index):
    return [[index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)] for j in range(m) for i in range(n)]


def grid(n: int, m: int) -> QuadMesh:
    if n < 2 or m < 2:
        raise InvalidSpec("grid dimensions must be >= 2")
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    verts = [(float(i), float(j), 0.0) for j in range(m + 1) for i in range(n + 1)]
    quads = _grid_quads(n, m, idx)
    feature = {}
    for i in range(n):
        feature[(idx(i, 0), idx(i + 1, 0))] = 0
        feature[(idx(i, m), idx(i + 1, m))] = 2
    for j in range(m):
        feature[(idx(n, j), idx(n, j + 1))] = 1
        feature[(idx(0, j), idx(0, j + 1))] = 3
    corners = {idx(0, 0): 1, idx(n, 0): 1, idx(n, m): 1, idx(0, m): 1}
    return QuadMesh(verts, quads, feature, corners)


def _annulus_arrays(n, m, r0=1.0, r1=2.0):
    verts = []
    for r in range(m + 1):
        rad = r0 + (r1 - r0) * r / m
        for k in range(n):
            t = 2.0 * math.pi * k / n
            verts.append((rad * math.cos(t), rad * math.sin(t), 0.0))
    idx = lambda k, r: r * n + (k % n)  # noqa: E731
    quads = [[idx(k, r), idx(k, r + 1), idx(k + 1, r + 1), idx(k + 1, r)] for r in range(m) for k in range(n)]
    feature = {}
    for k in range(n):
        feature[(idx(k, 0), idx(k + 1, 0))] = 0
        feature[(idx(k, m), idx(k + 1, m))] = 1
    return np.array(verts), quads, feature


def annulus(n: int, m: int) -> QuadMesh:
    if n < 3 or m < 2:
        raise InvalidSpec("annulus needs n >= 3 angular and m >= 2 radial quads")
    verts, quads, feature = _annulus_arrays(n, m)
    return QuadMesh(verts, quads, feature)


# ----------------------------------------------------------------------
# edge rotation: the local edit that injects 3-5 pairs


def rotate_edge(quads: list[list[int]], qa: int, qb: int) -> None:
    """Rotate the edge shared by quads ``qa`` and ``qb`` in place.

    Writing the hexagon of the two quads as ``h0..h5`` with the shared edge
    ``h1-h4``, the quads become ``[h2,h3,h4,h5]`` and ``[h5,h0,h1,h2]``.
    ``h1`` and ``h4`` lose one edge, ``h2`` and ``h5`` gain one.
    """
    A, B = quads[qa], quads[qb]
    for k in range(4):
        a, b = A[k], A[(k + 1) % 4]
        if b in B and B[(B.index(b) + 1) % 4] == a:
            break
    else:
        raise ValueError("quads do not share an edge")
    # A = [h0, h1, h4, h5] with the shared halfedge h1 -> h4
    h0, h1, h4, h5 = A[k - 1], A[k], A[(k + 1) % 4], A[(k + 2) % 4]
    j = B.index(h4)
    # B = [h4, h1, h2, h3] starting at h4
    h2, h3 = B[(j + 2) % 4], B[(j + 3) % 4]
    quads[qa] = [h2, h3, h4, h5]
    quads[qb] = [h5, h0, h1, h2]


def _laplacian_relax(verts, quads, fixed, iters=60, weight=0.5):
    verts = np.array(verts, dtype=float)
    nbrs: list[set[int]] = [set() for _ in range(len(verts))]
    for q in quads:
        for k in range(4):
            a, b = q[k], q[(k + 1) % 4]
            nbrs[a].add(b)
            nbrs[b].add(a)
    free = [v for v in range(len(verts)) if v not in fixed and nbrs[v]]
    if not free:
        return verts
    width = max(len(nbrs[v]) for v in free)
    table = np.full((len(free), width), -1, dtype=np.int64)
    for r, v in enumerate(free):
        s = sorted(nbrs[v])
        table[r, : len(s)] = s
    mask = table >= 0
    counts = mask.sum(axis=1, keepdims=True)
    free = np.array(free)
    for _ in range(iters):
        gathered = verts[np.where(mask, table, 0)] * mask[..., None]
        centroid = gathered.sum(axis=1) / counts
        verts[free] += weight * (centroid - verts[free])
    return verts


def _square_to_disk(u, v):
    return u * np.sqrt(1.0 - v * v / 2.0), v * np.sqrt(1.0 - u * u / 2.0)


def _disk_grid(n, m, ax=1.0, ay=1.0):
    """Grid of ``n x m`` quads mapped onto an ellipse with semi-axes ``ax``, ``ay``."""
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    u = np.array([-1.0 + 2.0 * i / n for j in range(m + 1) for i in range(n + 1)])
    v = np.array([-1.0 + 2.0 * j / m for j in range(m + 1) for i in range(n + 1)])
    x, y = _square_to_disk(u, v)
    verts = np.column_stack([ax * x, ay * y, np.zeros_like(x)])
    quads = _grid_quads(n, m, idx)
    boundary = {idx(i, j) for j in range(m + 1) for i in range(n + 1) if i in (0, n) or j in (0, m)}
    return verts, quads, idx, boundary


def _rotation_sites(n, m, count, margin=1):
    """Low-discrepancy positions of horizontal quad pairs that do not touch.

    Returns ``(i, j)`` cell indices; the pair is cells ``(i, j)`` and
    ``(i + 1, j)``.  Sites keep ``margin`` cells from the boundary and
    two cells from each other.
    """
    sites: list[tuple[int, int]] = []
    k = 0
    while len(sites) < count and k < 50 * count + 100:
        k += 1
        fx = (k * GOLDEN) % 1.0
        fy = (k * GOLDEN * GOLDEN * 3.0 + 0.37) % 1.0
        i = margin + int(fx * max(1, n - 2 * margin - 1))
        j = margin + int(fy * max(1, m - 2 * margin))
        if i + 1 >= n - margin + 1 or j >= m - margin + 1:
            continue
        if any(abs(i - a) < 4 and abs(j - b) < 3 for a, b in sites):
            continue
        sites.append((i, j))
    if len(sites) < count:
        raise InvalidSpec(f"cannot place {count} rotations in a {n}x{m} grid")
    return sites


def disk_with_pair(n: int = 10) -> QuadMesh:
    """Disk whose only interior irregular vertices are one 3-5 pair."""
    verts, quads, idx, boundary = _disk_grid(n, n)
    x0 = n // 2 - 1
    # cells (x0, 0) and (x0 + 1, 0) touch the bottom boundary
    rotate_edge(quads, x0, x0 + 1)
    verts = _laplacian_relax(verts, quads, boundary)
    return QuadMesh(verts, quads)


def ellipse_fig2() -> QuadMesh:
    """Ellipse with corner tips, an interior 3-5 pair and boundary irregulars.

    The two tips of the major axis are corners of nominal valence 2 joined
    by a horizontal grid line.  One edge rotation next to the lower
    boundary leaves a single interior 3-5 pair and a valence-1/valence-3
    pair of boundary vertices; the square-to-disk map adds four valence-1
    boundary vertices at the diagonals.
    """
    n, m = 8, 6
    verts, quads, idx, boundary = _disk_grid(n, m, ax=2.0, ay=1.0)
    rotate_edge(quads, 6, 7)
    verts = _laplacian_relax(verts, quads, boundary)
    left, right = idx(0, m // 2), idx(n, m // 2)
    mesh = QuadMesh(verts, quads)
    tags = {tuple(int(x) for x in mesh.edges[e]): 0 for e in mesh.feature_edges}
    return QuadMesh(verts, quads, tags, {left: 2, right: 2})


def disk(n: int, rotations: int) -> QuadMesh:
    verts, quads, idx, boundary = _disk_grid(n, n)
    for i, j in _rotation_sites(n, n, rotations):
        rotate_edge(quads, j * n + i, j * n + i + 1)
    verts = _laplacian_relax(verts, quads, boundary)
    return QuadMesh(verts, quads)


def ellipse(n: int, m: int, rotations: int) -> QuadMesh:
    if m % 2:
        raise InvalidSpec("ellipse needs an even number of rows")
    verts, quads, idx, boundary = _disk_grid(n, m, ax=2.0, ay=1.0)
    mid = m // 2
    for i, j in _rotation_sites(n, m, rotations):
        if j in (mid - 1, mid):
            j = j - 2 if j == mid - 1 else j + 1
        rotate_edge(quads, j * n + i, j * n + i + 1)
    verts = _laplacian_relax(verts, quads, boundary)
    mesh = QuadMesh(verts, quads)
    tags = {tuple(int(x) for x in mesh.edges[e]): 0 for e in mesh.feature_edges}
    return QuadMesh(verts, quads, tags, {idx(0, mid): 2, idx(n, mid): 2})


def annulus_pairs(n: int, m: int, rotations: int) -> QuadMesh:
    verts, quads, feature = _annulus_arrays(n, m)
    for i, j in _rotation_sites(n, m, rotations):
        # cells of ring j are stored at j * n + k; pair along the angular direction
        rotate_edge(quads, j * n + i, j * n + (i + 1) % n)
    fixed = set(range(n)) | set(range(m * n, (m + 1) * n))
    verts = _laplacian_relax(verts, quads, fixed)
    return QuadMesh(verts, quads, feature)


_GENERATORS = {
    "grid": (grid, 2),
    "annulus": (annulus, 2),
    "disk_with_pair": (disk_with_pair, None),
    "ellipse_fig2": (ellipse_fig2, 0),
    "disk": (disk, 2),
    "ellipse": (ellipse, 3),
    "annulus_pairs": (annulus_pairs, 3),
}

SUITE = ("disk(40,6)", "disk(60,10)", "annulus_pairs(96,16,6)", "ellipse(64,32,8)")


def generate_test_mesh(spec: str) -> QuadMesh:
    """Build a synthetic mesh from a spec string such as ``"grid(4,4)"``."""
    try:
        name, args = parse_call(spec)
        ints = [int(a) for a in args]
    except ValueError:
        raise InvalidSpec(f"malformed generator spec {spec!r}") from None
    if name not in _GENERATORS:
        raise InvalidSpec(f"unknown generator {name!r}")
    fn, arity = _GENERATORS[name]
    if arity is not None and len(ints) != arity:
        raise InvalidSpec(f"{name} takes {arity} integer arguments")
    if arity is None and len(ints) > 1:
        raise InvalidSpec(f"{name} takes at most one argument")
    if any(i < 0 for i in ints):
        raise InvalidSpec("generator arguments must be non-negative")
    return fn(*ints)
