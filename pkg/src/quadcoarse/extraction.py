"""Coarse layout extraction from an optimized quantization.

Every patch of the T-mesh is split into a lattice of unit quads according
to its quantized side lengths.  Lattice points that a zero-length arc or a
zero-width patch identifies are merged with a union-find.  The merged unit
quads form the coarse layout, which is then embedded on the input mesh and
subdivided into a block-structured linear quad mesh.

If a merge produces an invalid layout (degenerate quad, non-manifold
vertex, two singular vertices merged, a curve collapsed onto another) the
arcs responsible for the merge are returned as a repair row that makes
their total exceed its current value; the caller re-solves with that row
added.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEdge, DisconnectedPath, TopologyCollapse
from .ilp import VALIDITY, IlpModel, Quantization, Row, solve
from .mesh import QuadMesh
from .tmesh import TMesh


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


class LayoutViolation(Exception):
    """A merge that breaks layout validity, with the arcs that caused it."""

    def __init__(self, reason: str, arcs: frozenset[int], minimum: int = 1):
        super().__init__(reason)
        self.reason = reason
        self.arcs = arcs
        self.minimum = minimum


class _Union:
    def __init__(self):
        self.parent: list[int] = []
        self.adj: list[list[tuple[int, frozenset]]] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.adj.append([])
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int, witness: frozenset) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # adjacency only on merging unions: a spanning forest of witnesses
        self.adj[a].append((b, witness))
        self.adj[b].append((a, witness))
        self.parent[max(ra, rb)] = min(ra, rb)

    def explain(self, a: int, b: int) -> frozenset:
        """Witness arcs along a union path from ``a`` to ``b``."""
        prev = {a: None}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            if x == b:
                break
            for y, w in self.adj[x]:
                if y not in prev:
                    prev[y] = (x, w)
                    queue.append(y)
        out: set[int] = set()
        x = b
        while prev.get(x) is not None:
            x, w = prev[x]
            out |= w
        return frozenset(out)

    def group_witness(self, members) -> frozenset:
        out: set[int] = set()
        for m in members:
            for _, w in self.adj[m]:
                out |= w
        return frozenset(out)


@dataclass
class MergedLattice:
    """Unit quads of all patches after merging, in point-id space."""

    keys: list[tuple]
    point_vertex: list[int]
    uf: _Union
    quads: list[tuple[int, int, int, int]]
    quad_patch: list[int]
    quad_cell: list[tuple[int, int]]
    side_arc: dict[tuple[int, int], int]
    dims: list[tuple[int, int]]


def _arc_vertex(arc, k, q):
    return arc.path[round_half_away(k * arc.length / q)]


def merge_lattice(tmesh: TMesh, q) -> MergedLattice:
    """Split patches into unit lattices and merge points identified by zeros."""
    uf = _Union()
    keys: list[tuple] = []
    vert: list[int] = []
    ids: dict[tuple, int] = {}

    def point(key, v):
        if key not in ids:
            ids[key] = uf.add()
            keys.append(key)
            vert.append(int(v))
        return ids[key]

    for v in tmesh.node_vertices:
        point(("n", v), v)
    arc_points = []
    for arc in tmesh.arcs:
        qa = int(q[arc.id])
        s, e = ids[("n", arc.start)], ids[("n", arc.end)]
        if qa == 0:
            uf.union(s, e, frozenset([arc.id]))
            arc_points.append([s, e])
        else:
            arc_points.append([s] + [point(("a", arc.id, k), _arc_vertex(arc, k, qa)) for k in range(1, qa)] + [e])

    side_arc: dict[tuple[int, int], int] = {}
    quads, quad_patch, quad_cell, dims = [], [], [], []
    for p in tmesh.patches:
        positions = []
        steps = []
        for side in p.sides:
            pos, arcs_of_step = [], []
            for a, fwd in side:
                pts = arc_points[a] if fwd else arc_points[a][::-1]
                if not pos:
                    pos.append(pts[0])
                if int(q[a]) == 0:
                    # endpoints already merged at the arc level
                    continue
                pos.extend(pts[1:])
                arcs_of_step.extend([a] * (len(pts) - 1))
            positions.append(pos)
            steps.append(arcs_of_step)
        A, B = len(positions[0]) - 1, len(positions[1]) - 1
        if A != len(positions[2]) - 1 or B != len(positions[3]) - 1:
            raise TopologyCollapse(f"patch {p.id} has inconsistent quantized sides")
        dims.append((A, B))
        lat: dict[tuple[int, int], int] = {}
        s13 = frozenset(a for a, _ in p.sides[0]) | frozenset(a for a, _ in p.sides[2])
        s24 = frozenset(a for a, _ in p.sides[1]) | frozenset(a for a, _ in p.sides[3])

        def put(xy, pid, witness):
            if xy in lat:
                uf.union(lat[xy], pid, witness)
            else:
                lat[xy] = pid

        for x in range(A + 1):
            put((x, 0), positions[0][x], s24)
            put((A - x, B), positions[2][x], s24)
        for y in range(B + 1):
            put((A, y), positions[1][y], s13)
            put((0, B - y), positions[3][y], s13)
        for s, pos in enumerate(positions):
            for k, a in enumerate(steps[s]):
                side_arc.setdefault((pos[k], pos[k + 1]), a)
        L1, L2 = p.size
        if A == 0 or B == 0:
            continue
        for x in range(1, A):
            for y in range(1, B):
                gx, gy = round_half_away(x * L1 / A), round_half_away(y * L2 / B)
                lat[(x, y)] = point(("p", p.id, x, y), p.grid[gx, gy])
        for y in range(B):
            for x in range(A):
                quads.append((lat[(x, y)], lat[(x + 1, y)], lat[(x + 1, y + 1)], lat[(x, y + 1)]))
                quad_patch.append(p.id)
                quad_cell.append((x, y))
    return MergedLattice(keys, vert, uf, quads, quad_patch, quad_cell, side_arc, dims)


# ----------------------------------------------------------------------
# layout


@dataclass
class CoarseLayout:
    """Conforming coarse quad layout embedded on the input mesh.

    ``centers[i]`` is the mesh vertex of layout vertex ``i`` and
    ``members[i]`` the mesh vertices merged into it;
    ``edge_paths[e]`` is the mesh-vertex polyline of layout edge
    ``edges[e]`` from its first to its second endpoint.
    """

    centers: list[int]
    vertex_class: list[str]
    vertex_curves: list[frozenset]
    members: list[list[int]]
    quads: np.ndarray
    edges: list[tuple[int, int]]
    edge_curve: list[int | None]
    edge_paths: list[list[int]] = field(default_factory=list)
    quad_patch: list[int] = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.centers)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_quads


def format_layout(layout: CoarseLayout) -> str:
    """Text dump: vertices (center, class), edges (curve, path), patches."""
    out = ["quadcoarse-layout v1", f"vertices {layout.n_vertices}"]
    for i, c in enumerate(layout.centers):
        curves = ",".join(str(x) for x in sorted(layout.vertex_curves[i])) or "-"
        out.append(f"{i} {c} {layout.vertex_class[i]} {curves}")
    out.append(f"edges {len(layout.edges)}")
    for e, (a, b) in enumerate(layout.edges):
        cid = layout.edge_curve[e]
        path = " ".join(str(v) for v in layout.edge_paths[e]) if layout.edge_paths else ""
        out.append(f"{e} {a} {b} {'-' if cid is None else cid} : {path}")
    out.append(f"patches {layout.n_quads}")
    for k, quad in enumerate(layout.quads.tolist()):
        out.append(f"{k} " + " ".join(str(v) for v in quad))
    return "\n".join(out) + "\n"


def _node_curves(mesh: QuadMesh, v: int) -> frozenset:
    return frozenset(mesh.curve_of(v, n) for n in mesh.neighbors(v) if mesh.is_feature(v, n))


def _singular(tmesh: TMesh, v: int) -> bool:
    c = tmesh.classes.get(v)
    return c is not None and (c.irregular or c.site == "corner")


def build_layout(tmesh: TMesh, q) -> CoarseLayout:
    """Merged layout topology for arc values ``q``; raises ``LayoutViolation``."""
    mesh = tmesh.mesh
    ml = merge_lattice(tmesh, q)
    uf = ml.uf
    n_points = len(ml.keys)
    root_members: dict[int, list[int]] = {}
    for pt in range(n_points):
        root_members.setdefault(uf.find(pt), []).append(pt)

    point_curves: list[frozenset] = []
    for pt, key in enumerate(ml.keys):
        if key[0] == "n":
            point_curves.append(_node_curves(mesh, key[1]))
        elif key[0] == "a":
            arc = tmesh.arcs[key[1]]
            cid = mesh.curve_of(arc.path[0], arc.path[1]) if arc.on_feature else None
            point_curves.append(frozenset([cid]) if cid is not None else frozenset())
        else:
            point_curves.append(frozenset())

    used_roots = sorted({uf.find(p) for quad in ml.quads for p in quad})
    lid = {r: k for k, r in enumerate(used_roots)}
    layout_quads = np.array([[lid[uf.find(p)] for p in quad] for quad in ml.quads], dtype=np.int64).reshape(-1, 4)

    # group checks
    pairs: dict[int, tuple[int, int]] = {}
    for r in used_roots:
        members = root_members[r]
        sing = [p for p in members if ml.keys[p][0] == "n" and _singular(tmesh, ml.keys[p][1])]
        if len(sing) > 1:
            ok35 = len(sing) == 2 and _pair_35(tmesh, ml.keys[sing[0]][1], ml.keys[sing[1]][1])
            if not ok35:
                raise LayoutViolation("singular vertices merged", uf.explain(sing[0], sing[1]))
            pairs[r] = (sing[0], sing[1])
        curve_pts = [p for p in members if point_curves[p]]
        for p in members:
            key = ml.keys[p]
            if key[0] == "n" and not mesh.on_curve[key[1]] and _singular(tmesh, key[1]) and curve_pts:
                raise LayoutViolation("irregular vertex merged onto a curve", uf.explain(p, curve_pts[0]))
        if curve_pts:
            common = frozenset.intersection(*(point_curves[p] for p in curve_pts))
            if not common:
                a = curve_pts[0]
                b = next(p for p in curve_pts if not (point_curves[p] & point_curves[a]))
                raise LayoutViolation("two curves merged", uf.explain(a, b))

    # quad checks
    for k, quad in enumerate(layout_quads.tolist()):
        if len(set(quad)) != 4:
            pts = ml.quads[k]
            for i in range(4):
                for j in range(i + 1, 4):
                    if quad[i] == quad[j]:
                        raise LayoutViolation("degenerate quad", uf.explain(pts[i], pts[j]) or _patch_arcs(tmesh, ml, k), 1)
    edge_quads: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for k, quad in enumerate(layout_quads.tolist()):
        for i in range(4):
            a, b = quad[i], quad[(i + 1) % 4]
            edge_quads.setdefault((min(a, b), max(a, b)), []).append((k, 1 if a < b else -1))
    for e, qs in edge_quads.items():
        if len(qs) > 2 or (len(qs) == 2 and qs[0][1] == qs[1][1]):
            raise LayoutViolation("non-manifold edge", _group_witness(ml, root_members, used_roots, e) or _patch_arcs(tmesh, ml, qs[0][0]))
    n_layout = len(used_roots)
    _check_vertex_fans(layout_quads, n_layout, ml, root_members, used_roots)
    for r, (u, v) in pairs.items():
        lv = lid[r]
        around = int((layout_quads == lv).sum())
        boundary = any(len(qs) == 1 for e, qs in edge_quads.items() if lv in e)
        if around != 4 or boundary:
            raise LayoutViolation("collapsed 3-5 pair is not regular", uf.explain(u, v))
    chi = n_layout - len(edge_quads) + len(layout_quads)
    if chi != tmesh.euler_characteristic() or len(layout_quads) == 0:
        # with nothing merged to blame, ask for any closed arc to reopen
        witness = _all_witness(ml, root_members, used_roots)
        witness = witness or frozenset(a for a in range(len(tmesh.arcs)) if q[a] == 0)
        witness = witness or frozenset(range(len(tmesh.arcs)))
        raise LayoutViolation("layout topology changed", witness)

    members = [root_members[r] for r in used_roots]
    classes, curves, centers = [], [], []
    for r, mem in zip(used_roots, members):
        corner = [ml.point_vertex[p] for p in mem if ml.keys[p][0] == "n" and ml.keys[p][1] in mesh.corners]
        oncurve = [ml.point_vertex[p] for p in mem if point_curves[p]]
        if corner:
            classes.append("corner")
            centers.append(min(corner))
        elif oncurve:
            classes.append("on-curve")
            centers.append(min(v for v in oncurve if mesh.on_curve[v]))
        else:
            classes.append("interior")
            centers.append(min(ml.point_vertex[p] for p in mem))
        cps = [point_curves[p] for p in mem if point_curves[p]]
        curves.append(frozenset.intersection(*cps) if cps else frozenset())

    edges = sorted(edge_quads)
    edge_arc: dict[tuple[int, int], int] = {}
    for (p, r), arc in ml.side_arc.items():
        la, lb = lid.get(uf.find(p)), lid.get(uf.find(r))
        if la is None or lb is None:
            continue
        key = (min(la, lb), max(la, lb))
        if key not in edge_arc or (tmesh.arcs[arc].on_feature and not tmesh.arcs[edge_arc[key]].on_feature):
            edge_arc[key] = arc
    edge_curve = []
    for a, b in edges:
        cid = None
        ca, cb = curves[a], curves[b]
        if ca and cb:
            common = ca & cb
            # a layout edge is a curve edge when it comes from a feature arc
            arc = edge_arc.get((a, b))
            if arc is not None and tmesh.arcs[arc].on_feature:
                first = tmesh.arcs[arc].path
                cid = mesh.curve_of(first[0], first[1])
            elif len(common) == 1 and _both_boundary(edge_quads[(a, b)]):
                cid = next(iter(common))
        edge_curve.append(cid)
    group_vertices = [sorted({int(ml.point_vertex[p]) for p in mem}) for mem in members]
    return CoarseLayout(centers, classes, curves, group_vertices, layout_quads, edges, edge_curve, [], list(ml.quad_patch))


def _both_boundary(qs):
    return len(qs) == 1


def _pair_35(tmesh: TMesh, u: int, v: int) -> bool:
    cu, cv = tmesh.classes.get(u), tmesh.classes.get(v)
    return cu.site == "interior" and cv.site == "interior" and {cu.valence, cv.valence} == {3, 5}


def _patch_arcs(tmesh, ml, k) -> frozenset:
    p = tmesh.patches[ml.quad_patch[k]]
    return frozenset(a for side in p.sides for a, _ in side)


def _group_witness(ml, root_members, used_roots, e) -> frozenset:
    out: set[int] = set()
    for lv in e:
        out |= ml.uf.group_witness(root_members[used_roots[lv]])
    return frozenset(out)


def _all_witness(ml, root_members, used_roots) -> frozenset:
    out: set[int] = set()
    for r in used_roots:
        out |= ml.uf.group_witness(root_members[r])
    return frozenset(out)


def _check_vertex_fans(quads: np.ndarray, n: int, ml, root_members, used_roots) -> None:
    """Each layout vertex must have a single (open or closed) fan of quads."""
    nxt: dict[int, dict[int, int]] = {}
    for quad in quads.tolist():
        for i in range(4):
            v, a, b = quad[i], quad[(i + 1) % 4], quad[i - 1]
            # around v, the quad connects outgoing neighbour a to incoming b
            d = nxt.setdefault(v, {})
            if a in d:
                raise LayoutViolation("non-manifold vertex", _group_witness(ml, root_members, used_roots, (v,)))
            d[a] = b
    for v, d in nxt.items():
        starts = set(d) - set(d.values())
        if len(starts) > 1:
            raise LayoutViolation("non-manifold vertex", _group_witness(ml, root_members, used_roots, (v,)))
        start = next(iter(starts)) if starts else next(iter(d))
        seen, x = 0, start
        while x in d and seen <= len(d):
            x = d[x]
            seen += 1
            if x == start:
                break
        if seen != len(d):
            raise LayoutViolation("non-manifold vertex", _group_witness(ml, root_members, used_roots, (v,)))


# ----------------------------------------------------------------------
# quantize-and-repair loop


def extract_layout(tmesh: TMesh, model: IlpModel, budget=None, max_repairs: int = 64, quantization=None):
    """Solve, merge and repair until the layout is valid.

    Returns ``(layout, quantization, repair_rows)``.
    """
    repairs: list[Row] = []
    sol = quantization if quantization is not None else solve(model, budget)
    for _ in range(max_repairs + 1):
        q = model.arc_values(sol.var_values)
        try:
            layout = build_layout(tmesh, q)
            return layout, sol, repairs
        except LayoutViolation as err:
            arcs = err.arcs
            if not arcs:
                raise TopologyCollapse(f"{err.reason} with no arc to keep open") from None
            terms: dict[int, int] = {}
            for a in sorted(arcs):
                terms[model.arc_var[a]] = 1
            # the responsible arcs must grow past their current total
            current = sum(sol.var_values[v] for v in terms)
            row = Row(tuple(sorted(terms.items())), ">=", max(err.minimum, current + 1), VALIDITY)
            if row in model.rows:
                raise TopologyCollapse(f"{err.reason}; repair row does not exclude the current solution") from None
            model.rows.append(row)
            repairs.append(row)
            sol = solve(model, budget)
    raise TopologyCollapse(f"layout still invalid after {max_repairs} repairs")


# ----------------------------------------------------------------------
# placement on the input mesh


def _dijkstra(mesh: QuadMesh, src: int, dst: int, blocked, pos) -> list[int]:
    if src == dst:
        return [src]
    dist = {src: 0.0}
    prev = {src: -1}
    heap = [(0.0, src)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == dst:
            break
        if d > dist[v]:
            continue
        if v != src and v in blocked:
            continue
        for n in mesh.neighbors(v):
            nd = d + float(np.linalg.norm(pos[n] - pos[v]))
            if nd < dist.get(n, math.inf):
                dist[n] = nd
                prev[n] = v
                heapq.heappush(heap, (nd, n))
    if dst not in prev:
        raise DisconnectedPath(f"no path between mesh vertices {src} and {dst}")
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _curve_path(mesh: QuadMesh, cid: int, src: int, dst: int, via: int) -> list[int]:
    nbrs: dict[int, list[int]] = {}
    for e, c in mesh.feature_edges.items():
        if c != cid:
            continue
        a, b = (int(x) for x in mesh.edges[e])
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    if src not in nbrs or dst not in nbrs:
        return []
    options = []
    for first in sorted(nbrs[src]):
        path = [src, first]
        while path[-1] != dst and path[-1] != src:
            nxt = [x for x in nbrs[path[-1]] if x != path[-2]]
            if not nxt:
                break
            path.append(nxt[0])
        if path[-1] == dst:
            options.append(path)
    if via in nbrs and via not in (src, dst):
        through = [p for p in options if via in p]
        options = through or options
    return min(options, key=len) if options else []


def place(layout: CoarseLayout, tmesh: TMesh, q) -> CoarseLayout:
    """Embed every layout edge as a polyline of mesh vertices."""
    mesh = tmesh.mesh
    pos = mesh.vertices
    hints = _edge_hints(layout, tmesh, q)
    blocked = set(np.flatnonzero(mesh.on_curve).tolist())
    paths = []
    for e, (a, b) in enumerate(layout.edges):
        u, v = layout.centers[a], layout.centers[b]
        hint = hints.get(e, u)
        cid = layout.edge_curve[e]
        path: list[int] = []
        if cid is not None:
            path = _curve_path(mesh, cid, u, v, hint)
        if not path:
            allow = blocked - {u, v, hint}
            first = _dijkstra(mesh, u, hint, allow, pos)
            second = _dijkstra(mesh, hint, v, allow, pos)
            path = first + second[1:]
            path = _drop_backtracks(path)
        if len(path) < 2 and u != v:
            raise DegenerateEdge(f"layout edge {e} has an empty embedding")
        paths.append(path)
    layout.edge_paths = paths
    return layout


def _drop_backtracks(path: list[int]) -> list[int]:
    out: list[int] = []
    for v in path:
        if len(out) >= 2 and out[-2] == v:
            out.pop()
            continue
        out.append(v)
    return out


def _edge_hints(layout: CoarseLayout, tmesh: TMesh, q) -> dict[int, int]:
    """Mesh vertex near the middle of one unit edge for each layout edge."""
    index = layout.edge_index()
    hints: dict[int, int] = {}
    dims: dict[int, tuple[int, int]] = {}
    for p in tmesh.patches:
        dims[p.id] = (tmesh.side_length(p.sides[0], q), tmesh.side_length(p.sides[1], q))
    cells = {}
    for k, pid in enumerate(layout.quad_patch):
        cells.setdefault(pid, []).append(k)
    for pid, ks in cells.items():
        p = tmesh.patches[pid]
        A, B = dims[pid]
        L1, L2 = p.size
        for idx, k in enumerate(ks):
            x, y = idx % A, idx // A
            quad = layout.quads[k].tolist()
            corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
            for i in range(4):
                a, b = quad[i], quad[(i + 1) % 4]
                e = index[(min(a, b), max(a, b))]
                if e in hints:
                    continue
                (xa, ya), (xb, yb) = corners[i], corners[(i + 1) % 4]
                gx = round_half_away((xa + xb) / 2 * L1 / A)
                gy = round_half_away((ya + yb) / 2 * L2 / B)
                hints[e] = int(p.grid[gx, gy])
    return hints


# ----------------------------------------------------------------------
# subdivision


@dataclass
class BlockStructuredMesh:
    """Fine conforming quad mesh made of one structured block per layout quad."""

    mesh: QuadMesh
    blocks: list[np.ndarray]
    layout: CoarseLayout
    widths: list[int]
    vertex_curve: np.ndarray
    is_corner: np.ndarray
    layout_vertex: np.ndarray

    @property
    def n_quads(self) -> int:
        return self.mesh.n_quads


def chord_widths(layout: CoarseLayout, scale: float = 1.0) -> list[int]:
    """Fine edge count for every layout edge, constant along each quad loop."""
    index = layout.edge_index()
    parent = list(range(len(layout.edges)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for quad in layout.quads.tolist():
        es = [index[(min(quad[i], quad[(i + 1) % 4]), max(quad[i], quad[(i + 1) % 4]))] for i in range(4)]
        for a, b in ((es[0], es[2]), (es[1], es[3])):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    sums: dict[int, list[int]] = {}
    for e, path in enumerate(layout.edge_paths):
        sums.setdefault(find(e), []).append(len(path) - 1)
    width = {r: max(1, round_half_away(scale * sum(v) / len(v))) for r, v in sums.items()}
    return [width[find(e)] for e in range(len(layout.edges))]


def _resample(points: np.ndarray, n: int) -> np.ndarray:
    """``n + 1`` points at equal arc length along a polyline."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return np.repeat(points[:1], n + 1, axis=0)
    t = np.linspace(0.0, s[-1], n + 1)
    return np.column_stack([np.interp(t, s, points[:, d]) for d in range(points.shape[1])])


def subdivide(layout: CoarseLayout, mesh: QuadMesh, scale: float = 1.0, proxy=None) -> BlockStructuredMesh:
    """Subdivide each layout quad into a structured block with shared boundaries."""
    widths = chord_widths(layout, scale)
    index = layout.edge_index()
    pos = mesh.vertices
    verts: list[np.ndarray] = [pos[c] for c in layout.centers]
    vcurve = [-1] * layout.n_vertices
    corner = [cls == "corner" for cls in layout.vertex_class]
    lvert = list(range(layout.n_vertices))
    for i, cls in enumerate(layout.vertex_class):
        if cls != "interior":
            cs = sorted(layout.vertex_curves[i])
            vcurve[i] = cs[0] if len(cs) == 1 else -1
    edge_nodes: list[list[int]] = []
    for e, (a, b) in enumerate(layout.edges):
        w = widths[e]
        path = layout.edge_paths[e]
        pts = _resample(pos[path], w)
        ids = [a]
        for k in range(1, w):
            ids.append(len(verts))
            verts.append(pts[k])
            vcurve.append(layout.edge_curve[e] if layout.edge_curve[e] is not None else -1)
            corner.append(False)
            lvert.append(-1)
        ids.append(b)
        edge_nodes.append(ids)

    def side(a, b):
        e = index[(min(a, b), max(a, b))]
        ids = edge_nodes[e]
        return ids if a < b else ids[::-1]

    blocks, quads = [], []
    interior_fill = []
    for quad in layout.quads.tolist():
        c0, c1, c2, c3 = quad
        bottom, right = side(c0, c1), side(c1, c2)
        top, left = side(c3, c2), side(c0, c3)
        W, H = len(bottom) - 1, len(right) - 1
        if len(top) - 1 != W or len(left) - 1 != H:
            raise TopologyCollapse("opposite layout edges have different widths")
        grid = np.full((W + 1, H + 1), -1, dtype=np.int64)
        grid[:, 0] = bottom
        grid[:, H] = top
        grid[0, :] = left
        grid[W, :] = right
        for j in range(1, H):
            for i in range(1, W):
                grid[i, j] = len(verts)
                verts.append(np.zeros(3))
                vcurve.append(-1)
                corner.append(False)
                lvert.append(-1)
        interior_fill.append(grid)
        blocks.append(grid)
        for j in range(H):
            for i in range(W):
                quads.append([grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]])
    V = np.array(verts, dtype=float)
    for grid in interior_fill:
        _coons_fill(V, grid)
    if proxy is not None:
        inner = np.array([v for g in interior_fill for v in g[1:-1, 1:-1].ravel()], dtype=np.int64)
        if len(inner):
            V[inner] = proxy.project(V[inner])
    feature = {}
    for e, (a, b) in enumerate(layout.edges):
        cid = layout.edge_curve[e]
        if cid is None:
            continue
        ids = edge_nodes[e]
        for u, v in zip(ids[:-1], ids[1:]):
            feature[(u, v)] = cid
    corners = {}
    for i, cls in enumerate(layout.vertex_class):
        if cls == "corner":
            corners[i] = mesh.corners.get(layout.centers[i], 1)
    fine = QuadMesh(V, np.array(quads, dtype=np.int64), feature, corners)
    return BlockStructuredMesh(
        fine, blocks, layout, widths, np.array(vcurve), np.array(corner), np.array(lvert)
    )


def _coons_fill(V: np.ndarray, grid: np.ndarray) -> None:
    W, H = grid.shape[0] - 1, grid.shape[1] - 1
    if W < 2 or H < 2:
        return
    s = np.linspace(0.0, 1.0, W + 1)[:, None, None]
    t = np.linspace(0.0, 1.0, H + 1)[None, :, None]
    bottom = V[grid[:, 0]][:, None, :]
    top = V[grid[:, H]][:, None, :]
    left = V[grid[0, :]][None, :, :]
    right = V[grid[W, :]][None, :, :]
    p00, p10, p11, p01 = V[grid[0, 0]], V[grid[W, 0]], V[grid[W, H]], V[grid[0, H]]
    P = (
        (1 - t) * bottom + t * top + (1 - s) * left + s * right
        - ((1 - s) * (1 - t) * p00 + s * (1 - t) * p10 + s * t * p11 + (1 - s) * t * p01)
    )
    inner = grid[1:-1, 1:-1]
    V[inner.ravel()] = P[1:-1, 1:-1].reshape(-1, 3)
