"""Motorcycle-graph T-mesh built from traces over a quad mesh.

Traces leave every irregular vertex, corner and seed node along each
outgoing edge and continue straight across regular vertices.  Traces on
feature curves are static: they cover the curve between consecutive nodes.
Interior traces advance in lockstep rounds and stop at nodes, at the
boundary, when they run head-on into another trace, or once they have met
enough alignment candidates inside their cone on both sides.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NonQuadPatch, NoSeeds
from .mesh import QuadMesh, VertexClass, classify_vertices

HIT_IRREGULAR = "hit_irregular"
HIT_BOUNDARY_CORNER = "hit_boundary_corner"
CONE_SATISFIED = "cone_satisfied"
MERGED = "merged"

_CONE_EPS = 1e-12


def in_cone(l_ji: int, l_ij: int, alpha: float) -> bool:
    """``l_ji / l_ij <= tan(alpha)``, robust to ``tan(pi/4)`` rounding below 1."""
    if l_ji == 0:
        return True
    if alpha <= 0.0:
        return False
    return l_ji <= l_ij * math.tan(alpha) * (1.0 + _CONE_EPS)


@dataclass
class Trace:
    id: int
    origin: int
    direction: int
    path: list[int]
    on_feature: bool
    stop_reason: str | None = None
    partner: int | None = None

    @property
    def edge_path(self) -> list[tuple[int, int]]:
        return list(zip(self.path[:-1], self.path[1:]))

    @property
    def length(self) -> int:
        return len(self.path) - 1


@dataclass
class Arc:
    id: int
    start: int
    end: int
    path: list[int]
    on_feature: bool

    @property
    def length(self) -> int:
        return len(self.path) - 1


@dataclass
class Patch:
    """Quadrilateral T-mesh region.

    ``sides`` holds four lists of ``(arc id, forward)`` in counter-clockwise
    order; ``grid[x, y]`` is the mesh vertex at patch coordinate ``(x, y)``.
    """

    id: int
    sides: list[list[tuple[int, bool]]]
    grid: np.ndarray
    quads: list[int]

    @property
    def size(self) -> tuple[int, int]:
        return self.grid.shape[0] - 1, self.grid.shape[1] - 1

    @property
    def corners(self) -> tuple[int, int, int, int]:
        g = self.grid
        return int(g[0, 0]), int(g[-1, 0]), int(g[-1, -1]), int(g[0, -1])


@dataclass
class TMesh:
    mesh: QuadMesh
    classes: dict[int, VertexClass]
    traces: list[Trace]
    node_vertices: list[int]
    node_tags: dict[int, str]
    arcs: list[Arc]
    patches: list[Patch]
    edge_arc: dict[int, tuple[int, int]] = field(repr=False)
    lines: dict[int, list[int]] = field(repr=False)

    def node_id(self, v: int) -> int:
        return self._node_index[v]

    def __post_init__(self):
        self._node_index = {v: i for i, v in enumerate(self.node_vertices)}

    def is_node(self, v: int) -> bool:
        return v in self._node_index

    def initial_lengths(self) -> list[int]:
        return [a.length for a in self.arcs]

    def arcs_along(self, vertices) -> list[int]:
        """Arc ids covered by a vertex path, in order, without repeats in a row."""
        out: list[int] = []
        for a, b in zip(vertices[:-1], vertices[1:]):
            arc = self.edge_arc[self.mesh.edge_id(a, b)][0]
            if not out or out[-1] != arc:
                out.append(arc)
        return out

    def side_length(self, side, q) -> int:
        return sum(q[a] for a, _ in side)

    def euler_characteristic(self) -> int:
        return len(self.node_vertices) - len(self.arcs) + len(self.patches)


# ----------------------------------------------------------------------
# propagation


def _origins(mesh: QuadMesh, classes) -> list[int]:
    return sorted(v for v, c in classes.items() if c.irregular or c.site == "corner")


def _feature_nodes(mesh: QuadMesh, origins: set[int]) -> set[int]:
    """Vertices where feature traces stop: origins, chain ends, curve-id changes."""
    nodes = set(v for v in origins if mesh.on_curve[v])
    inc: dict[int, list[int]] = {}
    for e, cid in mesh.feature_edges.items():
        for v in mesh.edges[e]:
            inc.setdefault(int(v), []).append(cid)
    for v, cids in inc.items():
        if len(cids) != 2 or cids[0] != cids[1]:
            nodes.add(v)
    return nodes


def _feature_nbrs(mesh: QuadMesh, v: int) -> list[int]:
    return [n for n in mesh.neighbors(v) if mesh.is_feature(v, n)]


def _walk_feature(mesh, start, first, nodes):
    path = [start, first]
    while path[-1] not in nodes and path[-1] != start:
        v = path[-1]
        nxt = [n for n in _feature_nbrs(mesh, v) if n != path[-2]]
        path.append(nxt[0])
    return path


def propagate_traces(
    mesh: QuadMesh,
    classes: dict[int, VertexClass] | None = None,
    alpha: float = math.pi / 4,
    stop_rule: str = "one",
) -> list[Trace]:
    """Trace the motorcycle graph of ``mesh``.

    ``stop_rule`` is ``"one"`` (one in-cone candidate per side) or ``"two"``.
    Raises ``NoSeeds`` when the mesh has no irregular vertex, corner or
    feature loop to start from.
    """
    if not 0.0 <= alpha <= math.pi / 4 + 1e-12:
        raise ValueError("alpha must lie in [0, pi/4]")
    if stop_rule not in ("one", "two"):
        raise ValueError("stop_rule must be 'one' or 'two'")
    need = 1 if stop_rule == "one" else 2
    classes = classes if classes is not None else classify_vertices(mesh)
    origins = set(_origins(mesh, classes))
    fnodes = _feature_nodes(mesh, origins)

    # seed closed feature loops that carry no node
    covered_f: set[int] = set()
    for v in sorted(fnodes):
        for n in _feature_nbrs(mesh, v):
            if mesh.edge_id(v, n) in covered_f:
                continue
            path = _walk_feature(mesh, v, n, fnodes)
            covered_f.update(mesh.edge_id(a, b) for a, b in zip(path[:-1], path[1:]))
    seeds: list[int] = []
    for e in mesh.feature_edges:
        if e in covered_f:
            continue
        loop = _feature_loop(mesh, e)
        seed = min(loop)
        seeds.append(seed)
        covered_f.update(mesh.edge_id(a, b) for a, b in zip(loop, loop[1:] + loop[:1]))
    origins.update(seeds)
    fnodes.update(seeds)
    if not origins and not fnodes:
        raise NoSeeds("mesh has no irregular vertex, corner or feature curve to trace from")
    all_origins = sorted(origins | fnodes)

    traces: list[Trace] = []
    edge_owner: dict[int, int] = {}

    # static feature traces, one per curve segment between feature nodes
    for v in all_origins:
        if v not in fnodes:
            continue
        for n in _feature_nbrs(mesh, v):
            if mesh.edge_id(v, n) in edge_owner:
                continue
            path = _walk_feature(mesh, v, n, fnodes)
            t = Trace(len(traces), v, n, path, True)
            end = path[-1]
            t.stop_reason = HIT_BOUNDARY_CORNER if end in mesh.corners else HIT_IRREGULAR
            for a, b in zip(path[:-1], path[1:]):
                edge_owner[mesh.edge_id(a, b)] = t.id
            traces.append(t)

    visits: dict[int, list[tuple[int, int]]] = {}
    active: list[Trace] = []
    for v in all_origins:
        if v not in origins:
            continue
        for n in mesh.neighbors(v):
            if mesh.is_feature(v, n):
                continue
            t = Trace(len(traces), v, n, [v], False)
            traces.append(t)
            active.append(t)
    counts = {t.id: [0, 0] for t in active}
    dropped: set[int] = set()
    stop_at = origins | fnodes

    while active:
        for t in active:
            if t.stop_reason is not None:
                continue
            v = t.path[-1]
            nxt = t.direction if len(t.path) == 1 else mesh.straight_next(t.path[-2], v)
            e = mesh.edge_id(v, nxt)
            if e in edge_owner:
                if len(t.path) == 1:
                    dropped.add(t.id)
                t.stop_reason = MERGED
                continue
            edge_owner[e] = t.id
            t.path.append(nxt)
            w = nxt
            if w in stop_at:
                visits.setdefault(w, []).append((t.id, len(t.path) - 1))
                t.stop_reason = HIT_BOUNDARY_CORNER if w in mesh.corners else HIT_IRREGULAR
                continue
            if not mesh.is_interior_vertex(w) or mesh.valence(w) != 4:
                visits.setdefault(w, []).append((t.id, len(t.path) - 1))
                t.stop_reason = HIT_BOUNDARY_CORNER
                continue
            nbrs = mesh.neighbors(w)
            back = nbrs.index(v)
            right, ahead, left = nbrs[(back + 1) % 4], nbrs[(back + 2) % 4], nbrs[(back + 3) % 4]
            l_ij = len(t.path) - 1
            for tk_id, pos in visits.get(w, []):
                if tk_id == t.id:
                    continue
                tk = traces[tk_id]
                prev = tk.path[pos - 1]
                if prev == ahead:
                    # head-on meeting with the tip of a collinear trace
                    t.partner, tk.partner = tk.id, t.id
                    t.stop_reason = MERGED
                    if tk.stop_reason is None:
                        tk.stop_reason = MERGED
                    continue
                if prev not in (left, right):
                    continue
                if in_cone(pos, l_ij, alpha):
                    counts[t.id][0 if prev == left else 1] += 1
            visits.setdefault(w, []).append((t.id, len(t.path) - 1))
            if t.stop_reason is None and min(counts[t.id]) >= need:
                t.stop_reason = CONE_SATISFIED
        active = [t for t in active if t.stop_reason is None]

    kept = [t for t in traces if t.id not in dropped]
    remap = {t.id: i for i, t in enumerate(kept)}
    for t in kept:
        t.id = remap[t.id]
        if t.partner is not None:
            t.partner = remap.get(t.partner)
    return kept


def _feature_loop(mesh: QuadMesh, e: int) -> list[int]:
    a, b = (int(x) for x in mesh.edges[e])
    loop = [a, b]
    while True:
        nxt = [n for n in _feature_nbrs(mesh, loop[-1]) if n != loop[-2]]
        if nxt[0] == a:
            return loop
        loop.append(nxt[0])


def trace_line(traces: list[Trace], t: Trace) -> list[int]:
    """Vertex path of ``t`` extended through a head-on partner to its origin."""
    if t.partner is None:
        return list(t.path)
    other = traces[t.partner]
    return list(t.path) + other.path[::-1][1:]


# ----------------------------------------------------------------------
# T-mesh assembly


def build_tmesh(mesh: QuadMesh, traces: list[Trace], classes=None) -> TMesh:
    classes = classes if classes is not None else classify_vertices(mesh)
    graph: set[int] = set()
    for t in traces:
        for a, b in zip(t.path[:-1], t.path[1:]):
            graph.add(mesh.edge_id(a, b))
    gnbrs: dict[int, list[int]] = {}
    for e in sorted(graph):
        a, b = (int(x) for x in mesh.edges[e])
        gnbrs.setdefault(a, []).append(b)
        gnbrs.setdefault(b, []).append(a)
    origins = {t.origin for t in traces}

    node_tags: dict[int, str] = {}
    for v in sorted(gnbrs):
        deg = len(gnbrs[v])
        c = classes.get(v)
        if v in mesh.corners:
            node_tags[v] = "corner"
        elif c is not None and c.irregular:
            node_tags[v] = "irregular"
        elif v in origins:
            node_tags[v] = "seed"
        elif deg == 3:
            node_tags[v] = "t_junction"
        elif deg >= 4:
            node_tags[v] = "crossing"
        elif deg != 2 or not _straight(mesh, v, graph):
            node_tags[v] = "turn"
    node_vertices = sorted(node_tags)

    arcs: list[Arc] = []
    edge_arc: dict[int, tuple[int, int]] = {}
    for s in node_vertices:
        for n in mesh.neighbors(s):
            e = mesh.edge_id(s, n)
            if e not in graph or e in edge_arc:
                continue
            path = [s, n]
            while path[-1] not in node_tags:
                v = path[-1]
                path.append(next(x for x in gnbrs[v] if x != path[-2]))
            arc = Arc(len(arcs), s, path[-1], path, all(mesh.is_feature(a, b) for a, b in zip(path[:-1], path[1:])))
            for k, (a, b) in enumerate(zip(path[:-1], path[1:])):
                edge_arc[mesh.edge_id(a, b)] = (arc.id, k)
            arcs.append(arc)

    lines = {t.id: trace_line(traces, t) for t in traces}
    tm = TMesh(mesh, classes, traces, node_vertices, node_tags, arcs, [], edge_arc, lines)
    tm.patches = _extract_patches(tm, graph)
    return tm


def _straight(mesh: QuadMesh, v: int, graph: set[int]) -> bool:
    nbrs = mesh.neighbors(v)
    cuts = [k for k, n in enumerate(nbrs) if mesh.edge_id(v, n) in graph]
    if mesh.is_interior_vertex(v):
        nq = len(nbrs)
        return len(cuts) == 2 and nq == 4 and (cuts[1] - cuts[0]) == 2
    return len(cuts) == 2 and mesh.valence(v) == 2


def _extract_patches(tm: TMesh, graph: set[int]) -> list[Patch]:
    mesh = tm.mesh
    region = np.full(mesh.n_quads, -1, dtype=np.int64)
    patches: list[Patch] = []
    for seed in range(mesh.n_quads):
        if region[seed] >= 0:
            continue
        pid = len(patches)
        coords = {seed: _start_coords(mesh, seed)}
        region[seed] = pid
        queue = deque([seed])
        order = [seed]
        while queue:
            q = queue.popleft()
            quad = mesh.quads[q].tolist()
            qc = coords[q]
            for k in range(4):
                e = int(mesh.quad_edges[q, k])
                if e in graph:
                    continue
                nb = [x for x in mesh.edge_quads[e] if x != q]
                if not nb:
                    continue
                r = nb[0]
                expect = _reflect(mesh, quad, qc, k, r)
                if region[r] >= 0:
                    if region[r] != pid or coords[r] != expect:
                        raise NonQuadPatch(f"region {pid} is not a topological rectangle (wraps onto itself)")
                    continue
                region[r] = pid
                coords[r] = expect
                queue.append(r)
                order.append(r)
        patches.append(_patch_from_coords(tm, pid, coords, graph))
    return patches


def _start_coords(mesh, q):
    return {int(v): c for v, c in zip(mesh.quads[q].tolist(), [(0, 0), (1, 0), (1, 1), (0, 1)])}


def _reflect(mesh, quad, qc, k, r):
    """Patch coordinates of the vertices of quad ``r`` across edge ``k`` of ``quad``."""
    p, q = quad[k], quad[(k + 1) % 4]
    a, d = quad[k - 1], quad[(k + 2) % 4]
    cp, cq, ca, cd = qc[p], qc[q], qc[a], qc[d]
    other = mesh.quads[r].tolist()
    out = {p: cp, q: cq}
    for v in other:
        if v in (p, q):
            continue
        # the vertex of r adjacent to p (resp. q) mirrors a (resp. d)
        i = other.index(v)
        adj = (other[i - 1], other[(i + 1) % 4])
        if p in adj:
            out[v] = (2 * cp[0] - ca[0], 2 * cp[1] - ca[1])
        else:
            out[v] = (2 * cq[0] - cd[0], 2 * cq[1] - cd[1])
    return out


def _patch_from_coords(tm: TMesh, pid: int, coords, graph) -> Patch:
    mesh = tm.mesh
    xs = [c[0] for qc in coords.values() for c in qc.values()]
    ys = [c[1] for qc in coords.values() for c in qc.values()]
    x0, y0 = min(xs), min(ys)
    L1, L2 = max(xs) - x0, max(ys) - y0
    if L1 * L2 != len(coords):
        raise NonQuadPatch(f"patch {pid} with {len(coords)} quads is not a {L1}x{L2} rectangle")
    grid = np.full((L1 + 1, L2 + 1), -1, dtype=np.int64)
    cells = set()
    for q, qc in coords.items():
        cx = min(c[0] for c in qc.values()) - x0
        cy = min(c[1] for c in qc.values()) - y0
        if (cx, cy) in cells:
            raise NonQuadPatch(f"patch {pid} covers cell {(cx, cy)} twice")
        cells.add((cx, cy))
        for v, (x, y) in qc.items():
            x, y = x - x0, y - y0
            if grid[x, y] not in (-1, v):
                raise NonQuadPatch(f"patch {pid} maps two vertices to one grid point")
            grid[x, y] = v
    for q, qc in coords.items():
        quad = mesh.quads[q].tolist()
        for k in range(4):
            e = int(mesh.quad_edges[q, k])
            if e not in graph:
                continue
            (xa, ya), (xb, yb) = qc[quad[k]], qc[quad[(k + 1) % 4]]
            xa, xb, ya, yb = xa - x0, xb - x0, ya - y0, yb - y0
            on_side = (ya == yb and ya in (0, L2)) or (xa == xb and xa in (0, L1))
            if not on_side:
                raise NonQuadPatch(f"patch {pid} contains a trace edge in its interior")
    side_vertices = [
        [int(grid[x, 0]) for x in range(L1 + 1)],
        [int(grid[L1, y]) for y in range(L2 + 1)],
        [int(grid[x, L2]) for x in range(L1, -1, -1)],
        [int(grid[0, y]) for y in range(L2, -1, -1)],
    ]
    sides = []
    for verts in side_vertices:
        if not tm.is_node(verts[0]) or not tm.is_node(verts[-1]):
            raise NonQuadPatch(f"patch {pid} has a corner that is not a T-mesh node")
        side: list[tuple[int, bool]] = []
        for a, b in zip(verts[:-1], verts[1:]):
            arc_id, k = tm.edge_arc[mesh.edge_id(a, b)]
            arc = tm.arcs[arc_id]
            forward = arc.path[k] == a
            if not side or side[-1][0] != arc_id:
                side.append((arc_id, forward))
        if sum(tm.arcs[a].length for a, _ in side) != len(verts) - 1:
            raise NonQuadPatch(f"patch {pid} has a side that folds back on an arc")
        sides.append(side)
    return Patch(pid, sides, grid, sorted(coords))


# ----------------------------------------------------------------------
# intersection records


@dataclass(frozen=True)
class IntersectionRecord:
    trace_i: int
    trace_j: int | None
    i: int
    j: int
    n_ij: int
    l_ij: int
    l_ji: int
    S_ij: tuple[int, ...]
    S_ji: tuple[int, ...]
    in_cone_of_i: bool
    in_pi4_cone_of_i: bool
    first_pi4: bool = False


def intersection_records(tmesh: TMesh, alpha: float = math.pi / 4) -> list[IntersectionRecord]:
    """Records for every trace and every node its line shares with another trace.

    Collinear contacts (the head-on partner) are not intersections.  The
    first record along each trace whose origin lies in the pi/4 cone is
    flagged ``first_pi4``.
    """
    mesh = tmesh.mesh
    traces = tmesh.traces
    at_node: dict[int, list[tuple[int, int]]] = {}
    line_edges: dict[int, set[int]] = {}
    for t in traces:
        line = tmesh.lines[t.id]
        line_edges[t.id] = {mesh.edge_id(a, b) for a, b in zip(line[:-1], line[1:])}
        for p, v in enumerate(line):
            if tmesh.is_node(v):
                at_node.setdefault(v, []).append((t.id, p))
    records: list[IntersectionRecord] = []
    for t in traces:
        line = tmesh.lines[t.id]
        alpha_i = 0.0 if t.on_feature else alpha
        mine: list[IntersectionRecord] = []
        for p in range(1, len(line)):
            w = line[p]
            if not tmesh.is_node(w):
                continue
            local = {mesh.edge_id(w, x) for x in (line[p - 1], line[p + 1] if p + 1 < len(line) else None) if x is not None}
            seen_origin = False
            for tj_id, pj in at_node.get(w, []):
                if tj_id == t.id:
                    continue
                tj = traces[tj_id]
                lj = tmesh.lines[tj_id]
                if pj == 0:
                    if seen_origin:
                        continue
                    seen_origin = True
                else:
                    there = {mesh.edge_id(w, lj[pj - 1])}
                    if pj + 1 < len(lj):
                        there.add(mesh.edge_id(w, lj[pj + 1]))
                    if there & local:
                        continue
                S_ij = tuple(tmesh.arcs_along(line[: p + 1]))
                S_ji = tuple(tmesh.arcs_along(lj[: pj + 1])) if pj else ()
                mine.append(
                    IntersectionRecord(
                        t.id, tj_id, t.origin, tj.origin, tmesh.node_id(w), p, pj, S_ij, S_ji,
                        in_cone(pj, p, alpha_i), pj <= p,
                    )
                )
            if not seen_origin and w in tmesh.node_tags and tmesh.node_tags[w] in ("irregular", "corner", "seed"):
                if not any(r.n_ij == tmesh.node_id(w) and r.l_ji == 0 for r in mine):
                    mine.append(
                        IntersectionRecord(
                            t.id, None, t.origin, w, tmesh.node_id(w), p, 0,
                            tuple(tmesh.arcs_along(line[: p + 1])), (), True, True,
                        )
                    )
        mine.sort(key=lambda r: (r.l_ij, r.l_ji, r.trace_j if r.trace_j is not None else -1))
        for k, r in enumerate(mine):
            if r.in_pi4_cone_of_i:
                mine[k] = _flag_first(r)
                break
        records.extend(mine)
    return records


def _flag_first(r: IntersectionRecord) -> IntersectionRecord:
    from dataclasses import replace

    return replace(r, first_pi4=True)


# ----------------------------------------------------------------------
# full quad layout (no stopping rule)


def compute_input_layout_count(mesh: QuadMesh, classes=None) -> int:
    """Patch count of the quad layout obtained by tracing every separatrix to its end."""
    classes = classes if classes is not None else classify_vertices(mesh)
    cut = set(np.flatnonzero(mesh.is_feature_edge).tolist())
    for v in _origins(mesh, classes):
        for n in mesh.neighbors(v):
            if mesh.is_feature(v, n):
                continue
            prev, cur = v, n
            used: set[int] = set()
            while True:
                e = mesh.edge_id(prev, cur)
                if e in used:
                    break
                used.add(e)
                cut.add(e)
                if cur in classes and (classes[cur].irregular or classes[cur].site == "corner"):
                    break
                nxt = mesh.straight_next(prev, cur)
                if nxt is None:
                    break
                prev, cur = cur, nxt
    seen = np.zeros(mesh.n_quads, dtype=bool)
    count = 0
    for s in range(mesh.n_quads):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        stack = [s]
        while stack:
            q = stack.pop()
            for e in mesh.quad_edges[q].tolist():
                if e in cut:
                    continue
                for r in mesh.edge_quads[e]:
                    if not seen[r]:
                        seen[r] = True
                        stack.append(r)
    return count


# ----------------------------------------------------------------------
# debug dump


def format_tmesh(tm: TMesh) -> str:
    out = ["quadcoarse-tmesh v1", "nodes"]
    for i, v in enumerate(tm.node_vertices):
        out.append(f"{i} {v} {tm.node_tags[v]}")
    out.append("arcs")
    for a in tm.arcs:
        out.append(
            f"{a.id} {tm.node_id(a.start)} {tm.node_id(a.end)} {a.length} {int(a.on_feature)} "
            + " ".join(str(v) for v in a.path)
        )
    out.append("patches")
    for p in tm.patches:
        sides = " | ".join(" ".join(f"{a}{'+' if fw else '-'}" for a, fw in s) for s in p.sides)
        out.append(f"{p.id} {p.size[0]} {p.size[1]} : {sides}")
    return "\n".join(out) + "\n"
