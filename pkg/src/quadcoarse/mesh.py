"""Quad mesh container, file formats and vertex classification."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, NonManifold, NonQuad, ParseError

NATIVE_HEADER = "quadcoarse-mesh v1"
FEATURE_ANGLE = math.radians(45.0)


@dataclass(frozen=True)
class VertexClass:
    kind: str  # "regular" | "irregular"
    site: str  # "interior" | "on-curve" | "corner"
    valence: int

    @property
    def irregular(self) -> bool:
        return self.kind == "irregular"


class QuadMesh:
    """Manifold, consistently oriented quadrilateral surface mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
        Vertex positions. 2D input is padded with ``z = 0``.
    quads : array_like, shape (m, 4)
        Vertex indices of each quad, counter-clockwise.
    feature_edges : dict, optional
        Maps an edge, given as a vertex pair, to an integer curve id.
        Boundary edges missing from the map are tagged implicitly, one
        fresh curve id per untagged boundary chain.
    corners : dict, optional
        Maps a vertex index to its nominal valence.

    The mesh is immutable after construction; all derived topology is
    computed once.
    """

    def __init__(self, vertices, quads, feature_edges=None, corners=None):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] not in (2, 3):
            raise ParseError("vertices must have shape (n, 2) or (n, 3)")
        if verts.shape[1] == 2:
            verts = np.column_stack([verts, np.zeros(len(verts))])
        faces = np.asarray(quads, dtype=np.int64).reshape(-1, 4) if len(quads) else np.zeros((0, 4), np.int64)
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise ParseError("quad references a vertex index out of range")
        self.vertices = verts.copy()
        self.quads = faces.copy()
        self.vertices.flags.writeable = False
        self.quads.flags.writeable = False
        self._build_topology()
        self._build_fans()
        self.corners = {int(v): int(k) for v, k in sorted((corners or {}).items())}
        self._assign_features(feature_edges or {})
        self._check_tags()

    # ------------------------------------------------------------------
    # construction helpers

    def _build_topology(self):
        edge_index: dict[tuple[int, int], int] = {}
        edges = []
        edge_quads: list[list[int]] = []
        halfedges: dict[tuple[int, int], int] = {}
        quad_edges = np.zeros((len(self.quads), 4), dtype=np.int64)
        for qi, quad in enumerate(self.quads.tolist()):
            if len(set(quad)) != 4:
                raise NonQuad(f"quad {qi} does not reference 4 distinct vertices: {quad}")
            for k in range(4):
                a, b = quad[k], quad[(k + 1) % 4]
                if (a, b) in halfedges:
                    raise NonManifold(
                        f"halfedge ({a}, {b}) used twice: inconsistent orientation or non-manifold edge"
                    )
                halfedges[(a, b)] = qi
                key = (a, b) if a < b else (b, a)
                eid = edge_index.get(key)
                if eid is None:
                    eid = len(edges)
                    edge_index[key] = eid
                    edges.append(key)
                    edge_quads.append([])
                edge_quads[eid].append(qi)
                if len(edge_quads[eid]) > 2:
                    raise NonManifold(f"edge {key} borders more than two quads")
                quad_edges[qi, k] = eid
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_index = edge_index
        self.edge_quads = [tuple(q) for q in edge_quads]
        self.quad_edges = quad_edges
        self.halfedge_quad = halfedges
        self.is_boundary_edge = np.array([len(q) == 1 for q in edge_quads], dtype=bool)

    def _build_fans(self):
        links: list[dict[int, tuple[int, int]]] = [dict() for _ in range(len(self.vertices))]
        for qi, quad in enumerate(self.quads.tolist()):
            for k in range(4):
                v, nxt, prv = quad[k], quad[(k + 1) % 4], quad[k - 1]
                links[v][nxt] = (prv, qi)
        self._fan_nbrs: list[tuple[int, ...]] = []
        self._fan_quads: list[tuple[int, ...]] = []
        self._fan_closed = np.zeros(len(self.vertices), dtype=bool)
        for v, link in enumerate(links):
            if not link:
                self._fan_nbrs.append(())
                self._fan_quads.append(())
                continue
            prvs = {p for p, _ in link.values()}
            starts = [n for n in link if n not in prvs]
            if len(starts) > 1:
                raise NonManifold(f"vertex {v} has a non-manifold neighbourhood")
            closed = not starts
            start = starts[0] if starts else min(link)
            nbrs, fq = [start], []
            n = start
            while n in link:
                p, q = link[n]
                fq.append(q)
                n = p
                if n == start:
                    break
                nbrs.append(n)
            if len(fq) != len(link):
                raise NonManifold(f"vertex {v} has a non-manifold neighbourhood")
            self._fan_nbrs.append(tuple(nbrs))
            self._fan_quads.append(tuple(fq))
            self._fan_closed[v] = closed

    def _assign_features(self, tags):
        feature: dict[int, int] = {}
        for pair, cid in tags.items():
            a, b = int(pair[0]), int(pair[1])
            key = (a, b) if a < b else (b, a)
            if key not in self.edge_index:
                raise ParseError(f"feature edge {key} is not an edge of the mesh")
            feature[self.edge_index[key]] = int(cid)
        next_id = max(feature.values(), default=-1) + 1
        untagged = [e for e in np.flatnonzero(self.is_boundary_edge) if int(e) not in feature]
        for chain in _edge_components(self.edges, untagged):
            for e in chain:
                feature[e] = next_id
            next_id += 1
        self.feature_edges = dict(sorted(feature.items()))
        self.is_feature_edge = np.zeros(len(self.edges), dtype=bool)
        self.is_feature_edge[list(self.feature_edges)] = True
        on_curve = np.zeros(len(self.vertices), dtype=bool)
        if self.feature_edges:
            on_curve[self.edges[self.is_feature_edge].ravel()] = True
        self.on_curve = on_curve

    def _check_tags(self):
        for v, nominal in self.corners.items():
            if not 0 <= v < len(self.vertices):
                raise ParseError(f"corner {v} out of range")
            if nominal < 1:
                raise ParseError(f"corner {v} has non-positive nominal valence {nominal}")
            if not self.on_curve[v]:
                raise ParseError(f"corner {v} is neither on a feature edge nor on the boundary")
        per_curve: dict[int, dict[int, int]] = {}
        for e, cid in self.feature_edges.items():
            deg = per_curve.setdefault(cid, {})
            for v in self.edges[e]:
                deg[int(v)] = deg.get(int(v), 0) + 1
        for cid, deg in per_curve.items():
            if max(deg.values()) > 2:
                raise ParseError(f"feature curve {cid} is not a simple chain")

    # ------------------------------------------------------------------
    # queries

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    def neighbors(self, v: int) -> tuple[int, ...]:
        """Neighbouring vertices of ``v`` in counter-clockwise order."""
        return self._fan_nbrs[v]

    def fan_quads(self, v: int) -> tuple[int, ...]:
        """Quads around ``v``; quad ``k`` lies between neighbours ``k`` and ``k + 1``."""
        return self._fan_quads[v]

    def is_interior_vertex(self, v: int) -> bool:
        return bool(self._fan_closed[v])

    def valence(self, v: int) -> int:
        return len(self._fan_quads[v])

    def edge_id(self, a: int, b: int) -> int:
        return self.edge_index[(a, b) if a < b else (b, a)]

    def has_edge(self, a: int, b: int) -> bool:
        return ((a, b) if a < b else (b, a)) in self.edge_index

    def is_feature(self, a: int, b: int) -> bool:
        return bool(self.is_feature_edge[self.edge_id(a, b)])

    def curve_of(self, a: int, b: int) -> int | None:
        return self.feature_edges.get(self.edge_id(a, b))

    def boundary_edge_count(self) -> int:
        return int(self.is_boundary_edge.sum())

    def straight_next(self, prev: int, v: int) -> int | None:
        """Vertex reached by continuing straight from ``prev`` through ``v``.

        Only defined at vertices with a closed fan of four quads.
        """
        nbrs = self._fan_nbrs[v]
        if not self._fan_closed[v] or len(nbrs) != 4:
            return None
        k = nbrs.index(prev)
        return nbrs[(k + 2) % 4]

    def sectors(self, v: int) -> list[int]:
        """Quad counts of the sectors into which feature edges cut the fan of ``v``."""
        nbrs = self._fan_nbrs[v]
        nq = len(self._fan_quads[v])
        cuts = [k for k, n in enumerate(nbrs) if self.is_feature(v, n)]
        if not self._fan_closed[v]:
            inner = [k for k in cuts if 0 < k < len(nbrs) - 1]
            bounds = [0] + inner + [len(nbrs) - 1]
            return [b - a for a, b in zip(bounds[:-1], bounds[1:])]
        if not cuts:
            return [nq]
        return [((cuts[(i + 1) % len(cuts)] - c) % nq) or nq for i, c in enumerate(cuts)]

    def quad_normals(self) -> np.ndarray:
        p = self.vertices[self.quads]
        n = np.zeros((len(self.quads), 3))
        for k in range(4):
            n += np.cross(p[:, k], p[:, (k + 1) % 4])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    def corner_angle(self, v: int, q: int) -> float:
        quad = self.quads[q].tolist()
        k = quad.index(v)
        p = self.vertices[v]
        a = self.vertices[quad[(k + 1) % 4]] - p
        b = self.vertices[quad[k - 1]] - p
        c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        return math.acos(max(-1.0, min(1.0, c)))

    def mean_edge_length(self) -> float:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean()) if len(d) else 0.0

    def with_quads_permuted(self, order) -> "QuadMesh":
        order = list(order)
        tags = {tuple(self.edges[e]): c for e, c in self.feature_edges.items()}
        return QuadMesh(self.vertices, self.quads[order], tags, self.corners)

    def __repr__(self):
        return (
            f"QuadMesh(vertices={self.n_vertices}, quads={self.n_quads}, "
            f"feature_edges={len(self.feature_edges)}, corners={len(self.corners)})"
        )


def _edge_components(edges: np.ndarray, subset) -> list[list[int]]:
    """Connected components (through shared vertices) of a set of edges."""
    by_vertex: dict[int, list[int]] = {}
    for e in subset:
        for v in edges[e]:
            by_vertex.setdefault(int(v), []).append(int(e))
    seen: set[int] = set()
    comps = []
    for e in sorted(int(x) for x in subset):
        if e in seen:
            continue
        stack, comp = [e], []
        seen.add(e)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for v in edges[cur]:
                for f in by_vertex[int(v)]:
                    if f not in seen:
                        seen.add(f)
                        stack.append(f)
        comps.append(sorted(comp))
    return comps


# ----------------------------------------------------------------------
# classification


def classify_vertices(mesh: QuadMesh) -> dict[int, VertexClass]:
    """Regular/irregular classification of every vertex that has quads."""
    out = {}
    for v in range(mesh.n_vertices):
        val = mesh.valence(v)
        if val == 0:
            continue
        if v in mesh.corners:
            site = "corner"
            irregular = val != mesh.corners[v]
        elif mesh.on_curve[v]:
            site = "on-curve"
            irregular = any(s != 2 for s in mesh.sectors(v))
        else:
            site = "interior"
            irregular = val != 4
        out[v] = VertexClass("irregular" if irregular else "regular", site, val)
    return out


def irregular_vertices(classes: dict[int, VertexClass]) -> list[int]:
    return sorted(v for v, c in classes.items() if c.irregular)


# ----------------------------------------------------------------------
# feature detection


def detect_features(vertices, quads) -> tuple[dict, dict]:
    """Dihedral-angle feature edges and turning-angle corners.

    Returns ``(feature_edges, corners)`` suitable for the ``QuadMesh``
    constructor.  Boundary edges are feature edges, one curve id per loop.
    """
    bare = QuadMesh(vertices, quads)
    normals = bare.quad_normals()
    sharp = []
    for e, qs in enumerate(bare.edge_quads):
        if len(qs) == 2:
            c = float(np.clip(np.dot(normals[qs[0]], normals[qs[1]]), -1.0, 1.0))
            if math.acos(c) > FEATURE_ANGLE:
                sharp.append(e)
    tags = {}
    for cid, chain in enumerate(_edge_components(bare.edges, sharp)):
        for e in chain:
            tags[tuple(int(x) for x in bare.edges[e])] = cid
    tagged = QuadMesh(vertices, quads, tags)

    fdeg: dict[int, list[int]] = {}
    for e in tagged.feature_edges:
        a, b = (int(x) for x in tagged.edges[e])
        fdeg.setdefault(a, []).append(b)
        fdeg.setdefault(b, []).append(a)
    corners = {}
    for v, nb in sorted(fdeg.items()):
        is_corner = len(nb) != 2
        if not is_corner:
            p = tagged.vertices[v]
            d0 = p - tagged.vertices[nb[0]]
            d1 = tagged.vertices[nb[1]] - p
            c = float(np.dot(d0, d1) / (np.linalg.norm(d0) * np.linalg.norm(d1)))
            is_corner = math.acos(max(-1.0, min(1.0, c))) > FEATURE_ANGLE
        if is_corner:
            corners[v] = nominal_valence(tagged, v)
    return tags, corners


def nominal_valence(mesh: QuadMesh, v: int) -> int:
    """Expected quad count at a corner: rounded sector angle over 90 degrees."""
    nbrs = mesh.neighbors(v)
    fq = mesh.fan_quads(v)
    total, sector = 0, 0.0
    for k, q in enumerate(fq):
        sector += mesh.corner_angle(v, q)
        nxt = nbrs[(k + 1) % len(nbrs)]
        if mesh.is_feature(v, nxt) or k == len(fq) - 1:
            total += max(1, int(round(sector / (math.pi / 2))))
            sector = 0.0
    return max(1, total)


# ----------------------------------------------------------------------
# file formats

_SECTIONS = ("vertices", "quads", "feature_edges", "corners")


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_sections(lines, path, require_header):
    sections: dict[str, list[list[str]]] = {}
    current = None
    seen_header = False
    for lineno, raw in enumerate(lines, 1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("quadcoarse-mesh"):
            if line != NATIVE_HEADER:
                raise ParseError(f"{path}:{lineno}: unsupported header {line!r}")
            seen_header = True
            continue
        if line in _SECTIONS:
            current = line
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError(f"{path}:{lineno}: data outside of a section")
        sections[current].append(line.split())
    if require_header and not seen_header:
        raise ParseError(f"{path}: missing '{NATIVE_HEADER}' header")
    return sections


def _tags_from_sections(sections, path):
    feature, corners = {}, {}
    try:
        for row in sections.get("feature_edges", []):
            if len(row) != 3:
                raise ValueError(row)
            feature[(int(row[0]), int(row[1]))] = int(row[2])
        for row in sections.get("corners", []):
            if len(row) != 2:
                raise ValueError(row)
            corners[int(row[0])] = int(row[1])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed tag row {exc}") from None
    return feature, corners


def read_native(path) -> QuadMesh:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from None
    sec = _parse_sections(lines, path, require_header=True)
    verts = []
    try:
        for expect, row in enumerate(sec.get("vertices", [])):
            if len(row) != 4 or int(row[0]) != expect:
                raise ValueError(row)
            verts.append([float(x) for x in row[1:]])
        quads = []
        for row in sec.get("quads", []):
            if len(row) != 4:
                raise NonQuad(f"{path}: face with {len(row)} vertices")
            quads.append([int(x) for x in row])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed row {exc}") from None
    if "feature_edges" in sec or "corners" in sec:
        feature, corners = _tags_from_sections(sec, path)
        return QuadMesh(np.array(verts).reshape(-1, 3), quads, feature, corners)
    return _with_detected_features(np.array(verts).reshape(-1, 3), quads)


def read_obj(path, sidecar=None) -> QuadMesh:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from None
    verts, quads = [], []
    for lineno, raw in enumerate(lines, 1):
        line = _strip(raw)
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "v":
                xyz = [float(x) for x in rest[:3]]
                if len(xyz) < 2:
                    raise ValueError(rest)
                verts.append(xyz + [0.0] * (3 - len(xyz)))
            elif head == "f":
                idx = []
                for tok in rest:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) != 4:
                    raise NonQuad(f"{path}:{lineno}: face with {len(idx)} vertices")
                quads.append(idx)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed line {raw!r}") from None
    verts = np.array(verts, dtype=float).reshape(-1, 3)
    if sidecar is not None:
        try:
            slines = Path(sidecar).read_text().splitlines()
        except OSError as exc:
            raise IoError(str(exc)) from None
        sec = _parse_sections(slines, sidecar, require_header=False)
        feature, corners = _tags_from_sections(sec, sidecar)
        return QuadMesh(verts, quads, feature, corners)
    return _with_detected_features(verts, quads)


def _with_detected_features(verts, quads) -> QuadMesh:
    feature, corners = detect_features(verts, quads)
    return QuadMesh(verts, quads, feature, corners)


def load_mesh(path, format: str | None = None, sidecar=None) -> QuadMesh:
    """Read a quad mesh from ``path``.

    ``format`` is ``"native"`` or ``"obj"``; inferred from the suffix when
    omitted.  Feature tags come from the native sections, from the OBJ
    sidecar, or from dihedral-angle detection when neither is present.
    """
    fmt = (format or _infer_format(path)).lower()
    if fmt == "native":
        return read_native(path)
    if fmt == "obj":
        return read_obj(path, sidecar)
    raise ParseError(f"unknown mesh format {format!r}")


def _infer_format(path) -> str:
    return "obj" if str(path).lower().endswith(".obj") else "native"


def format_native(mesh: QuadMesh) -> str:
    out = [NATIVE_HEADER, "vertices"]
    for i, (x, y, z) in enumerate(mesh.vertices.tolist()):
        out.append(f"{i} {x!r} {y!r} {z!r}")
    out.append("quads")
    out.extend(" ".join(str(v) for v in q) for q in mesh.quads.tolist())
    out.append("feature_edges")
    for e, cid in mesh.feature_edges.items():
        a, b = mesh.edges[e]
        out.append(f"{a} {b} {cid}")
    out.append("corners")
    out.extend(f"{v} {k}" for v, k in mesh.corners.items())
    return "\n".join(out) + "\n"


def save_mesh(mesh: QuadMesh, path) -> None:
    try:
        Path(path).write_text(format_native(mesh))
    except OSError as exc:
        raise IoError(str(exc)) from None


def write_obj(path, vertices, quads) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices, dtype=float).tolist()]
    lines += ["f " + " ".join(str(int(i) + 1) for i in q) for q in np.asarray(quads).tolist()]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from None


_SPEC_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_call(spec: str) -> tuple[str, list[str]]:
    """Split ``"name(a, b)"`` into ``("name", ["a", "b"])``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(spec)
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    return m.group(1), args
