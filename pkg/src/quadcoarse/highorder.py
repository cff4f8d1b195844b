"""Order-N Lagrange quadrilaterals on top of a block-structured mesh.

Every layout quad becomes one element with an ``(N+1) x (N+1)`` node
lattice.  Layout vertices, edge nodes and interior nodes are shared
between elements, so the node count of a connected mesh is
``V + E (N-1) + F (N-1)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEdge, IoError, ParseError
from .extraction import BlockStructuredMesh

HO_HEADER = "quadcoarse-ho v1"
SPACINGS = ("eq", "gl")


def legendre(n: int, x):
    """``(P_n(x), P_{n-1}(x))`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    return p1, p0


def gauss_lobatto(n: int, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """The ``n + 1`` Gauss-Lobatto points on ``[-1, 1]``, ascending.

    Interior points are roots of ``g = (1 - x^2) P_n'(x)``.  Since
    ``g' = -n (n + 1) P_n`` by Legendre's equation, Newton reads
    ``x <- x + g / (n (n + 1) P_n)``.  Chebyshev-Lobatto points start it.
    """
    if n < 1:
        raise ValueError("order must be >= 1")
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    inner = x[1:-1].copy()
    for _ in range(max_iter):
        if len(inner) == 0:
            break
        p, pm = legendre(n, inner)
        # (1 - x^2) P_n' = n (P_{n-1} - x P_n)
        g = n * (pm - inner * p)
        step = g / (n * (n + 1) * p)
        inner = inner + step
        if np.max(np.abs(step)) < tol:
            break
    x[1:-1] = inner
    x[0], x[-1] = -1.0, 1.0
    # symmetrize to cancel round-off
    return (x - x[::-1]) / 2.0


def spacing_parameters(n: int, spacing: str = "eq") -> np.ndarray:
    """Node parameters in ``[0, 1]`` for an edge of order ``n``."""
    if spacing == "eq":
        return np.arange(n + 1) / n
    if spacing == "gl":
        return (gauss_lobatto(n) + 1.0) / 2.0
    raise ValueError(f"unknown spacing {spacing!r}")


def sample_polyline(points: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Points at arc-length fractions ``params`` along a polyline."""
    points = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        raise DegenerateEdge("edge polyline has zero length")
    t = np.asarray(params) * s[-1]
    return np.column_stack([np.interp(t, s, points[:, d]) for d in range(points.shape[1])])


@dataclass
class HighOrderMesh:
    """Shared nodes plus per-element lattices.

    ``elements[k]`` lists ``(N+1)^2`` node ids, ``u`` fastest: slot
    ``j * (N + 1) + i`` holds lattice point ``(i, j)``, with ``u`` running
    from layout corner 0 to 1 and ``v`` from corner 0 to 3.
    """

    order: int
    spacing: str
    nodes: np.ndarray
    elements: np.ndarray
    representation: str = "lagrange"

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def lattice(self, k: int) -> np.ndarray:
        """Element ``k`` as an ``(N+1, N+1)`` array indexed ``[i, j]``."""
        n1 = self.order + 1
        return self.elements[k].reshape(n1, n1).T


def _edge_polylines(bsm: BlockStructuredMesh) -> list[list[int]]:
    """Fine-vertex polyline of every layout edge, from lower to higher id."""
    layout = bsm.layout
    index = layout.edge_index()
    out: list[list[int] | None] = [None] * len(layout.edges)
    for quad, grid in zip(layout.quads.tolist(), bsm.blocks):
        W, H = grid.shape[0] - 1, grid.shape[1] - 1
        c0, c1, c2, c3 = quad
        for a, b, ids in (
            (c0, c1, grid[:, 0]),
            (c1, c2, grid[W, :]),
            (c3, c2, grid[:, H]),
            (c0, c3, grid[0, :]),
        ):
            e = index[(min(a, b), max(a, b))]
            if out[e] is None:
                ids = ids.tolist()
                out[e] = ids if a < b else ids[::-1]
    return out


def _coons(bottom, top, left, right, s, t) -> np.ndarray:
    """Coons patch through four sides sampled at parameters ``s`` and ``t``."""
    S = s[:, None, None]
    T = t[None, :, None]
    B = bottom[:, None, :]
    Tp = top[:, None, :]
    L = left[None, :, :]
    R = right[None, :, :]
    p00, p10, p11, p01 = bottom[0], bottom[-1], top[-1], top[0]
    return (
        (1 - T) * B + T * Tp + (1 - S) * L + S * R
        - ((1 - S) * (1 - T) * p00 + S * (1 - T) * p10 + S * T * p11 + (1 - S) * T * p01)
    )


def build_high_order(
    bsm: BlockStructuredMesh,
    order: int = 5,
    spacing: str = "eq",
    proxy=None,
    positions: np.ndarray | None = None,
) -> HighOrderMesh:
    """Order-``order`` elements over the layout of ``bsm``.

    ``positions`` overrides the fine vertex coordinates (the smoothed
    ones).  Edge nodes are resampled along the fine edge polyline and
    projected to the curve (feature edges) or the surface; interior nodes
    come from the Coons patch of the four node sides and are projected to
    the surface.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    layout = bsm.layout
    X = np.asarray(bsm.mesh.vertices if positions is None else positions, dtype=float)
    N = order
    t = spacing_parameters(N, spacing)
    nodes: list[np.ndarray] = [X[np.arange(layout.n_vertices)]]
    next_id = layout.n_vertices
    edge_ids: list[np.ndarray] = []
    for e, poly in enumerate(_edge_polylines(bsm)):
        a, b = layout.edges[e]
        pts = sample_polyline(X[poly], t)[1:-1]
        if N > 1 and proxy is not None:
            cid = layout.edge_curve[e]
            pts = proxy.project(pts) if cid is None else proxy.project_curve(pts, cid)
        ids = np.arange(next_id, next_id + N - 1)
        next_id += N - 1
        nodes.append(pts)
        edge_ids.append(np.concatenate([[a], ids, [b]]))
    index = layout.edge_index()
    P = np.concatenate(nodes) if nodes else np.zeros((0, 3))

    def side(a, b):
        ids = edge_ids[index[(min(a, b), max(a, b))]]
        return ids if a < b else ids[::-1]

    elements = []
    interior = []
    for quad in layout.quads.tolist():
        c0, c1, c2, c3 = quad
        lat = np.full((N + 1, N + 1), -1, dtype=np.int64)
        lat[:, 0] = side(c0, c1)
        lat[N, :] = side(c1, c2)
        lat[:, N] = side(c3, c2)
        lat[0, :] = side(c0, c3)
        if N > 1:
            coons = _coons(P[lat[:, 0]], P[lat[:, N]], P[lat[0, :]], P[lat[N, :]], t, t)
            pts = coons[1:-1, 1:-1].transpose(1, 0, 2).reshape(-1, 3)
            ids = np.arange(next_id, next_id + len(pts))
            next_id += len(pts)
            lat[1:-1, 1:-1] = ids.reshape(N - 1, N - 1).T
            interior.append(pts)
        elements.append(lat.T.ravel())
    if interior:
        inner = np.concatenate(interior)
        if proxy is not None:
            inner = proxy.project(inner)
        P = np.concatenate([P, inner])
    elems = np.array(elements, dtype=np.int64).reshape(-1, (N + 1) ** 2)
    return HighOrderMesh(N, spacing, P, elems)


# ----------------------------------------------------------------------
# io


def format_high_order(ho: HighOrderMesh) -> str:
    lines = [
        HO_HEADER,
        f"order {ho.order}",
        f"spacing {ho.spacing}",
        f"representation {ho.representation}",
        f"nodes {ho.n_nodes}",
    ]
    for i, p in enumerate(ho.nodes):
        lines.append(f"{i} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    lines.append(f"elements {ho.n_elements}")
    for row in ho.elements.tolist():
        lines.append(" ".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def export_high_order(ho: HighOrderMesh, path, format: str = "native") -> None:
    if format == "obj":
        if ho.order != 1:
            raise IoError("OBJ export is only defined for order 1")
        n1 = 2
        quads = [[row[0], row[1], row[n1 + 1], row[n1]] for row in ho.elements.tolist()]
        from .mesh import write_obj

        try:
            write_obj(path, ho.nodes, np.array(quads, dtype=np.int64))
        except OSError as exc:
            raise IoError(str(exc)) from exc
        return
    if format != "native":
        raise IoError(f"unknown high-order format {format!r}")
    try:
        with open(path, "w") as fh:
            fh.write(format_high_order(ho))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def parse_high_order(text: str, path="<string>") -> HighOrderMesh:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != HO_HEADER:
        raise ParseError(f"{path}: missing '{HO_HEADER}' header")
    it = iter(lines[1:])
    try:
        fields = {}
        for key in ("order", "spacing", "representation", "nodes"):
            k, v = next(it).split()
            if k != key:
                raise ParseError(f"{path}: expected '{key}', got '{k}'")
            fields[key] = v
        order = int(fields["order"])
        n_nodes = int(fields["nodes"])
        nodes = np.zeros((n_nodes, 3))
        for i in range(n_nodes):
            parts = next(it).split()
            if int(parts[0]) != i or len(parts) != 4:
                raise ParseError(f"{path}: bad node line {i}")
            nodes[i] = [float(x) for x in parts[1:]]
        k, v = next(it).split()
        if k != "elements":
            raise ParseError(f"{path}: expected 'elements'")
        n_el = int(v)
        width = (order + 1) ** 2
        elements = np.zeros((n_el, width), dtype=np.int64)
        for r in range(n_el):
            row = [int(x) for x in next(it).split()]
            if len(row) != width:
                raise ParseError(f"{path}: element {r} has {len(row)} nodes, expected {width}")
            elements[r] = row
    except StopIteration:
        raise ParseError(f"{path}: truncated file") from None
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return HighOrderMesh(order, fields["spacing"], nodes, elements, fields["representation"])


def import_high_order(path) -> HighOrderMesh:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return parse_high_order(text, path)
