"""Winslow smoothing of block-structured quad meshes and element quality.

Regular interior vertices take the Winslow (inverse Laplace) update from
their 3x3 stencil; interior irregular vertices take the uniform Laplacian;
curve vertices move to the midpoint of their two curve neighbours and are
projected back onto the curve; corners and curve junctions never move.
Updates are Jacobi sweeps with under-relaxation, followed by projection
onto the input surface.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .mesh import QuadMesh


@dataclass
class SmoothingReport:
    iterations: int
    converged: bool
    max_displacement: float
    tolerance: float


def _stencils(mesh: QuadMesh):
    """Vertex groups and index arrays for the vectorized updates."""
    n = mesh.n_vertices
    feat_nbrs: list[list[int]] = [[] for _ in range(n)]
    for e, cid in mesh.feature_edges.items():
        a, b = (int(x) for x in mesh.edges[e])
        feat_nbrs[a].append(b)
        feat_nbrs[b].append(a)
    winslow, lap, lap_nbrs, curve, curve_nbrs, curve_ids, fixed = [], [], [], [], [], [], []
    for v in range(n):
        if mesh.valence(v) == 0:
            continue
        if v in mesh.corners:
            fixed.append(v)
            continue
        fn = feat_nbrs[v]
        if fn:
            cids = {mesh.curve_of(v, x) for x in fn}
            if len(fn) == 2 and len(cids) == 1:
                curve.append(v)
                curve_nbrs.append(fn)
                curve_ids.append(cids.pop())
            else:
                fixed.append(v)
            continue
        if not mesh.is_interior_vertex(v):
            fixed.append(v)
            continue
        if mesh.valence(v) == 4:
            winslow.append(v)
        else:
            lap.append(v)
            lap_nbrs.append(list(mesh.neighbors(v)))
    W = np.zeros((len(winslow), 8), dtype=np.int64)
    quads = mesh.quads
    for r, v in enumerate(winslow):
        nb = mesh.neighbors(v)
        fq = mesh.fan_quads(v)
        diag = []
        for f in fq:
            quad = quads[f].tolist()
            diag.append(quad[(quad.index(v) + 2) % 4])
        # E, N, W, S, NE, NW, SW, SE
        W[r] = [nb[0], nb[1], nb[2], nb[3], diag[0], diag[1], diag[2], diag[3]]
    width = max((len(x) for x in lap_nbrs), default=0)
    L = np.full((len(lap), max(width, 1)), -1, dtype=np.int64)
    for r, nb in enumerate(lap_nbrs):
        L[r, : len(nb)] = nb
    return (
        np.array(winslow, dtype=np.int64),
        W,
        np.array(lap, dtype=np.int64),
        L,
        np.array(curve, dtype=np.int64),
        np.array(curve_nbrs, dtype=np.int64).reshape(-1, 2),
        np.array(curve_ids, dtype=np.int64),
        np.array(fixed, dtype=np.int64),
    )


def winslow_targets(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    E, N, Wv, S = X[W[:, 0]], X[W[:, 1]], X[W[:, 2]], X[W[:, 3]]
    NE, NW, SW, SE = X[W[:, 4]], X[W[:, 5]], X[W[:, 6]], X[W[:, 7]]
    x_xi = (E - Wv) / 2.0
    x_eta = (N - S) / 2.0
    alpha = np.einsum("ij,ij->i", x_eta, x_eta)[:, None]
    beta = np.einsum("ij,ij->i", x_xi, x_eta)[:, None]
    gamma = np.einsum("ij,ij->i", x_xi, x_xi)[:, None]
    x_xieta = (NE - NW - SE + SW) / 4.0
    denom = 2.0 * (alpha + gamma)
    target = (alpha * (E + Wv) + gamma * (N + S) - 2.0 * beta * x_xieta) / np.where(denom > 0, denom, 1.0)
    centroid = (E + Wv + N + S) / 4.0
    return np.where(denom > 0, target, centroid)


def layout_diameter(quads: np.ndarray, n: int) -> int:
    """Graph diameter of the layout's vertex-edge graph."""
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for quad in np.asarray(quads).tolist():
        for i in range(4):
            a, b = quad[i], quad[(i + 1) % 4]
            nbrs[a].add(b)
            nbrs[b].add(a)
    best = 0
    for s in range(n):
        if not nbrs[s]:
            continue
        dist = {s: 0}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in nbrs[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        best = max(best, max(dist.values()))
    return best


def winslow_smooth(
    mesh: QuadMesh,
    proxy=None,
    relaxation: float = 0.7,
    tol: float | None = None,
    max_iters: int | None = None,
    diameter: int | None = None,
):
    """Smooth ``mesh`` in place-free fashion; returns ``(positions, report)``.

    ``tol`` defaults to 1e-3 of the mean edge length and ``max_iters`` to
    100 times ``diameter`` (the coarse layout diameter when given, else
    the fine mesh's own quad count bound).
    """
    X = np.array(mesh.vertices, dtype=float)
    tol = 1e-3 * mesh.mean_edge_length() if tol is None else tol
    if max_iters is None:
        max_iters = 100 * max(1, diameter if diameter is not None else int(np.sqrt(mesh.n_quads)) + 1)
    win, Wst, lap, Lst, cur, Cst, cids, _ = _stencils(mesh)
    mask = Lst >= 0
    counts = np.maximum(mask.sum(axis=1, keepdims=True), 1)
    surf = np.concatenate([win, lap])
    by_curve = {int(c): np.flatnonzero(cids == c) for c in np.unique(cids)}
    disp = 0.0
    it = 0
    converged = False
    for it in range(1, max_iters + 1):
        Y = X.copy()
        if len(win):
            Y[win] = X[win] + relaxation * (winslow_targets(X, Wst) - X[win])
        if len(lap):
            g = X[np.where(mask, Lst, 0)] * mask[..., None]
            Y[lap] = X[lap] + relaxation * (g.sum(axis=1) / counts - X[lap])
        if len(cur):
            mid = (X[Cst[:, 0]] + X[Cst[:, 1]]) / 2.0
            Y[cur] = X[cur] + relaxation * (mid - X[cur])
        if proxy is not None:
            if len(surf):
                Y[surf] = proxy.project(Y[surf], fast=True)
            for c, rows in by_curve.items():
                Y[cur[rows]] = proxy.project_curve(Y[cur[rows]], c)
        disp = float(np.max(np.linalg.norm(Y - X, axis=1))) if len(X) else 0.0
        X = Y
        if disp < tol:
            converged = True
            break
    if proxy is not None and len(surf):
        X[surf] = proxy.project(X[surf])
    return X, SmoothingReport(it, converged, disp, tol)


# ----------------------------------------------------------------------
# quality


def scaled_jacobians(vertices: np.ndarray, quads: np.ndarray, normals: np.ndarray | None = None) -> np.ndarray:
    """Minimum corner scaled Jacobian of every quad, signed by ``normals``.

    Without reference normals the Newell normal of each quad is used, which
    makes the sign meaningless for inverted elements on planar input; pass
    surface normals to detect inversion.
    """
    V = np.asarray(vertices, dtype=float)
    Q = np.asarray(quads, dtype=np.int64)
    P = V[Q]
    if normals is None:
        nxt = np.roll(P, -1, axis=1)
        normals = np.cross(P, nxt).sum(axis=1)
    nrm = normals / np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-300)
    out = np.full(len(Q), np.inf)
    for i in range(4):
        e1 = P[:, (i + 1) % 4] - P[:, i]
        e2 = P[:, (i - 1) % 4] - P[:, i]
        c = np.einsum("ij,ij->i", np.cross(e1, e2), nrm)
        ln = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        sj = np.where(ln > 0, c / np.where(ln > 0, ln, 1.0), -1.0)
        out = np.minimum(out, sj)
    return out


@dataclass
class QualityReport:
    n_quads: int
    min_sj: float
    mean_sj: float
    inverted: int
    histogram: list[tuple[float, float, int]]

    def table(self) -> str:
        lines = [
            "scaled Jacobian",
            f"  quads     {self.n_quads}",
            f"  min       {self.min_sj:.4f}",
            f"  mean      {self.mean_sj:.4f}",
            f"  inverted  {self.inverted}",
            "  range            count",
        ]
        for lo, hi, c in self.histogram:
            lines.append(f"  [{lo:+.1f}, {hi:+.1f})  {c:6d}")
        return "\n".join(lines)


def quality(vertices, quads, normals=None) -> QualityReport:
    sj = scaled_jacobians(vertices, quads, normals)
    edges = np.linspace(-1.0, 1.0, 11)
    counts, _ = np.histogram(np.clip(sj, -1.0, 1.0), bins=edges)
    hist = [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(10)]
    return QualityReport(len(sj), float(sj.min()) if len(sj) else 1.0, float(sj.mean()) if len(sj) else 1.0, int((sj <= 0).sum()), hist)


def reference_normals(vertices, quads, proxy=None) -> np.ndarray | None:
    """Surface normals at quad centroids from the proxy, if available."""
    if proxy is None:
        return None
    V = np.asarray(vertices, dtype=float)
    return proxy.normals(V[np.asarray(quads)].mean(axis=1))
