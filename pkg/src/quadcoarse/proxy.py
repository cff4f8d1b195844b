"""Piecewise-linear geometry of the input mesh used for projection.

The surface is the input quad mesh split into triangles; each feature curve
is the polyline of its feature edges.  Closest points are exact for the
piecewise-linear geometry; a KD-tree over triangle (segment) centroids only
selects candidates.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .mesh import QuadMesh


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def closest_on_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to ``p`` (all arrays ``(M, 3)``)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    bp = p - b
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    cp = p - c
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        out = a + ab * v[:, None] + ac * w[:, None]
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        out = np.where(bc[:, None], b + (c - b) * np.nan_to_num(t_bc)[:, None], out)
        t_ac = d2 / (d2 - d6)
        acm = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        out = np.where(acm[:, None], a + ac * np.nan_to_num(t_ac)[:, None], out)
        out = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, out)
        t_ab = d1 / (d1 - d3)
        abm = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        out = np.where(abm[:, None], a + ab * np.nan_to_num(t_ab)[:, None], out)
        out = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, out)
        out = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, out)
    return out


def closest_on_segments(p, a, b):
    ab = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(np.nan_to_num(_dot(p - a, ab) / _dot(ab, ab)), 0.0, 1.0)
    return a + ab * t[:, None]


class GeometryProxy:
    """Closest-point queries on the input surface and its feature curves."""

    def __init__(self, mesh: QuadMesh, candidates: int = 12, workers: int = 1):
        self.workers = workers
        self.vertices = np.asarray(mesh.vertices, dtype=float)
        q = mesh.quads
        self.tris = np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]])
        V = self.vertices
        a, b, c = V[self.tris[:, 0]], V[self.tris[:, 1]], V[self.tris[:, 2]]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        self.tri_normals = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
        self.tree = cKDTree((a + b + c) / 3.0)
        self.k = min(candidates, len(self.tris))
        self.plane = self._fit_plane()
        self.curves: dict[int, tuple[np.ndarray, cKDTree]] = {}
        segs: dict[int, list[tuple[int, int]]] = {}
        for e, cid in mesh.feature_edges.items():
            segs.setdefault(cid, []).append(tuple(int(x) for x in mesh.edges[e]))
        for cid, s in segs.items():
            arr = np.array(s, dtype=np.int64)
            mid = (V[arr[:, 0]] + V[arr[:, 1]]) / 2.0
            self.curves[cid] = (arr, cKDTree(mid))

    def _fit_plane(self):
        """``(origin, normal)`` when every vertex lies on one plane, else None."""
        V = self.vertices
        n = self.tri_normals[np.linalg.norm(self.tri_normals, axis=1) > 0]
        if len(n) == 0:
            return None
        n0 = n[0]
        o = V.mean(axis=0)
        scale = max(float(np.ptp(V, axis=0).max()), 1e-300)
        if np.abs(V @ n0 - o @ n0).max() > 1e-12 * scale or np.abs(n @ n0).min() < 1 - 1e-12:
            return None
        return o, n0

    def _nearest_tris(self, points, k=None):
        _, idx = self.tree.query(points, k=min(k or self.k, len(self.tris)), workers=self.workers)
        idx = np.asarray(idx).reshape(len(points), -1)
        V = self.vertices
        P = np.repeat(points, idx.shape[1], axis=0)
        t = self.tris[idx.ravel()]
        cp = closest_on_triangles(P, V[t[:, 0]], V[t[:, 1]], V[t[:, 2]])
        d = np.linalg.norm(cp - P, axis=1).reshape(idx.shape)
        best = np.argmin(d, axis=1)
        rows = np.arange(len(points))
        return cp.reshape(len(points), -1, 3)[rows, best], idx[rows, best]

    def project(self, points, fast: bool = False) -> np.ndarray:
        """Closest points on the surface.

        With ``fast`` a planar surface is handled by plane projection and a
        curved one with fewer candidate triangles; used inside iterations.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(points) == 0:
            return points.copy()
        if fast:
            if self.plane is not None:
                o, n = self.plane
                return points - np.outer((points - o) @ n, n)
            return self._nearest_tris(points, k=4)[0]
        return self._nearest_tris(points)[0]

    def normals(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.tri_normals[self._nearest_tris(points)[1]]

    def project_curve(self, points, cid: int) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        segs, tree = self.curves[cid]
        k = min(8, len(segs))
        _, idx = tree.query(points, k=k, workers=self.workers)
        idx = np.asarray(idx).reshape(len(points), -1)
        V = self.vertices
        P = np.repeat(points, idx.shape[1], axis=0)
        s = segs[idx.ravel()]
        cp = closest_on_segments(P, V[s[:, 0]], V[s[:, 1]])
        d = np.linalg.norm(cp - P, axis=1).reshape(idx.shape)
        best = np.argmin(d, axis=1)
        return cp.reshape(len(points), -1, 3)[np.arange(len(points)), best]

    def distance_to_curve(self, points, cid: int) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(self.project_curve(points, cid) - points, axis=1)

    def distance(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(self.project(points) - points, axis=1)
