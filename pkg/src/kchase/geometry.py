"""Small planar helpers: convex polygons (segments allowed) with projection."""
from __future__ import annotations

import numpy as np

EPS = 1e-12


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def project_to_segment(p, a, b) -> np.ndarray:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return a.copy()
    t = min(1.0, max(0.0, float((p - a) @ ab) / L2))
    return a + t * ab


class ConvexPolygon:
    """Convex hull of the given vertices; 2 distinct vertices make a segment."""

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.vertices = _hull(V)
        if len(self.vertices) == 0:
            raise ValueError("polygon needs at least one vertex")

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3

    def edges(self):
        V = self.vertices
        if len(V) == 1:
            return [(V[0], V[0])]
        if len(V) == 2:
            return [(V[0], V[1])]
        return [(V[i], V[(i + 1) % len(V)]) for i in range(len(V))]

    def contains(self, p, tol: float = 1e-9) -> bool:
        p = np.asarray(p, dtype=float)
        if self.is_degenerate:
            return self.distance(p) <= tol
        # counter-clockwise hull: inside iff left of (or on) every edge
        for a, b in self.edges():
            L = float(np.hypot(*(b - a)))
            if _cross(a, b, p) < -tol * L:
                return False
        return True

    def contains_many(self, P, tol: float = 1e-9) -> np.ndarray:
        """Vectorised ``contains`` for an (m, 2) array of points."""
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        if self.is_degenerate:
            a, b = self.edges()[0]
            ab = b - a
            L2 = float(ab @ ab)
            t = np.zeros(len(P)) if L2 == 0 else np.clip((P - a) @ ab / L2, 0.0, 1.0)
            Q = a + t[:, None] * ab
            return np.hypot(*(P - Q).T) <= tol
        ok = np.ones(len(P), dtype=bool)
        for a, b in self.edges():
            L = float(np.hypot(*(b - a)))
            cr = (b[0] - a[0]) * (P[:, 1] - a[1]) - (b[1] - a[1]) * (P[:, 0] - a[0])
            ok &= cr >= -tol * L
        return ok

    def project(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if not self.is_degenerate and self.contains(p, tol=0.0):
            return p.copy()
        best, bd = None, np.inf
        for a, b in self.edges():
            q = project_to_segment(p, a, b)
            d = float(np.hypot(*(q - p)))
            if d < bd:
                best, bd = q, d
        return best

    def distance(self, p) -> float:
        q = self.project(p)
        return float(np.hypot(*(np.asarray(p, float) - q)))

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def _hull(P: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain, counter-clockwise, duplicates and collinear points dropped."""
    pts = sorted(set(map(tuple, np.round(P, 15))))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= EPS:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= EPS:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        # all points collinear: keep the two extremes as a segment
        return np.asarray([pts[0], pts[-1]], dtype=float)
    return np.asarray(hull, dtype=float)


def point_in_polygon(p, vertices, tol: float = 1e-9) -> bool:
    return ConvexPolygon(vertices).contains(p, tol)
