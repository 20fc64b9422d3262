"""Euclidean distances to points, segments, and polylines.

These are the exact distance kernels behind the degenerate bulk weight
``dist(x, S)^gamma``, where ``S`` is a finite point set (codimension 2)
or a polyline (codimension 1).
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateGeometryError


class Points:
    """Finite point set, a 0-dimensional target of distance queries.

    Parameters
    ----------
    points : array_like, shape (n, 2) or (2,)
    """

    codimension = 2

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, 2)
        if pts.size == 0:
            raise DegenerateGeometryError("empty point set")
        self.points = pts.reshape(-1, 2)

    def distance(self, x):
        """Distance from ``x`` (shape (..., 2)) to the nearest point."""
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - self.points
        return np.sqrt((diff ** 2).sum(axis=-1)).min(axis=-1)

    def bounding_box(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return lo[0], lo[1], hi[0], hi[1]

    def __repr__(self):
        return f"Points({self.points.tolist()})"


class Polyline:
    """Chain of straight segments, a 1-dimensional distance target.

    Parameters
    ----------
    vertices : array_like, shape (n, 2), n >= 2
        Consecutive vertices; segment k joins vertex k and k+1.
    """

    codimension = 1

    def __init__(self, vertices):
        verts = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(verts) < 2:
            raise DegenerateGeometryError("polyline needs at least two vertices")
        seg = verts[1:] - verts[:-1]
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) <= 0.0):
            raise DegenerateGeometryError("polyline has a zero-length segment")
        self.vertices = verts

    @property
    def segments(self):
        """Array of segments, shape (n-1, 2, 2)."""
        return np.stack([self.vertices[:-1], self.vertices[1:]], axis=1)

    def distance(self, x):
        """Distance from ``x`` (shape (..., 2)) to the polyline."""
        x = np.asarray(x, dtype=float)
        a = self.vertices[:-1]
        d = self.vertices[1:] - a
        len2 = (d ** 2).sum(axis=1)
        diff = x[..., None, :] - a
        t = (diff * d).sum(axis=-1) / len2
        t = np.clip(t, 0.0, 1.0)
        foot = a + t[..., None] * d
        dist = np.sqrt(((x[..., None, :] - foot) ** 2).sum(axis=-1))
        return dist.min(axis=-1)

    def total_length(self):
        seg = self.vertices[1:] - self.vertices[:-1]
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())

    def bounding_box(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return lo[0], lo[1], hi[0], hi[1]

    def merged_collinear(self):
        """Collapse runs of collinear consecutive segments.

        Returns a new :class:`Polyline`; exact integration formulas apply
        segment by segment, so fewer segments mean fewer case splits.
        """
        verts = [self.vertices[0]]
        for k in range(1, len(self.vertices) - 1):
            a, b, c = verts[-1], self.vertices[k], self.vertices[k + 1]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            along = np.dot(b - a, c - b)
            if abs(cross) > 1e-14 * max(1.0, np.abs(c - a).max()) or along <= 0:
                verts.append(b)
        verts.append(self.vertices[-1])
        return Polyline(np.array(verts))

    def __repr__(self):
        return f"Polyline({self.vertices.tolist()})"


def as_submanifold(spec):
    """Coerce ``spec`` into a :class:`Points` or :class:`Polyline`.

    Accepts an existing instance or a single coordinate pair.  Ambiguous
    raw arrays must be wrapped explicitly by the caller.
    """
    if isinstance(spec, (Points, Polyline)):
        return spec
    arr = np.asarray(spec, dtype=float)
    if arr.shape == (2,):
        return Points(arr)
    raise TypeError("wrap the target set in Points(...) or Polyline(...)")


def distance_to_submanifold(s_spec, x):
    """Exact Euclidean distance from ``x`` to the target set.

    Parameters
    ----------
    s_spec : Points | Polyline | (2,) coordinate pair
    x : array_like, shape (..., 2)

    Returns
    -------
    float or ndarray
    """
    target = as_submanifold(s_spec)
    d = target.distance(x)
    if np.ndim(d) == 0:
        return float(d)
    return d


# -- small exact predicates used by quadrature and scans ----------------------

def point_segment_distance(p, a, b):
    """Distance from point ``p`` to segment ``a``-``b``."""
    p = np.asarray(p, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = b - a
    len2 = float(d @ d)
    if len2 == 0.0:
        return float(np.linalg.norm(p - a))
    t = np.clip(float((p - a) @ d) / len2, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def segments_intersect(p0, p1, q0, q1):
    """Whether closed segments p0-p1 and q0-q1 intersect."""
    def orient(a, b, c):
        val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if val > 0:
            return 1
        if val < 0:
            return -1
        return 0

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p0, p1, q0), orient(p0, p1, q1)
    o3, o4 = orient(q0, q1, p0), orient(q0, q1, p1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p0, p1, q0):
        return True
    if o2 == 0 and on_seg(p0, p1, q1):
        return True
    if o3 == 0 and on_seg(q0, q1, p0):
        return True
    if o4 == 0 and on_seg(q0, q1, p1):
        return True
    return False


def segment_segment_distance(p0, p1, q0, q1):
    """Distance between two closed segments."""
    if segments_intersect(p0, p1, q0, q1):
        return 0.0
    return min(point_segment_distance(p0, q0, q1),
               point_segment_distance(p1, q0, q1),
               point_segment_distance(q0, p0, p1),
               point_segment_distance(q1, p0, p1))


def point_in_triangle(p, tri):
    """Whether point ``p`` lies in the closed triangle (3x2 array)."""
    a, b, c = np.asarray(tri, float)
    d1 = (p[0] - b[0]) * (a[1] - b[1]) - (a[0] - b[0]) * (p[1] - b[1])
    d2 = (p[0] - c[0]) * (b[1] - c[1]) - (b[0] - c[0]) * (p[1] - c[1])
    d3 = (p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])
    has_neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    has_pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (has_neg and has_pos)


def set_polygon_distance(s_spec, polygon):
    """Distance from a Points/Polyline target to a convex polygon (m x 2).

    Zero when the target touches or enters the polygon.
    """
    target = as_submanifold(s_spec)
    poly = np.asarray(polygon, float).reshape(-1, 2)
    edges = [(poly[k], poly[(k + 1) % len(poly)]) for k in range(len(poly))]

    def poly_contains(p):
        sign = 0
        for a, b in edges:
            cr = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cr > 0:
                if sign < 0:
                    return False
                sign = 1
            elif cr < 0:
                if sign > 0:
                    return False
                sign = -1
        return True

    if isinstance(target, Points):
        best = np.inf
        for p in target.points:
            if poly_contains(p):
                return 0.0
            best = min(best, min(point_segment_distance(p, a, b) for a, b in edges))
        return best

    best = np.inf
    for s0, s1 in target.segments:
        if poly_contains(s0) or poly_contains(s1):
            return 0.0
        for a, b in edges:
            d = segment_segment_distance(s0, s1, a, b)
            if d == 0.0:
                return 0.0
            best = min(best, d)
    return best
