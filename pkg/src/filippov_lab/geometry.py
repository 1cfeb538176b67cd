"""Distances between densely sampled planar curves."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["points_to_polyline", "hausdorff_polylines", "resample_closed", "circle_points"]


def _segment_dist(p, a, b):
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    t = np.where(L2 > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + ab * t[:, None]
    return np.hypot(*(p - proj).T)


def points_to_polyline(points, poly, tree=None) -> np.ndarray:
    """Distance from each point to the polyline ``poly`` (vertex order matters).

    Nearest vertex by KD-tree, then exact distance to the two segments that
    meet at it. Exact whenever vertices are denser than the curve's features.
    """
    points = np.atleast_2d(np.asarray(points, float))
    poly = np.asarray(poly, float)
    tree = tree or cKDTree(poly)
    d_v, idx = tree.query(points)
    best = d_v
    n = len(poly)
    for off in (-1, 0):
        i0 = np.clip(idx + off, 0, n - 2)
        best = np.minimum(best, _segment_dist(points, poly[i0], poly[i0 + 1]))
    return best


def hausdorff_polylines(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(max(points_to_polyline(a, b).max(), points_to_polyline(b, a).max()))


def resample_closed(points, n: int) -> np.ndarray:
    """``n`` points equally spaced in arc length along a closed polyline."""
    pts = np.asarray(points, float)
    if np.hypot(*(pts[-1] - pts[0])) > 0:
        pts = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    st = np.linspace(0.0, s[-1], n + 1)
    return np.column_stack([np.interp(st, s, pts[:, 0]), np.interp(st, s, pts[:, 1])])


def circle_points(center, radius, n: int = 20000) -> np.ndarray:
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
