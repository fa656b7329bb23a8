"""Convex hulls of small point sets in R^1..R^3 and distance to a hull."""

from __future__ import annotations

import numpy as np

__all__ = ["convex_hull", "monotone_chain", "hull_distance", "min_norm_point"]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points, eps: float = 1e-12) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise vertices, collinear points dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in np.asarray(points, dtype=float)})
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= eps:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= eps:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        hull = hull[:1]
    return np.array(hull, dtype=float)


def convex_hull(points, tol: float = 1e-9) -> np.ndarray:
    """Vertices of the convex hull of ``points`` (shape ``(k, m)``, m <= 3).

    Lower-dimensional point clouds (a segment in the plane, a polygon in
    space) are handled by working in their affine hull.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        return pts
    m = pts.shape[1]
    if m == 1:
        lo, hi = pts.min(), pts.max()
        return np.array([[lo]]) if hi - lo <= tol else np.array([[lo], [hi]])
    center = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - center, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    if rank == 0:
        return center[None, :]
    if rank < m:
        basis = vt[:rank]
        coords = (pts - center) @ basis.T
        sub = convex_hull(coords, tol)
        return center + sub @ basis
    if m == 2:
        return monotone_chain(pts)
    from scipy.spatial import ConvexHull

    hull = ConvexHull(pts)
    return pts[np.sort(hull.vertices)]


def _affine_min_norm(Q: np.ndarray) -> np.ndarray:
    """Weights summing to one that minimise the norm of ``Q.T @ mu`` (affine hull of the rows)."""
    k = Q.shape[0]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Q @ Q.T
    K[:k, k] = K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.lstsq(K, rhs, rcond=None)[0][:k]


def min_norm_point(Q, tol: float = 1e-12, max_iter: int = 1000) -> np.ndarray:
    """Wolfe's algorithm: the point of smallest norm in the convex hull of the rows of ``Q``."""
    Q = np.asarray(Q, dtype=float)
    scale = max(1.0, float(np.max(np.sum(Q * Q, axis=1))))
    S = [int(np.argmin(np.sum(Q * Q, axis=1)))]
    lam = np.array([1.0])
    x = Q[S[0]].copy()
    for _ in range(max_iter):
        j = int(np.argmin(Q @ x))
        if x @ x - Q[j] @ x <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            mu = _affine_min_norm(Q[S])
            if np.all(mu > tol):
                lam = mu
                break
            neg = mu <= tol
            theta = min(1.0, float(np.min(lam[neg] / (lam[neg] - mu[neg]))))
            lam = lam + theta * (mu - lam)
            keep = lam > tol
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep] / lam[keep].sum()
        x = lam @ Q[S]
    return x


def hull_distance(p, vertices) -> float:
    """Euclidean distance from ``p`` to the convex hull of ``vertices``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    V = np.asarray(vertices, dtype=float).reshape(-1, p.size)
    if V.shape[0] == 1:
        return float(np.linalg.norm(p - V[0]))
    if p.size == 1:
        lo, hi = V.min(), V.max()
        return float(max(lo - p[0], p[0] - hi, 0.0))
    return float(np.linalg.norm(min_norm_point(V - p)))
