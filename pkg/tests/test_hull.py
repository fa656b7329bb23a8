import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from optval.hull import convex_hull, hull_distance, monotone_chain


def test_interval_and_degenerate():
    np.testing.assert_array_equal(convex_hull([[0.3], [-1.0], [1.0]]), [[-1.0], [1.0]])
    np.testing.assert_array_equal(convex_hull([[0.5], [0.5]]), [[0.5]])
    seg = convex_hull([[-1, -2], [0, 0], [1, 2], [0.5, 1.0]])
    assert seg.shape == (2, 2)
    np.testing.assert_allclose(sorted(seg.tolist()), [[-1, -2], [1, 2]], atol=1e-12)


def test_planar_polygon_in_space():
    pts = [[0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1], [0.5, 0.5, 1]]
    h = convex_hull(pts)
    assert h.shape == (4, 3)


def test_hull_distance():
    assert hull_distance([0.0], [[-1.0], [1.0]]) == 0.0
    assert hull_distance([1.5], [[-1.0], [1.0]]) == 0.5
    assert abs(hull_distance([2.0, 2.0], [[0, 0], [1, 0], [0, 1]]) - np.hypot(1.5, 1.5)) < 1e-6


pts2 = st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3, max_size=40)


@settings(max_examples=100, deadline=None)
@given(pts2)
def test_monotone_chain_matches_scipy(raw):
    pts = np.array(raw, dtype=float) / 10
    ours = monotone_chain(pts)
    if len(ours) < 3:
        return  # collinear input, scipy refuses it
    ref = pts[ConvexHull(pts).vertices]
    assert sorted(map(tuple, ours)) == sorted(map(tuple, ref))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*(st.integers(-20, 20),) * 3), min_size=1, max_size=25))
def test_every_point_inside_its_hull(raw):
    pts = np.array(raw, dtype=float) / 4
    h = convex_hull(pts)
    for p in pts:
        assert hull_distance(p, h) <= 1e-6


def test_vertex_of_flat_hull_has_zero_distance():
    pts = np.array([(0, 0, 0), (0, 1, 0), (0, 1, 3), (0, 6, 16), (-1, -2, 0)], dtype=float) / 4
    h = convex_hull(pts)
    assert max(hull_distance(p, h) for p in pts) <= 1e-12


def _polygon_distance(p, poly):
    """Independent 2-D oracle: 0 inside the CCW polygon, else the nearest edge distance."""
    n = len(poly)

    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    inside = all(cross(poly[(i + 1) % n] - poly[i], p - poly[i]) >= -1e-12 for i in range(n))
    if inside:
        return 0.0
    best = np.inf
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        t = np.clip((p - a) @ (b - a) / ((b - a) @ (b - a)), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(p - (a + t * (b - a)))))
    return best


@settings(max_examples=100, deadline=None)
@given(pts2, st.tuples(st.integers(-80, 80), st.integers(-80, 80)))
def test_hull_distance_matches_polygon_oracle(raw, q):
    pts = np.array(raw, dtype=float) / 10
    poly = monotone_chain(pts)
    if len(poly) < 3:
        return
    p = np.array(q, dtype=float) / 10
    assert abs(hull_distance(p, poly) - _polygon_distance(p, poly)) <= 1e-9
