import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disclab import geometry as g
from disclab.errors import LabError, ResourceLimitError, UnboundedError
from disclab.rotations import quat_from_uniform, quat_matrix

S3 = math.sqrt(3)


def test_contains_examples():
    assert g.contains(g.Ball(1.0), None, (0.0, 0.0))
    pose = g.AffinePose((3.0, 0.0), 1.0, 0.0)
    assert g.contains(g.Ball(1.0), pose, (3.5, 0.0))
    assert not g.contains(g.Ball(1.0), pose, (1.5, 0.0))
    # base triangle centroid is the origin; brute-force crossing number as oracle
    assert g.contains(g.KochRegion(4), None, (0.0, 0.0))


def _crossing_number(v, p):
    x, y = p
    inside = False
    n = len(v)
    for i in range(n):
        (xa, ya), (xb, yb) = v[i], v[(i + 1) % n]
        if (ya > y) != (yb > y) and x < xa + (y - ya) * (xb - xa) / (yb - ya):
            inside = not inside
    return inside


def test_koch_membership_matches_bruteforce():
    v = g.koch_polygon(3)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.7, 0.7, (400, 2))
    got = g.contains(g.KochRegion(3), None, pts)
    want = np.array([_crossing_number(v, p) for p in pts])
    assert np.array_equal(got, want)


def test_boundary_ties_count_inside():
    v = g.koch_polygon(2)
    mids = 0.5 * (v + np.roll(v, -1, axis=0))
    assert g.contains(g.KochRegion(2), None, v).all()
    assert g.contains(g.KochRegion(2), None, mids).all()
    sq = g.unit_square()
    assert g.contains(sq, None, [(0.5, 0.0), (0.5, 0.5), (-0.5, -0.5)]).all()
    assert g.contains(g.Ball(1.0), None, (1.0, 0.0))


def test_contains_errors():
    with pytest.raises(LabError):
        g.KochRegion(-1)
    with pytest.raises(LabError):
        g.Ball(1.0, dim=4)
    with pytest.raises(LabError):
        g.AffinePose((0.0, 0.0, 0.0, 0.0))


def test_volume_examples():
    assert g.volume(g.Ball(1.0)) == pytest.approx(math.pi, rel=1e-15)
    assert g.volume(g.Ball(1.0, 3)) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    with pytest.raises(UnboundedError):
        g.volume(g.HalfSpace((0, 1), 0.2))


def test_rectangle_union_partial_sums_approach_third():
    # oracle: direct loop over the stored rectangles
    prev = None
    for T in (10, 100, 1000, 10000):
        R = g.RectangleUnionGamma(0.5, T)
        gam = 1.0
        direct = sum((n ** -gam - (n + 1) ** -gam) / 3 for n in range(1, T + 1))
        assert R.stored_volume() == pytest.approx(direct, rel=1e-12)
        gap = 1 / 3 - R.stored_volume()
        assert prev is None or gap < prev
        prev = gap
        assert R.volume() == pytest.approx(1 / 3, abs=1e-15)
    assert g.RectangleUnionGamma(0.5).truncation >= 10 ** 6


def test_rectangle_union_geometry():
    R = g.RectangleUnionGamma(0.5, 50)
    assert R.gamma == pytest.approx(1.0)
    rects = R.rectangles()
    n = np.arange(1, 51)
    assert np.allclose(rects[:, 1], 1 / n)
    assert np.allclose(rects[:, 1] - rects[:, 0], (1 / n - 1 / (n + 1)) / 3)
    inside = np.column_stack([rects.mean(axis=1), np.full(50, 0.5)])
    gaps = np.column_stack([rects[:, 0] - 1e-9, np.full(50, 0.5)])
    assert R.contains_local(inside).all()
    assert not R.contains_local(gaps).any()


def test_koch_limit_area_by_direct_summation():
    total = math.fsum([S3 / 4] + [3 * 4 ** k * S3 / 4 * 9.0 ** (-k - 1) for k in range(60)])
    assert total == pytest.approx(2 * S3 / 5, rel=1e-15)
    assert g.koch_area(40) == pytest.approx(2 * S3 / 5, rel=1e-12)


@pytest.mark.parametrize("n", range(0, 9))
def test_koch_area_and_increment(n):
    assert g.polygon_area(g.koch_polygon(n)) == pytest.approx(g.koch_area(n), abs=1e-12)
    inc = g.koch_area(n + 1) - g.koch_area(n)
    assert inc == pytest.approx(3 * 4 ** n * S3 / 4 * 9.0 ** (-n - 1), abs=1e-12)


def test_snowflake_decomposition():
    for n in range(7):
        dec = g.SnowflakeDecomposition(n)
        assert abs(dec.pendant_area() - 3 * S3 / 20 * (4 / 9) ** n) <= 1e-12
        assert dec.pendant_triangles()[0] == (n, 3 * 4 ** n, 3.0 ** (-n - 1))


def test_koch_polygon_examples():
    for n, edges in [(0, 3), (1, 12), (3, 192)]:
        v = g.koch_polygon(n)
        e = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
        assert v.shape == (edges, 2)
        assert np.max(np.abs(e - 3.0 ** -n)) < 1e-12
    v = g.koch_polygon(3)
    assert np.hypot(*(np.roll(v, -1, axis=0) - v).T).sum() == pytest.approx(3 * (4 / 3) ** 3)
    assert g.polygon_area(g.koch_polygon(0)) > 0
    assert np.allclose(g.polygon_centroid(g.koch_polygon(5)), 0, atol=1e-14)
    with pytest.raises(ResourceLimitError):
        g.koch_polygon(13)


def test_koch_refinement_outward():
    # the level-(n+1) tip over each level-n edge lies outside K_n
    for n in range(4):
        tips = g.koch_polygon(n + 1)[2::4]
        assert not g.contains(g.KochRegion(n), None, tips).any()


def test_symmetric_difference_examples():
    assert g.symmetric_difference_volume(g.Ball(1.0), (0.0, 0.0), 10_000, 0).value == 0.0
    sq = g.unit_square()
    for t in (0.1, 0.37, 1.0):
        e = g.symmetric_difference_volume(sq, (t, 0.0), 100_000, 1)
        assert abs(e.value - 2 * t) <= 4 * e.stderr + 1e-12
    n = 3
    h = (0.0, S3 / 2 * 3.0 ** -n)
    e = g.symmetric_difference_volume(g.KochRegion(6), h, 200_000, 2)
    assert e.value >= S3 / 5 * (4 / 9) ** n
    exact = g.symmetric_difference_exact(g.KochRegion(6), h)
    assert abs(e.value - exact) <= 4 * e.stderr
    with pytest.raises(LabError):
        g.symmetric_difference_volume(sq, (0.1, 0.0), 10, 0)


def test_symmetric_difference_errors():
    with pytest.raises(LabError):
        g.symmetric_difference_volume(g.KochCurvePolyline(2), (0.1, 0.0), 2000, 0)


def test_symmetric_difference_even_in_h():
    rng = np.random.default_rng(4)
    for shape in (g.KochRegion(5), g.regular_polygon(5, 0.5)):
        h = rng.uniform(-0.2, 0.2, 2)
        a = g.symmetric_difference_volume(shape, h, 50_000, 11)
        b = g.symmetric_difference_volume(shape, -h, 50_000, 12)
        assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_minkowski_examples():
    e = g.minkowski_shell_volume(g.Ball(1.0), 0.1, 200_000, 0)
    assert abs(e.value - 0.4 * math.pi) <= 4 * e.stderr
    t = 0.05
    sq = g.minkowski_shell_volume(g.unit_square(), t, 200_000, 1)
    # offset-polygon oracle: (1 + 4t + πt²) − (1 − 2t)²
    exact = 1 + 4 * t + math.pi * t * t - (1 - 2 * t) ** 2
    assert abs(sq.value - exact) <= 4 * sq.stderr
    t = 3.0 ** -4
    k = g.minkowski_shell_volume(g.KochRegion(6), t, 100_000, 2)
    assert k.value <= 6 * t ** (2 - g.LOG3_4)
    with pytest.raises(LabError):
        g.minkowski_shell_volume(g.Ball(1.0), 0.0)


def test_minkowski_dominates_symmetric_difference():
    for n in (2, 3):
        t = 3.0 ** -n
        shell = g.minkowski_shell_volume(g.KochRegion(6), t, 60_000, 5)
        sd = g.symmetric_difference_volume(g.KochRegion(6), (0.0, t), 60_000, 6)
        assert shell.value + 3 * shell.stderr >= sd.value - 3 * sd.stderr


def test_rectangle_union_boundary_distance():
    R = g.RectangleUnionGamma(0.5, 20)
    rects = R.rectangles()
    rng = np.random.default_rng(0)
    z = np.column_stack([rng.uniform(-0.2, 1.2, 500), rng.uniform(-0.3, 1.3, 500)])
    polys = [np.array([[a, 0], [b, 0], [b, 1], [a, 1]]) for a, b in rects]
    brute = np.min([g._polyline_distance(p, z) for p in polys], axis=0)
    assert np.allclose(R.boundary_distance(z), brute, atol=1e-12)


def test_fit_beta_square_and_errors():
    t = 2.0 ** -np.arange(1, 7)
    fit = g.fit_beta(g.unit_square(), (1, 0), t, 20_000, 0)
    assert fit.beta_hat == pytest.approx(1.0, abs=0.02)
    with pytest.raises(LabError):
        g.fit_beta(g.unit_square(), (1, 0), t[::-1], 20_000, 0)
    with pytest.raises(LabError):
        g.fit_beta(g.unit_square(), (1, 0), t[:3], 20_000, 0)
    with pytest.raises(LabError):
        g.fit_beta(g.unit_square(), (1, 0), 4.0 ** -np.arange(1, 6), 20_000, 0, kappa3=3.0)


@pytest.mark.parametrize("k", [3, 4, 6])
def test_fit_beta_convex_polygons(k):
    shape = g.regular_polygon(k, 0.6, 0.3)
    t = 2.0 ** -np.arange(2, 8)
    fit = g.fit_beta(shape, (math.cos(0.7), math.sin(0.7)), t, 40_000, k)
    assert 0.95 <= fit.beta_hat <= 1.05


def test_fit_beta_rectangle_union():
    R = g.RectangleUnionGamma(0.5)
    t = 2.0 ** -np.arange(6, 14)
    fit = g.fit_beta(R, (1, 0), t, 200_000, 0)
    assert 0.45 <= fit.beta_hat <= 0.55


def test_exact_overlap_matches_geos():
    from disclab import kernels
    rng = np.random.default_rng(8)
    v = g.koch_polygon(5)
    for _ in range(5):
        pose = g.AffinePose(tuple(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0.3, 1), rng.uniform(0, 6))
        w = pose.to_world(v)
        a = kernels.polygon_intersection_area(v, w)
        b = kernels.polygon_intersection_area(v, w, impl=kernels.backend("python"))
        assert a == pytest.approx(b, abs=1e-12)
    # identical polygons are degenerate for the compiled walk; wrapper recovers
    assert g.polygon_intersection(v, v.copy()) == pytest.approx(g.koch_area(5), rel=1e-12)


def test_overlap_contact_cases_match_geos():
    # shared edges, vertices on edges, quarter turns and nested polygons
    from disclab import kernels
    shapes = [g.unit_square(), g.regular_polygon(3, 0.4), g.KochRegion(3), g.regular_polygon(4, 0.5, np.pi / 4)]
    rng = np.random.default_rng(0)
    for _ in range(1500):
        a = shapes[rng.integers(4)].vertex_array
        b = shapes[rng.integers(4)].vertex_array
        pose = g.AffinePose(tuple(rng.uniform(-0.6, 0.6, 2) * (rng.random() < 0.8)),
                            float(rng.choice([1.0, rng.uniform(0.3, 1.2)])),
                            float(rng.choice([0.0, np.pi / 2, rng.uniform(0, 6.3)])))
        b = pose.to_world(b)
        want = kernels.polygon_intersection_area(a, b, impl=kernels.backend("python"))
        assert g.polygon_intersection(a, b) == pytest.approx(want, abs=1e-12)


def test_polygon_disk_area_against_rectangle_formula():
    sq = g.unit_square().vertex_array
    rng = np.random.default_rng(2)
    for _ in range(50):
        c = rng.uniform(-1, 1, 2)
        r = rng.uniform(0.01, 1.2)
        assert g.polygon_disk_area(sq, c, r) == pytest.approx(
            float(g.disk_rect_area(c[0], c[1], r, -0.5, 0.5, -0.5, 0.5)), abs=1e-13)
    assert float(g.disk_rect_area(0, 0, 0.25, -0.5, 0.5, -0.5, 0.5)) == pytest.approx(math.pi / 16)


def test_clip_polygon_area_exact_for_nonconvex():
    import shapely
    v = g.koch_polygon(4)
    for c in (-0.2, 0.0, 0.13, 0.31):
        got = abs(g.polygon_area(g.clip_polygon(v, (1.0, 0.0), c)))
        want = shapely.clip_by_rect(shapely.Polygon(v), -9, -9, c, 9).area
        assert got == pytest.approx(want, abs=1e-14)


def test_lens_and_caps():
    assert g.lens_area(0.0, 1.0, 0.5)[()] == pytest.approx(math.pi / 4)
    assert g.lens_area(2.0, 1.0, 1.0)[()] == 0.0
    # two unit disks at distance 1: 2π/3 − √3/2
    assert g.lens_area(1.0, 1.0, 1.0)[()] == pytest.approx(2 * math.pi / 3 - S3 / 2)
    # two unit balls at distance 1: 5π/12
    assert g.lens_volume(1.0, 1.0, 1.0)[()] == pytest.approx(5 * math.pi / 12)
    assert g.disk_halfplane_area(1.0, 0.0)[()] == pytest.approx(math.pi / 2)
    assert g.ball_halfspace_volume(1.0, 0.0)[()] == pytest.approx(2 * math.pi / 3)


def test_serialization_roundtrip(tmp_path):
    shapes = [g.Ball(0.5), g.Ball(2.0, 3), g.unit_square(), g.KochRegion(3),
              g.KochCurvePolyline(2), g.RectangleUnionGamma(0.5, 10), g.HalfSpace((1, 1), 0.2)]
    for s in shapes:
        assert g.shape_from_json(g.shape_to_json(s)) == s
    path = tmp_path / "k.csv"
    g.write_vertices_csv(path, g.koch_polygon(3))
    assert np.array_equal(g.read_vertices_csv(path), g.koch_polygon(3))
    with pytest.raises(LabError):
        g.shape_from_dict({"variant": "Torus"})


def test_polygon_validation():
    with pytest.raises(LabError):
        g.ConvexPolygon(((0, 0), (0, 1), (1, 0)))  # clockwise
    with pytest.raises(LabError):
        g.ConvexPolygon(((0, 0), (1, 0)))
    with pytest.raises(LabError):
        g.ConvexPolygon(((0, 0), (2, 0), (1, 0.2), (1, 2), (0, 2)))  # reflex vertex


# ---------------------------------------------------------------- properties

unit = st.floats(0, 1, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_motion_invariance_2d(seed):
    rng = np.random.default_rng(seed)
    shapes = [g.Ball(0.7), g.regular_polygon(5, 0.8), g.KochRegion(4)]
    for shape in shapes:
        pose = g.AffinePose(tuple(rng.uniform(-1, 1, 2)), rng.uniform(0.25, 1), rng.uniform(0, 2 * np.pi))
        p = rng.uniform(-1.5, 1.5, (25, 2))
        phi = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        b = rng.uniform(-2, 2, 2)
        moved = g.AffinePose(tuple(R @ np.asarray(pose.translation) + b), pose.dilation, pose.rotation + phi)
        assert np.array_equal(g.contains(shape, pose, p), g.contains(shape, moved, p @ R.T + b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_motion_invariance_3d(seed):
    rng = np.random.default_rng(seed)
    shape = g.Ball(0.8, 3)
    q = quat_from_uniform(rng.random(3))
    pose = g.AffinePose(tuple(rng.uniform(-1, 1, 3)), rng.uniform(0.25, 1), tuple(q))
    p = rng.uniform(-2, 2, (25, 3))
    q2 = quat_from_uniform(rng.random(3))
    R = quat_matrix(q2)
    b = rng.uniform(-2, 2, 3)
    w1, x1, y1, z1 = q2
    w2, x2, y2, z2 = q
    prod = (w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2, w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2, w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2)
    moved = g.AffinePose(tuple(R @ np.asarray(pose.translation) + b), pose.dilation, prod)
    assert np.allclose(moved.matrix(), R @ pose.matrix(), atol=1e-12)
    a = g.contains(shape, pose, p)
    m = g.contains(shape, moved, p @ R.T + b)
    assert np.array_equal(a, m)


@settings(max_examples=50, deadline=None)
@given(st.lists(unit, min_size=3, max_size=3))
def test_rotations_orthogonal(u):
    M = quat_matrix(quat_from_uniform(np.array(u)))
    assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(M) - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.01, 1.5))
def test_disk_rect_bounds(cx, cy, r):
    a = float(g.disk_rect_area(cx, cy, r, -0.5, 0.5, -0.5, 0.5))
    assert -1e-15 <= a <= min(math.pi * r * r, 1.0) + 1e-12
