import math

import numpy as np
import pytest

from disclab import geometry as g
from disclab import measure as M
from disclab import pointset as P
from disclab.errors import LabError

SQ01 = M.LebesgueOnShape(g.ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))))

PARTITIONED = [M.uniform_square(), M.LebesgueOnShape(g.Ball(0.5)), M.LebesgueOnShape(g.regular_polygon(5, 0.6)),
               M.LebesgueOnShape(g.KochRegion(6)), M.KochCurveMeasure(6), M.CircleArcMeasure(),
               M.SphereSurfaceMeasure(1.3)]


def test_iid_basic():
    one = P.iid_points(M.uniform_square(), 1, seed=3)
    assert one.n == 1 and g.contains(g.unit_square(), None, one.points[0])
    a = P.iid_points(M.uniform_square(), 1000, seed=1)
    b = P.iid_points(M.uniform_square(), 1000, seed=2)
    assert not np.array_equal(a.points, b.points)
    assert a.generator == "iid" and a.seed == 1
    assert np.array_equal(a.points, P.iid_points(M.uniform_square(), 1000, seed=1).points)


def test_iid_binomial_variance():
    # for iid points the count in a fixed body is Binomial(N, μ(R))
    mu, N = M.uniform_square(), 50
    shape, pose = g.Ball(0.3), g.AffinePose((0.1, -0.05), 1.0, 0.0)
    p = M.evaluate(mu, shape, pose).value
    d2 = []
    for rep in range(200):
        pts = P.iid_points(mu, N, seed=1000 + rep).points
        d2.append((np.count_nonzero(g.contains(shape, pose, pts)) - N * p) ** 2)
    d2 = np.array(d2)
    assert abs(d2.mean() - N * p * (1 - p)) <= 3 * d2.std(ddof=1) / math.sqrt(len(d2))


def test_square_grid_centers():
    for k in (1, 4, 9):
        pts = P.partition_points(SQ01, k * k).points
        c = (np.arange(k) + 0.5) / k
        want = np.array([(x, y) for y in c for x in c])
        assert np.allclose(pts, want, atol=1e-15)


def test_koch_curve_segment_midpoints():
    mu = M.KochCurveMeasure(8)
    n = 3 * 4 ** 8
    part = P.partition(mu, n)
    assert all(c.measure == 1.0 / n for c in part.cells)
    pts = P.partition_points(mu, n).points
    v = g.koch_polygon(8)
    assert np.allclose(pts, 0.5 * (v + np.roll(v, -1, axis=0)), atol=1e-14)


def test_circle_partition_angles():
    pts = P.partition_points(M.CircleArcMeasure(), 100).points
    ang = np.arctan2(pts[:, 1], pts[:, 0]) % (2 * np.pi)
    want = 2 * np.pi * np.arange(100) / 100
    assert np.allclose(np.sort(ang), want, atol=1e-12)


def test_equispaced_circle():
    four = P.equispaced_circle(4).points
    r = 1 / (2 * np.pi)
    assert np.allclose(four, r * np.array([[1, 0], [0, 1], [-1, 0], [0, -1]]), atol=1e-15)
    with pytest.raises(LabError):
        P.equispaced_circle(0)


def test_equispaced_circle_arc_bound():
    mu = M.CircleArcMeasure()
    rng = np.random.default_rng(7)
    for n in (5, 16, 37):
        pts = P.equispaced_circle(n).points
        for _ in range(200):
            pose = g.AffinePose(tuple(rng.uniform(-0.3, 0.3, 2)), rng.uniform(0.01, 0.4), 0.0)
            d = np.count_nonzero(g.contains(g.Ball(1.0), pose, pts)) - n * M.evaluate(mu, g.Ball(1.0), pose).value
            assert abs(d) <= 1
            th = rng.uniform(0, 2 * np.pi)
            hs = g.HalfSpace((math.cos(th), math.sin(th)), rng.uniform(-0.2, 0.2))
            d = np.count_nonzero(g.contains(hs, None, pts)) - n * M.evaluate(mu, hs).value
            assert abs(d) <= 1


@pytest.mark.parametrize("mu", PARTITIONED, ids=lambda m: m.ident[:20])
@pytest.mark.parametrize("n", [1, 2, 7, 64, 200])
def test_partition_invariants(mu, n):
    part = P.partition(mu, n)
    assert part.n == n
    m = part.measures
    assert abs(math.fsum(m) - 1) <= 1e-9
    assert np.max(np.abs(m - 1 / n)) <= 1e-9
    part.check()
    reps = part.representatives()
    assert all(c.contains(r) for c, r in zip(part.cells, reps))
    assert part.within_bound()
    P.PointSet(reps).check_within(mu.support_radius)


@pytest.mark.parametrize("mu", [PARTITIONED[i] for i in (0, 1, 4, 5, 6)], ids=lambda m: m.ident[:20])
def test_partition_diameter_constant_stable(mu):
    cs = [P.partition(mu, 4 ** k).diameter_constant for k in (2, 3, 4, 5)]
    assert max(cs) <= 2 * min(cs)


@pytest.mark.parametrize("mu", PARTITIONED[:4] + [PARTITIONED[6]], ids=lambda m: m.ident[:20])
def test_partition_cells_tile_support(mu):
    # points of the support fall into exactly one cell (boundaries have measure zero)
    part = P.partition(mu, 24)
    pts = M.sample_array(mu, 300, seed=5)
    hits = np.array([[c.contains(p) for c in part.cells] for p in pts])
    assert np.all(hits.sum(axis=1) == 1)
    # and the hit frequencies agree with cell measure 1/24
    freq = hits.mean(axis=0)
    assert np.all(np.abs(freq - 1 / 24) <= 4 * math.sqrt(1 / 24 * 23 / 24 / 300))


def test_jitter_points_in_cells_and_seeded():
    mu = M.LebesgueOnShape(g.Ball(0.5))
    part = P.partition(mu, 50)
    a = P.partition_points(mu, 50, seed=4, jitter=True)
    b = P.partition_points(mu, 50, seed=4, jitter=True)
    assert np.array_equal(a.points, b.points)
    assert all(c.contains(p) for c, p in zip(part.cells, a.points))
    assert not np.array_equal(a.points, P.partition_points(mu, 50, seed=5, jitter=True).points)
    kc = P.partition(M.KochCurveMeasure(4), 30)
    pts = P.partition_points(M.KochCurveMeasure(4), 30, seed=1, jitter=True).points
    assert all(c.contains(p) for c, p in zip(kc.cells, pts))


def test_sphere_cells_equal_area_and_on_sphere():
    mu = M.SphereSurfaceMeasure(2.0)
    pts = P.partition_points(mu, 300).points
    assert np.allclose(np.linalg.norm(pts, axis=1), 2.0)
    # the cell count in the northern hemisphere is about half
    assert abs(np.count_nonzero(pts[:, 2] > 0) - 150) <= 12


def test_unsupported_partition_lists_supported():
    mu = M.LebesgueOnShape(g.Ball(1.0, 3))
    with pytest.raises(LabError, match="supported"):
        P.partition(mu, 10)
    with pytest.raises(LabError):
        P.partition(M.uniform_square(), 0)


def test_pointset_validation_and_radius():
    with pytest.raises(LabError):
        P.PointSet(np.zeros((0, 2)))
    with pytest.raises(LabError):
        P.PointSet(np.array([[np.nan, 0.0]]))
    ps = P.PointSet(np.array([[0.3, 0.4]]))
    ps.check_within(0.5)
    with pytest.raises(LabError):
        ps.check_within(0.49)
    with pytest.raises(ValueError):
        ps.points[0, 0] = 1.0


@pytest.mark.parametrize("dim", [2, 3])
def test_pointset_csv_roundtrip(tmp_path, dim):
    mu = M.uniform_square() if dim == 2 else M.SphereSurfaceMeasure()
    ps = P.iid_points(mu, 17, seed=9)
    path = tmp_path / "pts.csv"
    ps.to_csv(path)
    back = P.PointSet.from_csv(path)
    assert np.array_equal(back.points, ps.points)
    assert back.metadata() == ps.metadata()
    assert path.read_text().splitlines()[0] == ",".join("xyz"[:dim])
    P.sidecar(path).unlink()
    assert P.PointSet.from_csv(path).generator == "external"
