import math

import numpy as np
import pytest
from scipy import integrate

from disclab import discrepancy as D
from disclab import geometry as g
from disclab import measure as M
from disclab import pointset as P
from disclab.errors import LabError


def test_discrepancy_at_examples():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 30, seed=0)
    assert D.discrepancy_at(pts, mu, g.Ball(5.0)) == 0.0
    far = g.AffinePose((10.0, 0.0), 1.0, 0.0)
    assert D.discrepancy_at(pts, mu, g.Ball(1.0), far) == 0.0
    origin = np.zeros((1, 2))
    assert D.discrepancy_at(origin, mu, g.Ball(1.0)) == 0.0
    assert D.discrepancy_at(origin, mu, g.Ball(0.25)) == pytest.approx(1 - math.pi / 16, abs=1e-15)


def test_count_batch_matches_direct_membership():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.7, 0.7, (300, 2))
    poses = D.sample_affine_poses(D.AffineFamily(g.unit_square()), 0.7, 64, seed=3)
    for shape in (g.Ball(0.4), g.unit_square(), g.KochRegion(3), g.HalfSpace((0.6, 0.8), 0.1)):
        got = D.count_batch(pts, shape, poses)
        want = [np.count_nonzero(g.contains(shape, poses[i], pts)) for i in range(len(poses))]
        assert np.array_equal(got, want)


def test_count_batch_3d():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(200, 3))
    poses = D.sample_affine_poses(D.AffineFamily(g.Ball(0.5, 3)), 1.0, 50, seed=1)
    got = D.count_batch(pts, g.Ball(0.5, 3), poses)
    want = [np.count_nonzero(np.linalg.norm(pts - poses.translations[i], axis=1) <= 0.5 * poses.dilations[i])
            for i in range(50)]
    assert np.array_equal(got, want)


def test_binomial_oracle_for_iid():
    mu, N = M.LebesgueOnShape(g.Ball(0.5)), 40
    shape, pose = g.unit_square(), g.AffinePose((0.1, 0.0), 0.6, 0.4)
    p = M.evaluate(mu, shape, pose).value
    d2 = np.array([D.discrepancy_at(P.iid_points(mu, N, seed=s), mu, shape, pose) ** 2 for s in range(200)])
    assert abs(d2.mean() - N * p * (1 - p)) <= 3 * d2.std(ddof=1) / math.sqrt(200)


def test_l2_affine_positive_and_reproducible():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 1, seed=0)
    fam = D.AffineFamily(g.Ball(1.0), 0.1, 0.5)
    est = D.l2_affine(pts, mu, fam, n_poses=1000, seed=4)
    assert est.value > 0 and est.stderr > 0
    again = D.l2_affine(pts, mu, fam, n_poses=1000, seed=4)
    assert est == again
    assert D.l2_affine(pts, mu, fam, n_poses=1000, seed=5).value != est.value


def test_l2_affine_stderr_scaling():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 64, seed=2)
    fam = D.AffineFamily(g.Ball(0.5))
    a = D.l2_affine(pts, mu, fam, n_poses=8192, seed=1)
    b = D.l2_affine(pts, mu, fam, n_poses=16384, seed=1)
    ratio = b.mean_square_stderr ** 2 / a.mean_square_stderr ** 2
    assert 0.4 <= ratio <= 0.6


def test_l2_affine_errors():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 10, seed=0)
    fam = D.AffineFamily(g.Ball(0.5))
    with pytest.raises(LabError):
        D.l2_affine(pts, mu, fam, n_poses=10)
    small = D.AffineFamily(g.Ball(0.5), box=((-0.5, -0.5), (0.5, 0.5)))
    with pytest.raises(LabError, match="too small"):
        D.l2_affine(pts, mu, small, n_poses=1000)
    with pytest.raises(LabError):
        D.l2_affine(np.zeros((0, 2)), mu, fam, n_poses=1000)
    emp = M.EmpiricalMeasure.from_measure(mu, 500, seed=0)
    with pytest.raises(LabError, match="10 N"):
        D.l2_affine(pts, mu, D.AffineFamily(g.RectangleUnionGamma(0.5)), n_poses=1000, empirical=emp)
    with pytest.raises(LabError):
        D.AffineFamily(g.Ball(1.0), 1.0, 0.5)


def test_l2_affine_empirical_path():
    mu = M.LebesgueOnShape(g.unit_square(centered=False))
    pts = P.iid_points(mu, 5, seed=0)
    emp = M.EmpiricalMeasure.from_measure(mu, 250, seed=1)
    fam = D.AffineFamily(g.RectangleUnionGamma(0.5), 0.5, 1.0)
    est = D.l2_affine(pts, mu, fam, n_poses=1000, empirical=emp)
    assert est.value > 0 and est.stderr > 0


def test_l2_affine_rigid_invariance():
    sq = g.unit_square()
    t = 0.7
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    rot_sq = g.ConvexPolygon(tuple(map(tuple, sq.vertex_array @ R.T)))
    pts = P.partition_points(M.uniform_square(), 100).points
    fam = D.AffineFamily(g.regular_polygon(3, 0.4))
    a = D.l2_affine(pts, M.uniform_square(), fam, n_poses=4096, seed=1)
    b = D.l2_affine(pts @ R.T, M.LebesgueOnShape(rot_sq), fam, n_poses=4096, seed=2)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_thread_count_does_not_change_bits(monkeypatch):
    mu = M.LebesgueOnShape(g.KochRegion(3))
    pts = P.partition_points(mu, 32)
    fam = D.AffineFamily(g.unit_square())
    D._affine_table.cache_clear()
    monkeypatch.setenv("LAB_THREADS", "1")
    a = D.l2_affine(pts, mu, fam, n_poses=1200, seed=7)
    D._affine_table.cache_clear()
    monkeypatch.setenv("LAB_THREADS", "4")
    b = D.l2_affine(pts, mu, fam, n_poses=1200, seed=7)
    assert a == b


def test_partition_beats_iid():
    mu = M.uniform_square()
    fam = D.AffineFamily(g.Ball(0.5))
    part = D.l2_affine(P.partition_points(mu, 1024), mu, fam, n_poses=2048)
    iid = D.l2_affine(P.iid_points(mu, 1024, seed=0), mu, fam, n_poses=2048)
    assert part.value < 0.5 * iid.value


# ---------------------------------------------------------------- half-spaces

def test_halfspace_single_point_oracle():
    mu = M.LebesgueOnShape(g.Ball(0.5))
    est = D.l2_halfspace(np.zeros((1, 2)), mu, n_poses=4096, seed=0)

    def seg(rho):
        return (0.25 * math.acos(rho / 0.5) - rho * math.sqrt(0.25 - rho * rho)) / (math.pi * 0.25)

    want = math.sqrt(integrate.quad(lambda r: seg(r) ** 2, 0, 0.5)[0])
    assert abs(est.value - want) <= 3 * est.stderr + 1e-4


def test_halfspace_equispaced_circle_bounded():
    mu = M.CircleArcMeasure()
    for n in (8, 64, 100):
        est = D.l2_halfspace(P.equispaced_circle(n), mu, n_poses=2000, seed=n)
        assert est.value <= 1.0


def test_halfspace_complement_and_reflection():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 77, seed=3).points
    rng = np.random.default_rng(0)
    th = rng.normal(size=(50, 2))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    rho = rng.uniform(-0.5, 0.5, 50)
    d = D.halfspace_discrepancy(pts, mu, th, rho)
    c = D.complement_discrepancy(pts, mu, th, rho)
    assert np.max(np.abs(d + c)) <= 1e-12 * 77
    r = D.halfspace_discrepancy(pts, mu, -th, -rho)
    assert np.max(np.abs(r + d)) <= 1e-12 * 77


def test_halfspace_3d_sphere():
    mu = M.SphereSurfaceMeasure()
    pts = P.partition_points(mu, 100)
    iid = P.iid_points(mu, 100, seed=1)
    a = D.l2_halfspace(pts, mu, D.HalfSpaceFamily(dim=3), n_poses=2048)
    b = D.l2_halfspace(iid, mu, D.HalfSpaceFamily(dim=3), n_poses=2048)
    assert 0 < a.value < b.value


def test_halfspace_poses_normals_3d():
    rng = np.random.default_rng(4)
    th = rng.normal(size=(20, 3))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    th[0] = (-1.0, 0.0, 0.0)
    poses = D.halfspace_poses(th, 0.3)
    n, c = M._posed_halfspace(g.HalfSpace((1.0, 0.0, 0.0), 0.0), poses)
    assert np.allclose(n, th, atol=1e-14)
    assert np.allclose(c, 0.3, atol=1e-14)


def test_halfspace_errors():
    mu = M.uniform_square()
    with pytest.raises(LabError):
        D.l2_halfspace(np.array([[2.0, 0.0]]), mu, n_poses=1000)
    with pytest.raises(LabError):
        D.l2_halfspace(np.zeros((1, 2)), mu, D.HalfSpaceFamily(rho_max=0.1), n_poses=1000)


# ---------------------------------------------------------------- witnesses and limits

def test_witness_norm_inequality():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 64, seed=5)
    fam = D.AffineFamily(g.Ball(0.5))
    l2 = D.l2_affine(pts, mu, fam, n_poses=2048)
    w = D.witness_search(pts, mu, fam, budget=1000, seed=0)
    vol = fam.volume(mu.support_radius)
    assert w.value >= l2.value / math.sqrt(vol) - 3 * l2.stderr / math.sqrt(vol)
    assert abs(D.discrepancy_at(pts, mu, fam.shape, w.pose)) == pytest.approx(w.value)


def test_witness_monotone_in_budget():
    mu = M.KochCurveMeasure(4)
    pts = P.iid_points(mu, 40, seed=1)
    fam = D.AffineFamily(g.unit_square())
    vals = [D.witness_search(pts, mu, fam, budget=b, seed=2).value for b in (1000, 2000, 4000)]
    assert vals[0] <= vals[1] <= vals[2]


def test_witness_circle_halfspace_bounded():
    w = D.witness_search(P.equispaced_circle(30), M.CircleArcMeasure(), D.HalfSpaceFamily(), budget=2000)
    assert w.value <= 1.0
    assert w.evaluations == 2000
    with pytest.raises(LabError):
        D.witness_search(P.equispaced_circle(30), M.CircleArcMeasure(), D.HalfSpaceFamily(), budget=10)


def test_ball_to_halfspace_limit_square():
    mu = M.uniform_square()
    pts = P.iid_points(mu, 200, seed=8)
    r0 = mu.support_radius
    th = np.array([math.cos(1.1), math.sin(1.1)])
    rows, R_star = D.ball_to_halfspace_limit(pts, mu, th, 0.12, r0 * np.array([2, 10, 100, 1000]))
    gaps = [abs(r.mu_ball - r.mu_halfspace) for r in rows]
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-3
    assert rows[-1].count_ball == rows[-1].count_halfspace
    for r in rows:
        if r.R >= R_star:
            assert r.count_ball == r.count_halfspace
    assert math.isfinite(R_star)


def test_ball_to_halfspace_limit_circle():
    mu = M.CircleArcMeasure()
    pts = P.equispaced_circle(50)
    rows, _ = D.ball_to_halfspace_limit(pts, mu, (0.0, 1.0), 0.05, [1.0, 10.0, 100.0, 1000.0])
    assert all(abs(r.d_ball) <= 1 and abs(r.d_halfspace) <= 1 for r in rows)
    with pytest.raises(LabError):
        D.ball_to_halfspace_limit(pts, mu, (0.0, 1.0), 0.05, [10.0, 1.0])
