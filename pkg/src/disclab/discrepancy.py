"""The discrepancy D_N(R) = card(P_N ∩ R) − N μ(R) and its L² averages.

Affine families average |D_N|² over translations x in a box, dilations
τ ∈ [a, b] and Haar-uniform rotations (probability measure); half-space
families average over ρ ∈ [0, r₀] and uniform directions Θ. Pose samples
come from a scrambled Sobol sequence.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import kernels
from . import measure as msr
from .errors import LabError
from .geometry import AffinePose, Ball, HalfSpace, PoseBatch
from .pointset import PointSet
from .rotations import rotation_dims, rotations_from_uniform

_CHUNK = 256


@dataclass(frozen=True)
class AffineFamily:
    """x + τσΩ with x in a box, τ ∈ [a, b], σ ∈ SO(d).

    ``box`` is (lo, hi); None picks the smallest centered cube that holds
    every body meeting B(0, r₀).
    """

    shape: object
    a: float = 0.25
    b: float = 1.0
    box: tuple | None = None

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise LabError("need 0 < a < b")
        if not self.shape.bounded:
            raise LabError("affine families need a bounded shape")
        if self.box is not None:
            lo, hi = (tuple(float(v) for v in c) for c in self.box)
            if len(lo) != self.shape.dim or len(hi) != self.shape.dim or not all(l < h for l, h in zip(lo, hi)):
                raise LabError("translation box must be (lo, hi) with lo < hi in every coordinate")
            object.__setattr__(self, "box", (lo, hi))

    @property
    def dim(self):
        return self.shape.dim

    def reach(self):
        return self.b * self.shape.bounding_radius

    def resolve_box(self, r0):
        if self.box is not None:
            return np.array(self.box[0]), np.array(self.box[1])
        h = r0 + self.reach()
        return np.full(self.dim, -h), np.full(self.dim, h)

    def volume(self, r0):
        lo, hi = self.resolve_box(r0)
        return float(np.prod(hi - lo)) * (self.b - self.a)

    def to_dict(self):
        return {"kind": "affine", "shape": self.shape.to_dict(), "a": self.a, "b": self.b,
                "box": None if self.box is None else [list(self.box[0]), list(self.box[1])]}


@dataclass(frozen=True)
class HalfSpaceFamily:
    """Half-spaces {x·Θ > ρ} with ρ ∈ [0, r₀]; r₀ None means the support radius of μ."""

    rho_max: float | None = None
    dim: int = 2

    def __post_init__(self):
        if self.rho_max is not None and not self.rho_max > 0:
            raise LabError("rho_max must be positive")
        rotation_dims(self.dim)

    def to_dict(self):
        return {"kind": "halfspace", "rho_max": self.rho_max, "dim": self.dim}


@dataclass(frozen=True)
class L2Estimate:
    value: float
    stderr: float
    n_poses: int
    seed: int
    mean_square: float
    mean_square_stderr: float
    family_volume: float
    N: int

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- counting

def _as_points(points):
    if isinstance(points, PointSet):
        return points.points
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[0] < 1:
        raise LabError("need a non-empty (N, d) point array")
    return p


def count_batch(points, shape, poses):
    """card(P ∩ (x + τσΩ)) for every pose; boundary points count as inside."""
    pts = _as_points(points)
    P = len(poses)
    if isinstance(shape, Ball):
        return kernels.count_in_balls(pts, poses.translations, poses.dilations * shape.radius)
    if isinstance(shape, HalfSpace):
        n, c = msr._posed_halfspace(shape, poses)
        out = np.empty(P, dtype=np.int64)
        for lo in range(0, P, _CHUNK):
            s = slice(lo, lo + _CHUNK)
            out[s] = np.count_nonzero(pts @ n[s].T > c[s], axis=0)
        return out
    # candidates from a KD-tree, then one vectorized membership test per chunk
    tree = cKDTree(pts)
    R = shape.bounding_radius
    out = np.zeros(P, dtype=np.int64)
    mats = poses.matrices()
    for lo in range(0, P, _CHUNK):
        idx = range(lo, min(P, lo + _CHUNK))
        lists = tree.query_ball_point(poses.translations[lo:lo + _CHUNK],
                                      poses.dilations[lo:lo + _CHUNK] * R * (1 + 1e-12))
        cnt = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
        if cnt.sum() == 0:
            continue
        cand = np.fromiter((k for x in lists for k in x), dtype=np.int64, count=int(cnt.sum()))
        own = np.repeat(np.arange(len(idx)), cnt) + lo
        q = pts[cand] - poses.translations[own]
        q = np.einsum("ij,ijk->ik", q, mats[own]) / poses.dilations[own, None]
        hit = np.asarray(shape.contains_local(q), dtype=np.int64)
        out[lo:lo + len(idx)] = np.bincount(own - lo, weights=hit, minlength=len(idx)).astype(np.int64)
    return out


def discrepancy_batch(points, mu, shape, poses, empirical=None):
    """(D_N for each pose, N·error bound of the μ values)."""
    pts = _as_points(points)
    if pts.shape[1] != mu.dim or shape.dim != mu.dim:
        raise LabError("points, measure and shape must share the dimension")
    vals, errs = msr.evaluate_batch(mu, shape, poses, empirical)
    N = pts.shape[0]
    return count_batch(pts, shape, poses) - N * vals, N * errs


def discrepancy_at(points, mu, shape, pose=None, empirical=None):
    """card(P ∩ (x + τσΩ)) − N μ(x + τσΩ)."""
    pose = pose or AffinePose.identity(shape.dim)
    d, _ = discrepancy_batch(points, mu, shape, PoseBatch.from_poses([pose]), empirical)
    return float(d[0])


# ---------------------------------------------------------------- pose sampling

def _sobol(dim, n, seed):
    eng = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        # the balance warning for non powers of two is expected
        warnings.simplefilter("ignore", UserWarning)
        return eng.random(n)


def sample_affine_poses(family, r0, n, seed=0):
    d = family.dim
    lo, hi = family.resolve_box(r0)
    u = _sobol(d + 1 + rotation_dims(d), n, seed)
    x = lo + u[:, :d] * (hi - lo)
    tau = family.a + u[:, d] * (family.b - family.a)
    rot = rotations_from_uniform(u[:, d + 1:], d)
    return PoseBatch(x, tau, rot)


def _uniform_directions(u, d):
    if d == 2:
        a = 2 * np.pi * u[:, 0]
        return np.column_stack([np.cos(a), np.sin(a)])
    z = 2 * u[:, 0] - 1
    a = 2 * np.pi * u[:, 1]
    s = np.sqrt(1 - z * z)
    return np.column_stack([s * np.cos(a), s * np.sin(a), z])


def halfspace_poses(theta, rho):
    """Poses turning HalfSpace(e₁, 0) into {x·Θ > ρ} for each row of theta."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    rho = np.broadcast_to(np.asarray(rho, dtype=float), theta.shape[:1])
    d = theta.shape[1]
    x = rho[:, None] * theta
    if d == 2:
        rot = np.arctan2(theta[:, 1], theta[:, 0])
    else:
        # shortest-arc quaternion from e1 to Θ; the antipode uses a half turn about e3
        w = 1.0 + theta[:, 0]
        q = np.column_stack([w, np.zeros_like(w), -theta[:, 2], theta[:, 1]])
        anti = w < 1e-12
        q[anti] = (0.0, 0.0, 0.0, 1.0)
        rot = q / np.linalg.norm(q, axis=1, keepdims=True)
    return PoseBatch(x, np.ones(theta.shape[0]), rot)


def _base_halfspace(d):
    return HalfSpace((1.0,) + (0.0,) * (d - 1), 0.0)


def sample_halfspaces(family, r0, n, seed=0):
    d = family.dim
    u = _sobol(d, n, seed)
    rho = r0 * u[:, 0]
    theta = _uniform_directions(u[:, 1:], d)
    return theta, rho


# ---------------------------------------------------------------- measure cache

@lru_cache(maxsize=32)
def _affine_table(mu, family, n_poses, seed):
    poses = sample_affine_poses(family, mu.support_radius, n_poses, seed)
    vals, errs = _parallel_measure(mu, family.shape, poses)
    for a in (poses.translations, poses.dilations, poses.rotations, vals, errs):
        a.setflags(write=False)
    return poses, vals, errs


def _workers():
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_measure(mu, shape, poses, empirical=None):
    """μ values per pose; chunks may run on LAB_THREADS threads, results land by pose index."""
    P = len(poses)
    vals = np.empty(P)
    errs = np.empty(P)
    step = max(_CHUNK, -(-P // (4 * _workers())))

    def job(lo):
        s = slice(lo, min(P, lo + step))
        vals[s], errs[s] = msr.evaluate_batch(mu, shape, poses.subset(s), empirical)

    starts = range(0, P, step)
    if _workers() == 1:
        for lo in starts:
            job(lo)
    else:
        with ThreadPoolExecutor(_workers()) as ex:
            list(ex.map(job, starts))
    return vals, errs


def _check_empirical(empirical, N):
    if empirical is not None and empirical.size < 10 * N * N:
        raise LabError(f"empirical measure has {empirical.size} atoms; need >= 10 N² = {10 * N * N}")


def _l2(d, errs, vol, n_poses, seed, N):
    # plain-MC standard error from the per-pose variance; conservative for scrambled QMC
    sq = d * d
    m = float(np.mean(sq))
    se = float(np.std(sq, ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else 0.0
    if np.any(errs):
        # μ errors shift each D² by at most 2|D|e + e²
        se = math.hypot(se, float(np.mean(2 * np.abs(d) * errs + errs * errs)))
    value = math.sqrt(vol * m)
    stderr = vol * se / (2 * value) if value > 0 else math.sqrt(vol * se)
    return L2Estimate(value, stderr, int(n_poses), seed, m, se, vol, N)


def l2_affine(points, mu, family, n_poses=4096, seed=0, empirical=None):
    """sqrt(|box|·(b−a)·E|D_N(x+τσΩ)|²), with x, τ, σ uniform."""
    pts = _as_points(points)
    N = pts.shape[0]
    if n_poses < 1000:
        raise LabError("n_poses must be at least 1000")
    if family.dim != mu.dim or pts.shape[1] != mu.dim:
        raise LabError("points, measure and family must share the dimension")
    _check_empirical(empirical, N)
    r0 = max(mu.support_radius, float(np.max(np.linalg.norm(pts, axis=1))))
    lo, hi = family.resolve_box(mu.support_radius)
    # every body meeting B(0, r0) has its translation within r0 + b·R of the origin
    need = r0 + family.reach()
    if np.any(lo > -need) or np.any(hi < need):
        raise LabError(f"translation box too small: D_N can be nonzero up to |x| = {need:.6g}")
    if empirical is None:
        poses, vals, errs = _affine_table(mu, family, n_poses, seed)
    else:
        poses = sample_affine_poses(family, mu.support_radius, n_poses, seed)
        vals, errs = _parallel_measure(mu, family.shape, poses, empirical)
    d = count_batch(pts, family.shape, poses) - N * vals
    return _l2(d, N * errs, family.volume(mu.support_radius), n_poses, seed, N)


def l2_halfspace(points, mu, family=None, n_poses=4096, seed=0):
    """sqrt(r₀·E|D_N(Π(ρ,Θ))|²) over ρ ∈ [0, r₀] and uniform Θ."""
    family = family or HalfSpaceFamily(dim=mu.dim)
    pts = _as_points(points)
    N = pts.shape[0]
    if n_poses < 1000:
        raise LabError("n_poses must be at least 1000")
    if family.dim != mu.dim or pts.shape[1] != mu.dim:
        raise LabError("points, measure and family must share the dimension")
    r0 = family.rho_max or mu.support_radius
    if mu.support_radius > r0 * (1 + 1e-12):
        raise LabError("the support of μ is not inside B(0, r0)")
    PointSet(pts).check_within(r0)
    theta, rho = sample_halfspaces(family, r0, n_poses, seed)
    poses = halfspace_poses(theta, rho)
    shape = _base_halfspace(family.dim)
    vals, errs = _parallel_measure(mu, shape, poses)
    d = count_batch(pts, shape, poses) - N * vals
    return _l2(d, N * errs, r0, n_poses, seed, N)


def halfspace_discrepancy(points, mu, theta, rho):
    """D_N of {x·Θ > ρ} for one or many (Θ, ρ)."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
    poses = halfspace_poses(theta, rho)
    d, _ = discrepancy_batch(points, mu, _base_halfspace(theta.shape[1]), poses)
    return d


def complement_discrepancy(points, mu, theta, rho):
    """D_N of the closed complement {x·Θ <= ρ}."""
    pts = _as_points(points)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
    poses = halfspace_poses(theta, rho)
    vals, _ = msr.evaluate_batch(mu, _base_halfspace(theta.shape[1]), poses)
    cnt = count_batch(pts, _base_halfspace(theta.shape[1]), poses)
    N = pts.shape[0]
    return (N - cnt) - N * (1.0 - vals)


# ---------------------------------------------------------------- witness search

@dataclass(frozen=True)
class Witness:
    value: float
    signed: float
    pose: object
    evaluations: int

    def to_dict(self):
        p = self.pose
        if isinstance(p, AffinePose):
            pose = {"translation": list(p.translation), "dilation": p.dilation,
                    "rotation": p.rotation if p.dim == 2 else list(p.rotation)}
        else:
            pose = {"theta": list(p[0]), "rho": p[1]}
        return {"value": self.value, "signed": self.signed, "pose": pose,
                "evaluations": self.evaluations}


class _Budget(Exception):
    pass


class _Tracker:
    def __init__(self, f, budget):
        self.f = f
        self.budget = budget
        self.used = 0
        self.best = (-1.0, 0.0, None)

    def __call__(self, z):
        if self.used >= self.budget:
            raise _Budget
        self.used += 1
        d = self.f(z)
        if abs(d) > self.best[0]:
            self.best = (abs(d), d, np.array(z, dtype=float))
        return abs(d)


def _golden(track, z, k, lo, hi, iters):
    # golden-section on coordinate k of z, maximizing |D|; a heuristic for a step function
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)

    def at(t):
        w = z.copy()
        w[k] = t
        return track(w)

    fc, fd = at(c), at(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = at(d)


def witness_search(points, mu, family, budget=2000, seed=0, scan=256, refine_iters=12):
    """Largest |D_N| found over the family; a lower bound on the supremum.

    Rounds alternate a random scan and golden-section refinement of the best
    pose so far, one coordinate at a time. The sequence of trial poses depends
    only on earlier results, so a run with budget B is a prefix of the run with
    budget 2B and the reported value never decreases with the budget.
    """
    if budget < 1000:
        raise LabError("budget must be at least 1000 evaluations")
    pts = _as_points(points)
    rng = np.random.default_rng(seed)
    if isinstance(family, AffineFamily):
        d = family.dim
        lo, hi = family.resolve_box(mu.support_radius)
        nrot = rotation_dims(d)
        lows = np.concatenate([lo, [family.a], np.zeros(nrot)])
        highs = np.concatenate([hi, [family.b], np.ones(nrot)])

        def to_pose(z):
            rot = rotations_from_uniform(z[d + 1:], d)[0]
            return AffinePose(tuple(z[:d]), float(z[d]), float(rot) if d == 2 else tuple(rot))

        def f(z):
            return discrepancy_at(pts, mu, family.shape, to_pose(z))
    else:
        d = family.dim
        r0 = family.rho_max or mu.support_radius
        PointSet(pts).check_within(r0)
        lows = np.concatenate([[-r0], np.zeros(d - 1)])
        highs = np.concatenate([[r0], np.ones(d - 1)])

        def to_pose(z):
            th = _uniform_directions(np.atleast_2d(z[1:]), d)[0]
            return (tuple(th.tolist()), float(z[0]))

        def f(z):
            th, rho = to_pose(z)
            return float(halfspace_discrepancy(pts, mu, th, rho)[0])

    track = _Tracker(f, budget)
    try:
        while True:
            for z in lows + rng.random((scan, lows.size)) * (highs - lows):
                track(z)
            for k in range(lows.size):
                z0 = track.best[2].copy()
                w = 0.25 * (highs[k] - lows[k])
                _golden(track, z0, k, max(lows[k], z0[k] - w), min(highs[k], z0[k] + w), refine_iters)
    except _Budget:
        pass
    value, signed, z = track.best
    return Witness(float(value), float(signed), to_pose(z), track.used)


# ---------------------------------------------------------------- ball to half-space limit

@dataclass(frozen=True)
class LimitRow:
    R: float
    count_ball: int
    count_halfspace: int
    mu_ball: float
    mu_halfspace: float
    d_ball: float
    d_halfspace: float

    @property
    def gap(self):
        return abs(self.d_ball - self.d_halfspace)


def ball_to_halfspace_limit(points, mu, theta, rho, R_sequence):
    """Discrepancy of B((ρ+R)Θ, R) against that of {x·Θ > ρ} along R_sequence.

    Returns (rows, R_star): the count terms agree for every R >= R_star, the
    largest |x − ρΘ|²/(2(x·Θ − ρ)) over points strictly inside the half-space.
    """
    pts = _as_points(points)
    N = pts.shape[0]
    R_sequence = np.asarray(R_sequence, dtype=float)
    if np.any(np.diff(R_sequence) <= 0):
        raise LabError("R_sequence must be increasing")
    if R_sequence[0] <= mu.support_radius:
        raise LabError("the smallest R must exceed r0")
    th = np.asarray(theta, dtype=float)
    th = th / np.linalg.norm(th)
    s = pts @ th - rho
    w = pts - rho * th
    q = np.einsum("ij,ij->i", w, w)
    inside = s > 0
    R_star = float(np.max(q[inside] / (2 * s[inside]))) if np.any(inside) else 0.0
    ch = int(np.count_nonzero(inside))
    mh = float(msr.evaluate_batch(mu, _base_halfspace(th.size), halfspace_poses(th, rho))[0][0])
    rows = []
    for R in R_sequence:
        # closed-ball membership in the form that stays exact as R grows
        cb = int(np.count_nonzero(q / (2 * R) <= s))
        pose = AffinePose(tuple((rho + R) * th), 1.0, 0.0 if th.size == 2 else (1.0, 0.0, 0.0, 0.0))
        mb = msr.evaluate(mu, Ball(float(R), th.size), pose).value
        rows.append(LimitRow(float(R), cb, ch, mb, mh, cb - N * mb, ch - N * mh))
    return rows, R_star
