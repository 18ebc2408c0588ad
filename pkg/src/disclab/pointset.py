"""Point distributions: iid baselines, equal-measure partitions, equispaced circle.

An equal-measure partition splits the support of μ into N cells of measure
1/N with diameters of order N^{-1/k}, k the geometric dimension of the
support; one point per cell gives the constructive upper bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, QhullError

from . import geometry as geo
from . import measure as msr
from .errors import LabError

SUPPORTED_PARTITIONS = ("Lebesgue on a rectangle", "Lebesgue on a convex polygon",
                        "Lebesgue on a disk", "Lebesgue on a KochRegion", "KochCurveMeasure",
                        "CircleArcMeasure", "SphereSurfaceMeasure")


# ---------------------------------------------------------------- point sets

@dataclass(frozen=True, eq=False)
class PointSet:
    """N points in R^d with provenance (generator tag, seed, measure id)."""

    points: np.ndarray
    generator: str = "external"
    seed: int | None = None
    measure_id: str | None = None

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(1, -1)
        if p.ndim != 2 or p.shape[0] < 1:
            raise LabError("a point set needs N >= 1 points")
        if p.shape[1] not in (2, 3):
            raise LabError("points must be 2- or 3-dimensional")
        if not np.all(np.isfinite(p)):
            raise LabError("points must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def check_within(self, r0):
        """Raise unless every point lies in the closed ball B(0, r0)."""
        far = float(np.max(np.linalg.norm(self.points, axis=1)))
        if far > r0 * (1 + 1e-12):
            raise LabError(f"point at distance {far:.6g} lies outside B(0, {r0:.6g})")

    def metadata(self):
        return {"generator": self.generator, "seed": self.seed, "N": self.n,
                "dim": self.dim, "measure_id": self.measure_id}

    def to_csv(self, path):
        """Write one point per row (17 significant digits) plus a JSON sidecar."""
        path = Path(path)
        names = ["x", "y", "z"][: self.dim]
        np.savetxt(path, self.points, fmt="%.17g", delimiter=",", header=",".join(names),
                   comments="")
        sidecar(path).write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        if sidecar(path).exists():
            meta = json.loads(sidecar(path).read_text())
        return cls(pts, meta.get("generator", "external"), meta.get("seed"), meta.get("measure_id"))


def sidecar(path):
    return Path(str(path) + ".json")


def iid_points(mu, n, seed=0):
    return msr.sample(mu, n, seed)


def equispaced_circle(n):
    """n points at arclength j/n on the circle of length 1 centered at 0."""
    if n < 1:
        raise LabError("n must be >= 1")
    mu = msr.CircleArcMeasure()
    a = 2 * np.pi * np.arange(n) / n
    return PointSet(mu.radius * np.column_stack([np.cos(a), np.sin(a)]), "equispaced-circle",
                    None, mu.ident)


# ---------------------------------------------------------------- cells

def _pip(v, p):
    x, y = p
    a, b = v, np.roll(v, -1, axis=0)
    st = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    inside = bool(np.count_nonzero(st & (x < xi)) & 1)
    return inside or bool(np.any(geo.segment_distances(np.tile(p, (len(a), 1)), a, b) <= 1e-13))


def _interior_point(v, c):
    """c itself if inside polygon v, else the midpoint of the longest inside run on y = c_y."""
    if _pip(v, c):
        return c
    a, b = v, np.roll(v, -1, axis=0)
    y = c[1]
    st = (a[:, 1] > y) != (b[:, 1] > y)
    xi = np.sort(a[st, 0] + (y - a[st, 1]) * (b[st, 0] - a[st, 0]) / (b[st, 1] - a[st, 1]))
    if xi.size < 2:
        return v[np.argmin(np.linalg.norm(v - c, axis=1))]
    runs = xi[1::2] - xi[0::2]
    k = int(np.argmax(runs))
    return np.array([0.5 * (xi[2 * k] + xi[2 * k + 1]), y])


def _point_diameter(p):
    p = np.unique(np.asarray(p, dtype=float), axis=0)
    if p.shape[0] > 8:
        try:
            p = p[ConvexHull(p).vertices]
        except QhullError:
            pass
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


class Cell:
    """One part of an equal-measure partition."""

    measure: float

    def diameter(self) -> float:
        raise NotImplementedError

    def representative(self):
        raise NotImplementedError

    def contains(self, p) -> bool:
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError


@dataclass
class RectCell(Cell):
    x0: float
    x1: float
    y0: float
    y1: float
    measure: float

    def diameter(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def representative(self):
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    def contains(self, p):
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def sample(self, rng):
        u = rng.random(2)
        return np.array([self.x0 + u[0] * (self.x1 - self.x0), self.y0 + u[1] * (self.y1 - self.y0)])


@dataclass
class SectorCell(Cell):
    """{r1 <= |p| <= r2, a1 <= arg p <= a2}; r1 = 0 with a full turn is a disk."""

    r1: float
    r2: float
    a1: float
    a2: float
    measure: float

    def _corners(self):
        a = np.linspace(self.a1, self.a2, 33)
        ring = lambda r: r * np.column_stack([np.cos(a), np.sin(a)])
        return np.vstack([ring(self.r1), ring(self.r2)])

    def diameter(self):
        if self.a2 - self.a1 >= np.pi:
            return 2 * self.r2
        return _point_diameter(self._corners())

    def representative(self):
        phi = self.a2 - self.a1
        if self.r1 == 0 and phi >= 2 * np.pi - 1e-12:
            return np.zeros(2)
        # centroid of an annular sector
        rbar = (2.0 / 3.0) * (self.r2 ** 3 - self.r1 ** 3) / (self.r2 ** 2 - self.r1 ** 2)
        rbar *= math.sin(phi / 2) / (phi / 2)
        if rbar < self.r1:
            rbar = math.sqrt(0.5 * (self.r1 ** 2 + self.r2 ** 2))
        m = 0.5 * (self.a1 + self.a2)
        return rbar * np.array([math.cos(m), math.sin(m)])

    def contains(self, p):
        r = math.hypot(p[0], p[1])
        if not self.r1 * (1 - 1e-12) <= r <= self.r2 * (1 + 1e-12):
            return False
        if self.a2 - self.a1 >= 2 * np.pi - 1e-12 or r == 0:
            return True
        a = (math.atan2(p[1], p[0]) - self.a1) % (2 * np.pi)
        return a <= self.a2 - self.a1 + 1e-12

    def sample(self, rng):
        u = rng.random(2)
        r = math.sqrt(self.r1 ** 2 + u[0] * (self.r2 ** 2 - self.r1 ** 2))
        a = self.a1 + u[1] * (self.a2 - self.a1)
        return r * np.array([math.cos(a), math.sin(a)])


@dataclass
class PolygonCell(Cell):
    """A clipped piece of a polygon; may carry zero-width bridges along cut lines."""

    vertices: np.ndarray
    measure: float

    def diameter(self):
        return _point_diameter(self.vertices)

    def representative(self):
        return _interior_point(self.vertices, geo.polygon_centroid(self.vertices))

    def contains(self, p):
        return _pip(self.vertices, np.asarray(p, dtype=float))

    def sample(self, rng):
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        for _ in range(100000):
            p = lo + rng.random(2) * (hi - lo)
            if self.contains(p):
                return p
        return self.representative()


@dataclass
class ArcCell(Cell):
    """Normalized-arclength block [s0, s1) of a closed curve."""

    s0: float
    s1: float
    measure: float
    curve: object = field(repr=False, default=None)

    def diameter(self):
        return _point_diameter(self.curve.block_points(self.s0, self.s1))

    def representative(self):
        return self.curve.point(0.5 * (self.s0 + self.s1))

    def contains(self, p):
        s = self.curve.param(np.asarray(p, dtype=float))
        if s is None:
            return False
        w = (s - self.s0) % 1.0
        return w <= (self.s1 - self.s0) + 1e-12 or w >= 1.0 - 1e-12

    def sample(self, rng):
        return self.curve.point(self.s0 + rng.random() * (self.s1 - self.s0))


@dataclass
class ZoneCell(Cell):
    """{z1 <= z/R <= z2, a1 <= azimuth <= a2} on the sphere of radius R."""

    z1: float
    z2: float
    a1: float
    a2: float
    radius: float
    measure: float

    def _point(self, z, a):
        s = np.sqrt(np.maximum(1 - z * z, 0.0))
        return self.radius * np.column_stack([s * np.cos(a), s * np.sin(a), z])

    def diameter(self):
        if self.a2 - self.a1 >= 2 * np.pi - 1e-12:
            # caps and full bands: dense sample, since interior points can be extreme
            Z, A = np.meshgrid(np.linspace(self.z1, self.z2, 17), np.linspace(self.a1, self.a2, 33))
            return _point_diameter(self._point(Z.ravel(), A.ravel()))
        # a collar cell spans less than a half turn, so chord length peaks on its edges
        t = np.linspace(0.0, 1.0, 9)
        z = np.concatenate([np.full(9, self.z1), np.full(9, self.z2),
                            self.z1 + t * (self.z2 - self.z1), self.z1 + t * (self.z2 - self.z1)])
        a = np.concatenate([self.a1 + t * (self.a2 - self.a1), self.a1 + t * (self.a2 - self.a1),
                            np.full(9, self.a1), np.full(9, self.a2)])
        p = self._point(z, a)
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    def representative(self):
        if self.a2 - self.a1 >= 2 * np.pi - 1e-12:
            zc = 1.0 if self.z2 >= 1 else (-1.0 if self.z1 <= -1 else 0.5 * (self.z1 + self.z2))
            return self._point(np.array([zc]), np.array([0.0]))[0]
        return self._point(np.array([0.5 * (self.z1 + self.z2)]),
                           np.array([0.5 * (self.a1 + self.a2)]))[0]

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        if abs(np.linalg.norm(p) - self.radius) > 1e-12 * self.radius:
            return False
        z = p[2] / self.radius
        if not self.z1 - 1e-12 <= z <= self.z2 + 1e-12:
            return False
        if self.a2 - self.a1 >= 2 * np.pi - 1e-12 or math.hypot(p[0], p[1]) == 0:
            return True
        a = (math.atan2(p[1], p[0]) - self.a1) % (2 * np.pi)
        return a <= self.a2 - self.a1 + 1e-12

    def sample(self, rng):
        u = rng.random(2)
        return self._point(np.array([self.z1 + u[0] * (self.z2 - self.z1)]),
                           np.array([self.a1 + u[1] * (self.a2 - self.a1)]))[0]


class _Circle:
    def __init__(self, radius):
        self.radius = radius

    def point(self, s):
        a = 2 * np.pi * s
        return self.radius * np.array([math.cos(a), math.sin(a)])

    def param(self, p):
        if abs(math.hypot(p[0], p[1]) - self.radius) > 1e-12 * self.radius:
            return None
        return (math.atan2(p[1], p[0]) / (2 * np.pi)) % 1.0

    def block_points(self, s0, s1):
        s = np.linspace(s0, s1, 65)
        a = 2 * np.pi * s
        return self.radius * np.column_stack([np.cos(a), np.sin(a)])


class _KochCurve:
    def __init__(self, level):
        self.level = level
        self.v = geo.koch_polygon(level)
        self.m = self.v.shape[0]

    def point(self, s):
        return geo.koch_curve_point(self.level, np.array([s]))[0]

    def param(self, p):
        a = self.v
        b = np.roll(a, -1, axis=0)
        d = geo.segment_distances(np.tile(p, (self.m, 1)), a, b)
        k = int(np.argmin(d))
        if d[k] > 1e-12:
            return None
        e = b[k] - a[k]
        t = float(np.clip(np.dot(p - a[k], e) / np.dot(e, e), 0.0, 1.0))
        return ((k + t) / self.m) % 1.0

    def block_points(self, s0, s1):
        k0 = int(math.ceil(s0 * self.m))
        k1 = int(math.floor(s1 * self.m))
        inner = self.v[np.arange(k0, k1 + 1) % self.m] if k1 >= k0 else np.zeros((0, 2))
        ends = geo.koch_curve_point(self.level, np.array([s0, s1]))
        return np.vstack([ends, inner])


# ---------------------------------------------------------------- partitions

@dataclass
class EqualMeasurePartition:
    """N cells of μ-measure 1/N with recorded diameters.

    ``diameter_constant`` is max diam · N^{1/k}, with k = 2 on planar regions
    and surfaces, 1 on the circle and log₃4 on the Koch curve. ``declared_bound`` is the constant the
    construction promises for that kind of support, in units of r₀.
    """

    kind: str
    cells: list
    geometric_dim: float
    support_radius: float
    declared_bound: float

    @property
    def n(self):
        return len(self.cells)

    @property
    def measures(self):
        return np.array([c.measure for c in self.cells])

    def diameters(self):
        return np.array([c.diameter() for c in self.cells])

    @property
    def max_diameter(self):
        return float(np.max(self.diameters()))

    @property
    def diameter_constant(self):
        return self.max_diameter * self.n ** (1.0 / self.geometric_dim)

    def within_bound(self):
        return self.diameter_constant <= self.declared_bound * self.support_radius

    def representatives(self):
        return np.array([c.representative() for c in self.cells])

    def check(self, tol=1e-9):
        m = self.measures
        if abs(math.fsum(m) - 1.0) > tol or np.max(np.abs(m - 1.0 / self.n)) > tol:
            raise LabError("partition cells are not of equal measure")
        return True

    def summary(self):
        return {"kind": self.kind, "N": self.n, "max_diameter": self.max_diameter,
                "diameter_constant": self.diameter_constant,
                "declared_bound": self.declared_bound * self.support_radius,
                "measure_sum": math.fsum(self.measures)}


def _carry_round(ideal):
    """Integers with running sums equal to the rounded running sums of ideal."""
    c = np.round(np.cumsum(ideal) + 1e-9)
    return np.diff(np.concatenate([[0.0], c])).astype(np.int64)


def _rect_partition(lo, hi, n, mass):
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    rows = max(1, int(round(math.sqrt(n * h / w))))
    rows = min(rows, n)
    counts = _carry_round(np.full(rows, n / rows))
    cells = []
    done = 0
    for k in counts:
        y0 = lo[1] + h * done / n
        y1 = lo[1] + h * (done + k) / n
        for j in range(k):
            x0 = lo[0] + w * j / k
            x1 = lo[0] + w * (j + 1) / k
            cells.append(RectCell(x0, x1, y0, y1, ((x1 - x0) * (y1 - y0)) / mass))
        done += k
    return cells


def _disk_partition(R, n):
    if n == 1:
        return [SectorCell(0.0, R, 0.0, 2 * np.pi, 1.0)]
    K = max(1, int(round(math.sqrt(n / np.pi) - 0.5)))
    rho = (np.arange(K + 1) + 0.5) / (K + 0.5)
    cum = np.round(n * rho ** 2).astype(np.int64)
    cum[0] = 1
    cum[-1] = n
    cum = np.maximum.accumulate(cum)
    cum = np.unique(cum)
    cells = [SectorCell(0.0, R * math.sqrt(1.0 / n), 0.0, 2 * np.pi, 1.0 / n)]
    prev = 1
    for c in cum[1:]:
        k = int(c - prev)
        r1, r2 = R * math.sqrt(prev / n), R * math.sqrt(c / n)
        for j in range(k):
            a1 = 2 * np.pi * j / k
            a2 = 2 * np.pi * (j + 1) / k
            # exact area of the sector over the disk area
            cells.append(SectorCell(r1, r2, a1, a2, ((c - prev) / n) / k))
        prev = c
    return cells


def _fast_area(v):
    if v.shape[0] < 3:
        return 0.0
    x = v[:, 0] - v[:, 0].mean()
    y = v[:, 1]
    return 0.5 * float(np.sum(x * (np.roll(y, -1) - np.roll(y, 1))))


# diagonal directions were tried too; they cost twice as much for no gain
_CUT_NORMALS = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def _bbox_diag(v):
    return float(np.linalg.norm(v.max(axis=0) - v.min(axis=0))) if v.shape[0] else 0.0


def _bisect(v, k, area, out):
    # split v into k pieces of equal area by a straight cut; of the candidate
    # directions, keep the cut whose larger child has the smaller bounding box
    if k == 1:
        out.append(v)
        return
    k1 = k // 2
    target = area * k1 / k
    best = None
    for nrm in _CUT_NORMALS:
        h = v @ nrm
        f = lambda s: _fast_area(geo.clip_polygon(v, nrm, s)) - target
        s = brentq(f, h.min(), h.max(), xtol=1e-15, maxiter=200)
        left = geo.clip_polygon(v, nrm, s)
        right = geo.clip_polygon(v, -nrm, -s)
        score = max(_bbox_diag(left), _bbox_diag(right))
        if best is None or score < best[0]:
            best = (score, left, right)
    _bisect(best[1], k1, target, out)
    _bisect(best[2], k - k1, area - target, out)


def _polygon_partition(v, n):
    pieces = []
    total = abs(geo.polygon_area(v))
    v = v if geo.polygon_area(v) > 0 else v[::-1]
    _bisect(np.asarray(v, dtype=float), n, total, pieces)
    return [PolygonCell(p, abs(geo.polygon_area(p)) / total) for p in pieces]


def _arc_partition(curve, n, centered):
    off = -0.5 / n if centered else 0.0
    return [ArcCell(off + j / n, off + (j + 1) / n, 1.0 / n, curve) for j in range(n)]


def _sphere_partition(R, n):
    if n == 1:
        return [ZoneCell(-1.0, 1.0, 0.0, 2 * np.pi, R, 1.0)]
    if n == 2:
        return [ZoneCell(0.0, 1.0, 0.0, 2 * np.pi, R, 0.5), ZoneCell(-1.0, 0.0, 0.0, 2 * np.pi, R, 0.5)]
    area = 4 * np.pi / n
    theta_c = 2 * math.asin(math.sqrt(1.0 / n))
    delta = math.sqrt(area)
    ncol = max(1, int(round((np.pi - 2 * theta_c) / delta)))
    fit = (np.pi - 2 * theta_c) / ncol
    bounds = theta_c + fit * np.arange(ncol + 1)
    ideal = 2 * np.pi * (np.cos(bounds[:-1]) - np.cos(bounds[1:])) / area
    counts = _carry_round(ideal)
    counts = counts[counts > 0]
    cells = [ZoneCell(1.0 - 2.0 / n, 1.0, 0.0, 2 * np.pi, R, 1.0 / n)]
    done = 1
    for k in counts:
        # colatitudes from cumulative counts keep every collar exactly equal-area
        z_top = 1.0 - 2.0 * done / n
        z_bot = 1.0 - 2.0 * (done + k) / n
        phase = 0.0 if len(cells) % 2 else np.pi / k
        for j in range(k):
            a1 = phase + 2 * np.pi * j / k
            cells.append(ZoneCell(z_bot, z_top, a1, a1 + 2 * np.pi / k, R, ((z_top - z_bot) / 2) / k))
        done += k
    cells.append(ZoneCell(-1.0, -1.0 + 2.0 / n, 0.0, 2 * np.pi, R, 1.0 / n))
    return cells


def partition(mu, n):
    """Equal-measure partition of the support of μ into n cells."""
    if n < 1:
        raise LabError("n must be >= 1")
    if isinstance(mu, msr.LebesgueOnShape) and mu.dim == 2:
        E = mu.support
        if isinstance(E, geo.ConvexPolygon) and E.is_axis_rectangle():
            lo, hi = E.bbox()
            return EqualMeasurePartition("rectangle", _rect_partition(lo, hi, n, mu.mass), 2,
                                         E.bounding_radius, 3.0)
        if isinstance(E, geo.Ball):
            return EqualMeasurePartition("disk", _disk_partition(E.radius, n), 2, E.radius, 6.0)
        if isinstance(E, (geo.ConvexPolygon, geo.KochRegion)):
            kind = "koch-region" if isinstance(E, geo.KochRegion) else "polygon"
            return EqualMeasurePartition(kind, _polygon_partition(E.vertex_array, n), 2,
                                         E.bounding_radius, 8.0)
    if isinstance(mu, msr.KochCurveMeasure):
        # a block of measure 1/N spans about log_4 N subdivision levels, so its
        # diameter scales like N^{-1/α}, not N^{-1}
        return EqualMeasurePartition("koch-curve", _arc_partition(_KochCurve(mu.level), n, False),
                                     mu.alpha, mu.support_radius, 8.0)
    if isinstance(mu, msr.CircleArcMeasure):
        return EqualMeasurePartition("circle", _arc_partition(_Circle(mu.radius), n, True), 1,
                                     mu.radius, 2 * np.pi)
    if isinstance(mu, msr.SphereSurfaceMeasure):
        return EqualMeasurePartition("sphere", _sphere_partition(mu.radius, n), 2, mu.radius, 8.0)
    raise LabError(f"no partition for {mu.ident}; supported: " + ", ".join(SUPPORTED_PARTITIONS))


def partition_points(mu, n, seed=None, jitter=False):
    """One point per cell: the cell representative, or a uniform draw when jitter is set."""
    part = partition(mu, n)
    if jitter:
        rng = np.random.default_rng(seed)
        pts = np.array([c.sample(rng) for c in part.cells])
    else:
        pts = part.representatives()
    return PointSet(pts, "partition", seed, mu.ident)
