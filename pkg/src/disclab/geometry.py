"""Bodies, poses and the geometric measurements the discrepancy bounds rest on.

Shapes are immutable dataclasses. Membership is always tested in the body's
own frame: a posed copy ``x + τσΩ`` contains ``p`` iff ``σ⁻¹(p − x)/τ ∈ Ω``.
Points exactly on a bounded body's boundary count as inside. Half-spaces keep
the strict inequality ``x·Θ > ρ`` so that a half-space and its complement
split every point set exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import LabError, ResourceLimitError, UnboundedError
from .rotations import rotation_matrices

LOG3_4 = math.log(4.0) / math.log(3.0)
KOCH_BETA = 2.0 - LOG3_4
SQRT3 = math.sqrt(3.0)
MAX_KOCH_LEVEL = 12


class Estimate(NamedTuple):
    value: float
    stderr: float


# ---------------------------------------------------------------- poses

@dataclass(frozen=True)
class AffinePose:
    """Translation x, dilation τ and rotation σ (angle for d=2, quaternion for d=3)."""

    translation: tuple
    dilation: float = 1.0
    rotation: float | tuple = 0.0

    def __post_init__(self):
        x = tuple(float(v) for v in self.translation)
        if len(x) not in (2, 3):
            raise LabError(f"dimension {len(x)} not supported (only d = 2 or 3)")
        if not all(math.isfinite(v) for v in x):
            raise LabError("translation must be finite")
        if not (self.dilation > 0 and math.isfinite(self.dilation)):
            raise LabError("dilation must be positive")
        object.__setattr__(self, "translation", x)
        object.__setattr__(self, "dilation", float(self.dilation))
        if len(x) == 2:
            if np.ndim(self.rotation) != 0:
                raise LabError("planar rotation is a single angle")
            object.__setattr__(self, "rotation", float(self.rotation) % (2 * math.pi))
        else:
            q = np.asarray(self.rotation if np.ndim(self.rotation) else (1.0, 0, 0, 0), dtype=float)
            if q.shape != (4,):
                raise LabError("spatial rotation is a unit quaternion (w, x, y, z)")
            q = q / np.linalg.norm(q)
            object.__setattr__(self, "rotation", tuple(float(v) for v in q))

    @classmethod
    def identity(cls, d=2):
        return cls((0.0,) * d, 1.0, 0.0 if d == 2 else (1.0, 0.0, 0.0, 0.0))

    @property
    def dim(self):
        return len(self.translation)

    def matrix(self):
        return rotation_matrices(self.rotation, self.dim)

    def to_local(self, p):
        p = np.asarray(p, dtype=np.float64)
        return ((p - np.asarray(self.translation)) @ self.matrix()) / self.dilation

    def to_world(self, q):
        q = np.asarray(q, dtype=np.float64)
        return self.dilation * (q @ self.matrix().T) + np.asarray(self.translation)


@dataclass(frozen=True)
class PoseBatch:
    """Many poses as arrays; rotations are angles (P,) or quaternions (P, 4)."""

    translations: np.ndarray
    dilations: np.ndarray
    rotations: np.ndarray

    @property
    def dim(self):
        return self.translations.shape[1]

    def __len__(self):
        return self.translations.shape[0]

    def __getitem__(self, i):
        rot = self.rotations[i]
        return AffinePose(tuple(self.translations[i]), float(self.dilations[i]),
                          float(rot) if self.dim == 2 else tuple(rot))

    def matrices(self):
        return rotation_matrices(self.rotations, self.dim)

    def subset(self, sl):
        return PoseBatch(self.translations[sl], self.dilations[sl], self.rotations[sl])

    @classmethod
    def from_poses(cls, poses):
        poses = list(poses)
        return cls(np.array([p.translation for p in poses], dtype=float),
                   np.array([p.dilation for p in poses], dtype=float),
                   np.array([p.rotation for p in poses], dtype=float))


# ---------------------------------------------------------------- polygon helpers

def polygon_area(v):
    """Signed shoelace area."""
    x, y = v[:, 0] - v[:, 0].mean(), v[:, 1]
    return 0.5 * math.fsum(x * (np.roll(y, -1) - np.roll(y, 1)))


def polygon_centroid(v):
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)


def clip_polygon(v, normal, offset):
    """Sutherland-Hodgman clip keeping ``normal·x <= offset``.

    For a non-convex input the output may contain zero-width bridges along the
    cut line; its winding number, and therefore its area and moments, is still
    exact.
    """
    if v.shape[0] == 0:
        return v
    s = v @ np.asarray(normal, dtype=float) - offset
    ins = s <= 0
    s_n = np.roll(s, -1)
    v_n = np.roll(v, -1, axis=0)
    cross = ins != np.roll(ins, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, s / (s - s_n), 0.0)
    ip = v + t[:, None] * (v_n - v)
    cand = np.stack([v, ip], axis=1).reshape(-1, 2)
    mask = np.stack([ins, cross], axis=1).reshape(-1)
    return cand[mask]


def clip_box(v, lo, hi):
    for ax in range(2):
        n = np.zeros(2)
        n[ax] = 1.0
        v = clip_polygon(v, n, hi[ax])
        v = clip_polygon(v, -n, -lo[ax])
    return v


def polygon_disk_area(v, center, r):
    """Exact area of polygon ∩ closed disk via signed triangle-disk pieces."""
    a = v - np.asarray(center, dtype=float)
    if np.max(np.einsum("ij,ij->i", a, a)) <= r * r:
        # the disk is convex, so it holds the whole polygon
        return abs(polygon_area(v))
    b = np.roll(a, -1, axis=0)
    d = b - a
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - r * r
    disc = B * B - A * C
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(ok, np.clip((-B - sq) / A, 0.0, 1.0), 1.0)
        t1 = np.where(ok, np.clip((-B + sq) / A, 0.0, 1.0), 1.0)
    p0 = a + t0[:, None] * d
    p1 = a + t1[:, None] * d

    def sector(p, q):
        return 0.5 * r * r * np.arctan2(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0],
                                        np.einsum("ij,ij->i", p, q))

    tri = 0.5 * (p0[:, 0] * p1[:, 1] - p0[:, 1] * p1[:, 0])
    return float(np.sum(sector(a, p0) + tri + sector(p1, b)))


def _chord_antiderivative(x, r):
    # ∫ sqrt(r² − x²) dx
    x = np.clip(x, -r, r)
    return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(x / r))


def _quadrant_area(X, Y, r):
    """Area of disk(0, r) ∩ {x <= X, y <= Y}."""
    G = _chord_antiderivative
    X = np.clip(X, -r, r)
    w = np.sqrt(np.maximum(r * r - np.minimum(Y * Y, r * r), 0.0))
    lo, hi = -w, np.minimum(X, w)
    inner = np.where(hi > lo, Y * (hi - lo) + G(hi, r) - G(lo, r), 0.0)
    left = 2 * (G(np.minimum(X, -w), r) - G(-r, r))
    right = np.where(X > w, 2 * (G(X, r) - G(w, r)), 0.0)
    res = inner + np.where(Y >= 0, left + right, 0.0)
    res = np.where(Y >= r, 2 * (G(X, r) - G(-r, r)), res)
    return np.where(Y <= -r, 0.0, res)


def disk_rect_area(cx, cy, r, x0, x1, y0, y1):
    """Exact area of disk(s) ∩ [x0, x1] × [y0, y1]; vectorized over disks."""
    cx, cy, r = np.broadcast_arrays(np.asarray(cx, float), np.asarray(cy, float),
                                    np.asarray(r, float))
    f = lambda X, Y: _quadrant_area(X - cx, Y - cy, r)
    return np.maximum(f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0), 0.0)


def lens_area(d, r1, r2):
    """Area of the intersection of two disks with center distance d."""
    d, r1, r2 = np.broadcast_arrays(np.asarray(d, float), np.asarray(r1, float), np.asarray(r2, float))
    out = np.zeros(d.shape)
    inner = d <= np.abs(r1 - r2)
    out[inner] = np.pi * np.minimum(r1, r2)[inner] ** 2
    part = (~inner) & (d < r1 + r2)
    if np.any(part):
        dd, a, b = d[part], r1[part], r2[part]
        c1 = np.clip((dd * dd + a * a - b * b) / (2 * dd * a), -1, 1)
        c2 = np.clip((dd * dd + b * b - a * a) / (2 * dd * b), -1, 1)
        k = (-dd + a + b) * (dd + a - b) * (dd - a + b) * (dd + a + b)
        out[part] = a * a * np.arccos(c1) + b * b * np.arccos(c2) - 0.5 * np.sqrt(np.maximum(k, 0))
    return out


def lens_volume(d, r1, r2):
    """Volume of the intersection of two balls in R^3 with center distance d."""
    d, r1, r2 = np.broadcast_arrays(np.asarray(d, float), np.asarray(r1, float), np.asarray(r2, float))
    out = np.zeros(d.shape)
    inner = d <= np.abs(r1 - r2)
    out[inner] = 4 / 3 * np.pi * np.minimum(r1, r2)[inner] ** 3
    part = (~inner) & (d < r1 + r2)
    if np.any(part):
        dd, a, b = d[part], r1[part], r2[part]
        out[part] = (np.pi * (a + b - dd) ** 2
                     * (dd * dd + 2 * dd * (a + b) - 3 * (a - b) ** 2) / (12 * dd))
    return out


def disk_halfplane_area(r, s):
    """Area of disk(0, r) ∩ {x·Θ > s}."""
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    u = np.clip(s / r, -1, 1)
    return r * r * (np.arccos(u) - u * np.sqrt(1 - u * u))


def ball_halfspace_volume(r, s):
    """Volume of ball(0, r) ∩ {x·Θ > s} in R^3."""
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    h = np.clip(r - s, 0, 2 * r)
    return np.pi * h * h * (3 * r - h) / 3


# ---------------------------------------------------------------- indexes

@dataclass(frozen=True)
class SlabIndex:
    """Edges bucketed into horizontal slabs for point-in-polygon queries."""

    x0: np.ndarray
    y0: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    ybase: float
    inv_h: float
    ptr: np.ndarray
    idx: np.ndarray


def _ranges(starts, counts):
    total = int(counts.sum())
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + np.arange(total) - offs


def build_slab_index(v, nslab=None):
    v = np.asarray(v, dtype=np.float64)
    ne = v.shape[0]
    nslab = int(nslab or min(max(ne // 8, 16), 1 << 16))
    x0, y0 = np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])
    x1, y1 = np.ascontiguousarray(np.roll(x0, -1)), np.ascontiguousarray(np.roll(y0, -1))
    ylo, yhi = float(y0.min()), float(y0.max())
    pad = 1e-9 * max(yhi - ylo, 1e-300)
    ybase = ylo - pad
    inv_h = nslab / (yhi - ylo + 2 * pad)
    s0 = np.clip(np.floor((np.minimum(y0, y1) - ybase) * inv_h), 0, nslab - 1).astype(np.int64)
    s1 = np.clip(np.floor((np.maximum(y0, y1) - ybase) * inv_h), 0, nslab - 1).astype(np.int64)
    cnt = s1 - s0 + 1
    slab = _ranges(s0, cnt)
    edge = np.repeat(np.arange(ne, dtype=np.int64), cnt)
    order = np.argsort(slab, kind="stable")
    idx = np.ascontiguousarray(edge[order])
    ptr = np.searchsorted(slab[order], np.arange(nslab + 1)).astype(np.int64)
    return SlabIndex(x0, y0, x1, y1, ybase, inv_h, ptr, idx)


@dataclass(frozen=True)
class SegmentSet:
    """Closed polyline edges sorted by midpoint abscissa, for clipping kernels."""

    x0: np.ndarray
    y0: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    midx: np.ndarray
    halfspan: float
    lengths: np.ndarray

    @classmethod
    def from_closed(cls, v):
        v = np.asarray(v, dtype=np.float64)
        w = np.roll(v, -1, axis=0)
        mid = 0.5 * (v[:, 0] + w[:, 0])
        o = np.argsort(mid, kind="stable")
        c = np.ascontiguousarray
        x0, y0, x1, y1 = c(v[o, 0]), c(v[o, 1]), c(w[o, 0]), c(w[o, 1])
        half = 0.5 * float(np.max(np.abs(x1 - x0))) * (1 + 1e-12) + 1e-15
        return cls(x0, y0, x1, y1, c(mid[o]), half, np.hypot(x1 - x0, y1 - y0))


def segment_distances(p, a, b):
    """Distance from points p to segments [a, b], all shaped (n, 2)."""
    d = b - a
    l2 = np.einsum("ij,ij->i", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(l2 > 0, np.einsum("ij,ij->i", p - a, d) / l2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * d
    return np.hypot(p[:, 0] - q[:, 0], p[:, 1] - q[:, 1])


def _near_segments(v, z, t, chunk=20000):
    """Boolean: is each point z within distance t of the closed polyline v?"""
    a = np.asarray(v, dtype=np.float64)
    b = np.roll(a, -1, axis=0)
    mid = 0.5 * (a + b)
    half = 0.5 * float(np.max(np.hypot(*(b - a).T)))
    tree = cKDTree(mid)
    out = np.zeros(z.shape[0], dtype=bool)
    for lo in range(0, z.shape[0], chunk):
        zz = z[lo:lo + chunk]
        lists = tree.query_ball_point(zz, t + half)
        cnt = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
        if cnt.sum() == 0:
            continue
        seg = np.fromiter((k for x in lists for k in x), dtype=np.int64, count=int(cnt.sum()))
        own = np.repeat(np.arange(zz.shape[0]), cnt)
        dist = segment_distances(zz[own], a[seg], b[seg])
        hit = np.zeros(zz.shape[0], dtype=bool)
        np.logical_or.at(hit, own, dist <= t)
        out[lo:lo + chunk] = hit
    return out


# ---------------------------------------------------------------- Koch construction

@lru_cache(maxsize=16)
def _koch_vertices(level):
    h = SQRT3 / 6.0
    v = np.array([[-0.5, -h], [0.5, -h], [0.0, 2 * h]])
    c, s = math.cos(-math.pi / 3), math.sin(-math.pi / 3)
    rot = np.array([[c, -s], [s, c]])
    for _ in range(level):
        d = np.roll(v, -1, axis=0) - v
        a = v + d / 3
        b = v + 2 * d / 3
        tip = a + (d / 3) @ rot.T
        v = np.stack([v, a, tip, b], axis=1).reshape(-1, 2)
    v.setflags(write=False)
    return v


def koch_polygon(level):
    """Vertices of the level-n snowflake polygon K_n, counterclockwise.

    The base is the unit equilateral triangle with horizontal bottom side and
    centroid at the origin; each refinement replaces the middle third of every
    edge by the two outer sides of an equilateral bump.
    """
    if int(level) != level or level < 0:
        raise LabError("level must be a non-negative integer")
    if level > MAX_KOCH_LEVEL:
        raise ResourceLimitError(f"level {level} exceeds the limit {MAX_KOCH_LEVEL}")
    return _koch_vertices(int(level))


def koch_area(level):
    """area(K_n) = 2√3/5 − (3√3/20)(4/9)^n."""
    return 2 * SQRT3 / 5 - pendant_area(level)


def pendant_area(level):
    """|F_n| = (3√3/20)(4/9)^n, the area still to be added beyond level n."""
    return 3 * SQRT3 / 20 * (4.0 / 9.0) ** level


def koch_curve_point(level, s):
    """Points of the level-n curve at normalized arclength s ∈ [0, 1)."""
    v = koch_polygon(level)
    n = v.shape[0]
    u = np.asarray(s, dtype=float) % 1.0 * n
    k = np.minimum(np.floor(u).astype(np.int64), n - 1)
    f = (u - k)[..., None]
    return v[k] + f * (v[(k + 1) % n] - v[k])


@dataclass(frozen=True)
class SnowflakeDecomposition:
    """Ω = K_n ∪ F_n with F_n the pendant triangles of all levels k ≥ n."""

    level: int
    depth: int = 40

    def __post_init__(self):
        if self.level < 0 or self.depth < 1:
            raise LabError("level must be >= 0 and depth >= 1")

    @property
    def polygon(self):
        return koch_polygon(self.level)

    def pendant_triangles(self):
        """Rows (k, count 3·4^k, side 3^{−k−1}) for k = n .. n+depth−1."""
        ks = np.arange(self.level, self.level + self.depth)
        return [(int(k), 3 * 4 ** int(k), 3.0 ** (-int(k) - 1)) for k in ks]

    def pendant_area(self):
        """Σ count·(√3/4)·side², summed with fsum over the stored depth."""
        return math.fsum(c * SQRT3 / 4 * s * s for _, c, s in self.pendant_triangles())

    def truncation_bound(self):
        return pendant_area(self.level + self.depth)


# ---------------------------------------------------------------- shapes

class Shape:
    """Common interface; subclasses are frozen dataclasses."""

    dim = 2
    bounded = True

    @property
    def bounding_radius(self) -> float:
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    def contains_local(self, q):
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"variant": type(self).__name__}
        for f in self.__dataclass_fields__:
            val = getattr(self, f)
            d[f] = [list(x) for x in val] if f == "vertices" else (list(val) if isinstance(val, tuple) else val)
        return d


@dataclass(frozen=True)
class Ball(Shape):
    radius: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise LabError("ball radius must be positive")
        if self.dim not in (2, 3):
            raise LabError(f"dimension {self.dim} not supported (only d = 2 or 3)")

    @property
    def bounding_radius(self):
        return float(self.radius)

    def volume(self):
        return math.pi * self.radius ** 2 if self.dim == 2 else 4 / 3 * math.pi * self.radius ** 3

    def contains_local(self, q):
        return np.einsum("ij,ij->i", q, q) <= self.radius ** 2


class _PolygonShape(Shape):
    @cached_property
    def slab_index(self):
        return build_slab_index(self.vertex_array)

    @cached_property
    def segments(self):
        return SegmentSet.from_closed(self.vertex_array)

    @property
    def bounding_radius(self):
        return float(np.max(np.hypot(*self.vertex_array.T)))

    def contains_local(self, q):
        return kernels.pip_slab(self.slab_index, q[:, 0], q[:, 1])

    def boundary_distance(self, z):
        raise NotImplementedError


@dataclass(frozen=True)
class ConvexPolygon(_PolygonShape):
    vertices: tuple = ()

    def __post_init__(self):
        v = tuple(tuple(float(c) for c in p) for p in self.vertices)
        object.__setattr__(self, "vertices", v)
        a = np.asarray(v, dtype=float)
        if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] != 2:
            raise LabError("polygon needs at least 3 planar vertices")
        d = np.roll(a, -1, axis=0) - a
        cr = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
        if polygon_area(a) <= 0:
            raise LabError("polygon must be counterclockwise with positive area")
        if np.any(cr < -1e-12 * np.max(np.abs(a)) ** 2):
            raise LabError("polygon is not convex (or not simple)")

    @cached_property
    def vertex_array(self):
        a = np.asarray(self.vertices, dtype=np.float64)
        a.setflags(write=False)
        return a

    def volume(self):
        return polygon_area(self.vertex_array)

    def contains_local(self, q):
        # half-plane tests; boundary counts inside
        a = self.vertex_array
        d = np.roll(a, -1, axis=0) - a
        scale = 1e-12 * np.hypot(d[:, 0], d[:, 1])
        cr = d[None, :, 0] * (q[:, None, 1] - a[None, :, 1]) - d[None, :, 1] * (q[:, None, 0] - a[None, :, 0])
        return np.all(cr >= -scale[None, :], axis=1)

    def is_axis_rectangle(self):
        a = self.vertex_array
        if a.shape[0] != 4:
            return False
        xs, ys = np.unique(a[:, 0]), np.unique(a[:, 1])
        return xs.size == 2 and ys.size == 2

    def bbox(self):
        a = self.vertex_array
        return a.min(axis=0), a.max(axis=0)


def unit_square(centered=True):
    """The side-1 square, centered at the origin or spanning [0, 1]²."""
    o = -0.5 if centered else 0.0
    return ConvexPolygon(((o, o), (o + 1, o), (o + 1, o + 1), (o, o + 1)))


def regular_polygon(k, circumradius=1.0, phase=0.0):
    t = phase + 2 * np.pi * np.arange(k) / k
    return ConvexPolygon(tuple(zip(circumradius * np.cos(t), circumradius * np.sin(t))))


@dataclass(frozen=True)
class KochRegion(_PolygonShape):
    """The level-n snowflake polygon K_n standing in for the snowflake region."""

    level: int = 8

    def __post_init__(self):
        koch_polygon(self.level)

    @property
    def vertex_array(self):
        return koch_polygon(self.level)

    @property
    def bounding_radius(self):
        return 1.0 / SQRT3

    def volume(self):
        return koch_area(self.level)

    def area_error_bound(self):
        """|true snowflake area − area(K_n)| = |F_n|."""
        return pendant_area(self.level)


@dataclass(frozen=True)
class KochCurvePolyline(_PolygonShape):
    """The closed curve C_n as a (zero-area) set; membership means lying on it."""

    level: int = 8

    def __post_init__(self):
        koch_polygon(self.level)

    @property
    def vertex_array(self):
        return koch_polygon(self.level)

    @property
    def bounding_radius(self):
        return 1.0 / SQRT3

    def volume(self):
        return 0.0

    def contains_local(self, q):
        return _near_segments(self.vertex_array, np.asarray(q, float), 1e-12)


@dataclass(frozen=True)
class RectangleUnionGamma(Shape):
    """⋃ R_n with R_n = [n^{−γ} − z_n/3, n^{−γ}] × [0, 1] and γ = β/(1 − β)."""

    beta: float = 0.5
    truncation: int | None = None

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise LabError("beta must lie in (0, 1)")
        g = self.beta / (1 - self.beta)
        t = self.truncation
        if t is None:
            t = int(math.floor(1e6 ** (1 / g))) + 1
        if t < 1:
            raise LabError("truncation must be positive")
        if t > 10_000_000:
            raise ResourceLimitError(f"truncation {t} too large for beta={self.beta}")
        object.__setattr__(self, "truncation", int(t))

    @property
    def gamma(self):
        return self.beta / (1 - self.beta)

    @cached_property
    def _tables(self):
        n = np.arange(1, self.truncation + 1, dtype=np.float64)
        right = n ** -self.gamma
        z = right - (n + 1) ** -self.gamma
        left = right - z / 3
        # ascending in x for searchsorted
        return left[::-1].copy(), right[::-1].copy(), z

    def rectangles(self):
        left, right, _ = self._tables
        return np.column_stack([left[::-1], right[::-1]])

    @property
    def bounding_radius(self):
        return math.sqrt(2.0)

    def stored_volume(self):
        return math.fsum(self._tables[2]) / 3

    def tail_volume(self):
        return (self.truncation + 1.0) ** -self.gamma / 3

    def volume(self):
        return self.stored_volume() + self.tail_volume()

    def contains_local(self, q):
        left, right, _ = self._tables
        x, y = q[:, 0], q[:, 1]
        k = np.searchsorted(right, x, side="left")
        kk = np.minimum(k, right.size - 1)
        return (k < right.size) & (left[kk] <= x) & (y >= 0) & (y <= 1)

    def boundary_distance(self, z):
        left, right, _ = self._tables
        edges = np.sort(np.concatenate([left, right]))
        x, y = z[:, 0], z[:, 1]
        k = np.searchsorted(edges, x)
        cand = np.stack([edges[np.clip(k - 1, 0, edges.size - 1)], edges[np.clip(k, 0, edges.size - 1)]])
        dx = np.min(np.abs(cand - x), axis=0)
        yout = np.maximum(np.maximum(-y, y - 1), 0.0)
        d_vert = np.hypot(dx, yout)
        inside_x = self.contains_local(np.column_stack([x, np.full_like(x, 0.5)]))
        d_h = np.hypot(np.where(inside_x, 0.0, dx), np.minimum(np.abs(y), np.abs(y - 1)))
        return np.minimum(d_vert, d_h)


@dataclass(frozen=True)
class HalfSpace(Shape):
    """Π(ρ, Θ) = {x : x·Θ > ρ} (strict, so complements split point sets exactly)."""

    theta: tuple = (0.0, 1.0)
    rho: float = 0.0
    bounded = False

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        if t.shape not in ((2,), (3,)):
            raise LabError("half-space normal must have 2 or 3 components")
        nrm = np.linalg.norm(t)
        if not nrm > 0:
            raise LabError("half-space normal must be nonzero")
        if abs(nrm - 1) > 1e-15:
            t = t / nrm
        object.__setattr__(self, "theta", tuple(float(v) for v in t))
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def dim(self):
        return len(self.theta)

    @property
    def bounding_radius(self):
        return math.inf

    def volume(self):
        raise UnboundedError("a half-space has infinite volume")

    def contains_local(self, q):
        return q @ np.asarray(self.theta) > self.rho


_VARIANTS = {c.__name__: c for c in (Ball, ConvexPolygon, KochRegion, KochCurvePolyline,
                                     RectangleUnionGamma, HalfSpace)}


def shape_from_dict(doc):
    doc = dict(doc)
    try:
        cls = _VARIANTS[doc.pop("variant")]
    except KeyError as e:
        raise LabError(f"unknown shape variant {e}") from None
    if cls is ConvexPolygon:
        doc["vertices"] = tuple(tuple(p) for p in doc["vertices"])
    if cls is HalfSpace:
        doc["theta"] = tuple(doc["theta"])
    return cls(**doc)


def shape_to_json(shape):
    return json.dumps(shape.to_dict(), sort_keys=True)


def shape_from_json(text):
    return shape_from_dict(json.loads(text))


def write_vertices_csv(path, v):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["x", "y"])
        for x, y in np.asarray(v):
            w.writerow([f"{x:.17g}", f"{y:.17g}"])


def read_vertices_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(a), float(b)] for a, b in rows[1:]])


# ---------------------------------------------------------------- membership and volume

def _as_points(p, d):
    a = np.asarray(p, dtype=np.float64)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != d:
        raise LabError(f"point dimension {a.shape[1]} does not match shape dimension {d}")
    if not np.all(np.isfinite(a)):
        raise LabError("points must be finite")
    return a, single


def contains(shape, pose, p):
    """Membership of p in x + τσΩ; pose None means identity."""
    d = shape.dim
    if d not in (2, 3):
        raise LabError(f"dimension {d} not supported (only d = 2 or 3)")
    pts, single = _as_points(p, d)
    if pose is not None:
        if pose.dim != d:
            raise LabError("pose and shape dimensions differ")
        pts = pose.to_local(pts)
    out = np.asarray(shape.contains_local(pts), dtype=bool)
    return bool(out[0]) if single else out


def volume(shape):
    if not shape.bounded:
        raise UnboundedError("volume of an unbounded shape")
    return shape.volume()


def bounding_box(shape):
    if isinstance(shape, Ball):
        r = shape.radius
        return np.full(shape.dim, -r), np.full(shape.dim, r)
    if isinstance(shape, _PolygonShape):
        v = shape.vertex_array
        return v.min(axis=0), v.max(axis=0)
    if isinstance(shape, RectangleUnionGamma):
        return np.zeros(2), np.ones(2)
    raise UnboundedError("unbounded shape has no bounding box")


# ---------------------------------------------------------------- sampled measurements

def _stratified(lo, hi, samples, rng):
    """Two uniform points in each of k^d equal boxes; returns (p1, p2, cell_volume)."""
    d = lo.size
    k = max(1, int((samples / 2) ** (1.0 / d)))
    grid = np.stack(np.meshgrid(*[np.arange(k)] * d, indexing="ij"), -1).reshape(-1, d)
    step = (hi - lo) / k
    p1 = lo + (grid + rng.random(grid.shape)) * step
    p2 = lo + (grid + rng.random(grid.shape)) * step
    return p1, p2, float(np.prod(step))


def _stratified_mean(f1, f2, cell):
    f1 = f1.astype(float)
    f2 = f2.astype(float)
    val = cell * 0.5 * float(np.sum(f1 + f2))
    var = cell * cell * float(np.sum((f1 - f2) ** 2)) / 4
    return Estimate(val, math.sqrt(var))


def symmetric_difference_volume(shape, h, samples=200_000, seed=0):
    """Monte Carlo |(h + Ω) △ Ω| with stratified sampling.

    Each sample p is tested at p − h, p and p + h, giving the two unbiased
    integrands 1[p ∈ Ω] ⊕ 1[p − h ∈ Ω] and 1[p ∈ Ω] ⊕ 1[p + h ∈ Ω]; their
    average is even in h by construction.
    """
    if not shape.bounded:
        raise UnboundedError("symmetric difference of an unbounded shape")
    if samples < 1000:
        raise LabError("samples must be at least 1000")
    if shape.volume() <= 0:
        raise LabError("zero-volume shape")
    h = np.asarray(h, dtype=float)
    if h.shape != (shape.dim,):
        raise LabError("shift dimension does not match shape")
    lo, hi = bounding_box(shape)
    lo = lo - np.abs(h)
    hi = hi + np.abs(h)
    rng = np.random.default_rng(seed)
    p1, p2, cell = _stratified(lo, hi, samples, rng)

    def f(p):
        c = shape.contains_local(p)
        return 0.5 * ((c != shape.contains_local(p - h)).astype(float)
                      + (c != shape.contains_local(p + h)).astype(float))

    return _stratified_mean(f(p1), f(p2), cell)


def symmetric_difference_exact(shape, h):
    """|(h + Ω) △ Ω| = 2(|Ω| − |Ω ∩ (h + Ω)|) for polygonal shapes, via exact clipping."""
    if not isinstance(shape, _PolygonShape):
        raise LabError("exact symmetric difference needs a polygonal shape")
    v = shape.vertex_array
    inter = polygon_intersection(v, v + np.asarray(h, float))
    return 2.0 * (shape.volume() - inter)


def polygon_intersection(a, b):
    """Area of the intersection of two counterclockwise simple polygons.

    Uses the active kernel; a NaN (parity failure on degenerate input) or an
    out-of-range value falls back to GEOS.
    """
    val = kernels.polygon_intersection_area(a, b)
    cap = min(abs(polygon_area(a)), abs(polygon_area(b)))
    if not (math.isfinite(val) and -1e-9 <= val <= cap * (1 + 1e-9) + 1e-12):
        val = kernels.polygon_intersection_area(a, b, impl=kernels.backend("python"))
    return max(val, 0.0)


def boundary_distance(shape, z):
    z = np.asarray(z, dtype=float)
    if isinstance(shape, Ball):
        return np.abs(np.linalg.norm(z, axis=1) - shape.radius)
    if isinstance(shape, _PolygonShape):
        a = shape.vertex_array
        return _polyline_distance(a, z)
    if isinstance(shape, RectangleUnionGamma):
        return shape.boundary_distance(z)
    raise UnboundedError("boundary distance needs a bounded shape")


def _polyline_distance(a, z):
    b = np.roll(a, -1, axis=0)
    if a.shape[0] <= 64:
        out = np.full(z.shape[0], np.inf)
        for i in range(a.shape[0]):
            out = np.minimum(out, segment_distances(z, np.broadcast_to(a[i], z.shape),
                                                    np.broadcast_to(b[i], z.shape)))
        return out
    mid = 0.5 * (a + b)
    half = 0.5 * float(np.max(np.hypot(*(b - a).T)))
    tree = cKDTree(mid)
    dm, _ = tree.query(z)
    # any segment closer than dm - half must have its midpoint within dm + half
    out = np.empty(z.shape[0])
    lists = tree.query_ball_point(z, dm + 2 * half)
    for i, cand in enumerate(lists):
        c = np.asarray(cand)
        out[i] = segment_distances(np.broadcast_to(z[i], (c.size, 2)), a[c], b[c]).min()
    return out


def minkowski_shell_volume(shape, t, samples=200_000, seed=0):
    """Monte Carlo |{z : dist(z, ∂Ω) <= t}| with exact distances to the boundary."""
    if not t > 0:
        raise LabError("shell width must be positive")
    if not shape.bounded:
        raise UnboundedError("shell of an unbounded shape")
    lo, hi = bounding_box(shape)
    lo, hi = lo - t, hi + t
    rng = np.random.default_rng(seed)
    p1, p2, cell = _stratified(lo, hi, samples, rng)
    if isinstance(shape, _PolygonShape):
        f = lambda p: _near_segments(shape.vertex_array, p, t)
    else:
        f = lambda p: boundary_distance(shape, p) <= t
    return _stratified_mean(f(p1), f(p2), cell)


@dataclass(frozen=True)
class BetaFit:
    beta_hat: float
    kappa1_hat: float
    kappa2_hat: float
    kappa3: float
    t: tuple = field(default_factory=tuple)
    values: tuple = field(default_factory=tuple)
    stderrs: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fit_beta(shape, direction, t_sequence, samples=200_000, seed=0, kappa3=None):
    """Fit β in |(tΘ + Ω) △ Ω| ≍ t^β along a fixed direction Θ.

    κ₁ and κ₂ are the max and min of |△|/t^β̂ over the sequence. The largest
    consecutive ratio t_n/t_{n+1} is reported as κ₃ and checked when given.
    """
    t = np.asarray(t_sequence, dtype=float)
    if t.ndim != 1 or t.size < 4:
        raise LabError("need at least 4 scales")
    if np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise LabError("t_sequence must be positive and strictly decreasing")
    ratio = float(np.max(t[:-1] / t[1:]))
    if kappa3 is not None and ratio > kappa3:
        raise LabError(f"t_sequence is lacunary: ratio {ratio:.4g} > kappa3 {kappa3}")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    seeds = np.random.SeedSequence(seed).spawn(t.size)
    est = [symmetric_difference_volume(shape, ti * u, samples, s) for ti, s in zip(t, seeds)]
    vals = np.array([e.value for e in est])
    if np.any(vals <= 0):
        raise LabError("symmetric difference estimate vanished; increase samples")
    slope = float(np.polyfit(np.log(t), np.log(vals), 1)[0])
    r = vals / t ** slope
    return BetaFit(slope, float(r.max()), float(r.min()), ratio, tuple(t.tolist()),
                   tuple(vals.tolist()), tuple(float(e.stderr) for e in est))
