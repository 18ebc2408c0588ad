"""Probability measures with a growth exponent α.

Every measure supports exact evaluation on posed bodies where a closed form
or exact clipping exists; other pairs go through an ``EmpiricalMeasure``
surrogate, which must be supplied explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry as geo
from . import kernels
from .bessel import besselj, jinc, spherical_j1_ratio
from .errors import LabError, UnsupportedPairError
from .geometry import (AffinePose, Ball, ConvexPolygon, Estimate, HalfSpace, KochRegion,
                       PoseBatch)

FOURIER_CUTOFF = 1.0e4


# ---------------------------------------------------------------- maps for pushforwards

@dataclass(frozen=True)
class AffineMap:
    """y = A x + b with a user-supplied lower Lipschitz constant C₁."""

    matrix: tuple
    offset: tuple
    lower_lipschitz: float

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] not in (2, 3):
            raise LabError("affine map needs a 2x2, 3x2 or 3x3 matrix")
        smin = np.linalg.svd(A, compute_uv=False).min()
        if not 0 < self.lower_lipschitz <= smin * (1 + 1e-12):
            raise LabError(f"C1={self.lower_lipschitz} exceeds the smallest singular value {smin:.6g}")
        object.__setattr__(self, "matrix", tuple(tuple(float(c) for c in r) for r in A))
        object.__setattr__(self, "offset", tuple(float(c) for c in self.offset))

    @property
    def out_dim(self):
        return len(self.matrix)

    def __call__(self, x):
        return np.asarray(x) @ np.asarray(self.matrix).T + np.asarray(self.offset)

    def stretch(self):
        return float(np.linalg.norm(np.asarray(self.matrix), 2))

    def to_dict(self):
        return {"kind": "affine", "matrix": [list(r) for r in self.matrix],
                "offset": list(self.offset), "lower_lipschitz": self.lower_lipschitz}


@dataclass(frozen=True)
class RadialGraphMap:
    """Lift a planar measure onto the surface z = a·|x|², x ↦ (x, a|x|²).

    Graph maps never shrink distances, so any C₁ <= 1 is valid.
    """

    amplitude: float = 1.0
    lower_lipschitz: float = 1.0

    def __post_init__(self):
        if not 0 < self.lower_lipschitz <= 1:
            raise LabError("a graph map has lower Lipschitz constant at most 1")

    out_dim = 3

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.column_stack([x, self.amplitude * np.einsum("ij,ij->i", x, x)])

    def stretch(self):
        return math.inf

    def to_dict(self):
        return {"kind": "radial-graph", "amplitude": self.amplitude,
                "lower_lipschitz": self.lower_lipschitz}


def map_from_dict(doc):
    doc = dict(doc)
    kind = doc.pop("kind")
    if kind == "affine":
        return AffineMap(tuple(map(tuple, doc["matrix"])), tuple(doc["offset"]), doc["lower_lipschitz"])
    if kind == "radial-graph":
        return RadialGraphMap(**doc)
    raise LabError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------- measures

class Measure:
    dim = 2
    alpha = 2.0

    @property
    def growth_constant(self):
        """Declared c in μ(B(x, r)) <= c r^α where a rigorous value is known, else None."""
        return None

    @property
    def support_radius(self) -> float:
        raise NotImplementedError

    @property
    def ident(self) -> str:
        return type(self).__name__

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class LebesgueOnShape(Measure):
    """Normalized Lebesgue measure on a bounded body E."""

    support: object = None

    def __post_init__(self):
        s = self.support
        if s is None or not s.bounded or s.volume() <= 0:
            raise LabError("Lebesgue measure needs a bounded support with positive volume")

    @property
    def dim(self):
        return self.support.dim

    @property
    def alpha(self):
        return float(self.dim)

    @property
    def growth_constant(self):
        omega = math.pi if self.dim == 2 else 4 * math.pi / 3
        return omega / self.support.volume()

    @property
    def support_radius(self):
        return self.support.bounding_radius

    @cached_property
    def mass(self):
        return self.support.volume()

    @property
    def ident(self):
        return "lebesgue:" + geo.shape_to_json(self.support)

    def to_dict(self):
        return {"variant": "LebesgueOnShape", "support": self.support.to_dict(),
                "alpha": self.alpha, "growth_constant": self.growth_constant}


@dataclass(frozen=True)
class KochCurveMeasure(Measure):
    """Mass (3·4^n)⁻¹ spread uniformly along each segment of C_n."""

    level: int = 8

    def __post_init__(self):
        geo.koch_polygon(self.level)

    alpha = geo.LOG3_4

    @property
    def support_radius(self):
        return 1.0 / geo.SQRT3

    @property
    def vertices(self):
        return geo.koch_polygon(self.level)

    @cached_property
    def segments(self):
        return geo.SegmentSet.from_closed(self.vertices)

    @property
    def n_segments(self):
        return 3 * 4 ** self.level

    @property
    def total_length(self):
        return 3.0 * (4.0 / 3.0) ** self.level

    @property
    def ident(self):
        return f"koch-curve:{self.level}"

    def to_dict(self):
        return {"variant": "KochCurveMeasure", "level": self.level, "alpha": self.alpha,
                "growth_constant": None}


@dataclass(frozen=True)
class CircleArcMeasure(Measure):
    """Normalized arclength on the circle of the given radius centered at 0."""

    radius: float = 1.0 / (2 * math.pi)

    def __post_init__(self):
        if not self.radius > 0:
            raise LabError("circle radius must be positive")

    alpha = 1.0

    @property
    def growth_constant(self):
        # arc plus chord bounds a convex set inside the ball, so arc <= 2πr
        return 1.0 / self.radius

    @property
    def support_radius(self):
        return float(self.radius)

    @property
    def ident(self):
        return f"circle:{self.radius!r}"

    def to_dict(self):
        return {"variant": "CircleArcMeasure", "radius": self.radius, "alpha": self.alpha,
                "growth_constant": self.growth_constant}


@dataclass(frozen=True)
class SphereSurfaceMeasure(Measure):
    """Normalized surface measure on the 2-sphere of the given radius in R³."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise LabError("sphere radius must be positive")

    dim = 3
    alpha = 2.0

    @property
    def growth_constant(self):
        # a convex cap inside a ball of radius r has area <= 4πr²
        return 1.0 / self.radius ** 2

    @property
    def support_radius(self):
        return float(self.radius)

    @property
    def ident(self):
        return f"sphere:{self.radius!r}"

    def to_dict(self):
        return {"variant": "SphereSurfaceMeasure", "radius": self.radius, "alpha": self.alpha,
                "growth_constant": self.growth_constant}


@dataclass(frozen=True)
class Pushforward(Measure):
    """Image of a base measure under a bi-Lipschitz map.

    If the map satisfies |Φ(x) − Φ(y)| >= C₁|x − y|, a ball of radius r pulls
    back into a ball of radius 2r/C₁, so α is kept and c grows by (2/C₁)^α.
    """

    base: Measure = None
    map: object = None

    @property
    def dim(self):
        return self.map.out_dim

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def growth_constant(self):
        c = self.base.growth_constant
        return None if c is None else c * (2.0 / self.map.lower_lipschitz) ** self.alpha

    @property
    def support_radius(self):
        r0 = self.base.support_radius
        m = self.map
        if isinstance(m, AffineMap):
            return m.stretch() * r0 + float(np.linalg.norm(m.offset))
        return math.hypot(r0, m.amplitude * r0 * r0)

    @property
    def ident(self):
        return f"pushforward:{self.base.ident}"

    def to_dict(self):
        return {"variant": "Pushforward", "base": self.base.to_dict(), "map": self.map.to_dict(),
                "alpha": self.alpha, "growth_constant": self.growth_constant}


def measure_from_dict(doc):
    doc = dict(doc)
    v = doc.pop("variant")
    doc.pop("alpha", None)
    doc.pop("growth_constant", None)
    if v == "LebesgueOnShape":
        return LebesgueOnShape(geo.shape_from_dict(doc["support"]))
    if v == "KochCurveMeasure":
        return KochCurveMeasure(**doc)
    if v == "CircleArcMeasure":
        return CircleArcMeasure(**doc)
    if v == "SphereSurfaceMeasure":
        return SphereSurfaceMeasure(**doc)
    if v == "Pushforward":
        return Pushforward(measure_from_dict(doc["base"]), map_from_dict(doc["map"]))
    raise LabError(f"unknown measure variant {v!r}")


def uniform_square():
    return LebesgueOnShape(geo.unit_square())


# ---------------------------------------------------------------- empirical surrogate

@dataclass(frozen=True)
class EmpiricalMeasure:
    """M equally weighted atoms drawn from a measure."""

    atoms: np.ndarray
    source_seed: int | None = None

    @classmethod
    def from_measure(cls, mu, m, seed=0):
        return cls(sample_array(mu, m, seed), seed)

    @property
    def size(self):
        return self.atoms.shape[0]

    def evaluate(self, shape, pose):
        p = float(np.mean(geo.contains(shape, pose, self.atoms)))
        return Estimate(p, 2 * math.sqrt(p * (1 - p) / self.size))

    def fourier_coefficient(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        ph = np.exp(-2j * np.pi * (xi @ self.atoms.T))
        return ph.mean(axis=1)


# ---------------------------------------------------------------- evaluation

def _posed_halfspace(shape, poses):
    """World normals and offsets of posed half-spaces: p·n > c."""
    th = np.asarray(shape.theta)
    n = poses.matrices() @ th
    c = poses.dilations * shape.rho + np.einsum("ij,ij->i", poses.translations, n)
    return n, c


def _polygon_vertices(support):
    if isinstance(support, (ConvexPolygon, KochRegion)):
        return support.vertex_array
    return None


def _segment_fraction_halfspace(x0, y0, x1, y1, n, c):
    s0 = x0 * n[0] + y0 * n[1] - c
    s1 = x1 * n[0] + y1 * n[1] - c
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(s0 != s1, s0 / (s0 - s1), 0.0)
    frac = np.where(s0 > 0, np.where(s1 > 0, 1.0, t), np.where(s1 > 0, 1.0 - t, 0.0))
    return frac


def _curve_in_convex(segs, vertices, pose):
    """Summed fractions of segments inside a posed convex polygon (Cyrus-Beck)."""
    a = pose.to_local(np.column_stack([segs.x0, segs.y0]))
    b = pose.to_local(np.column_stack([segs.x1, segs.y1]))
    d = b - a
    lo = np.zeros(a.shape[0])
    hi = np.ones(a.shape[0])
    v = np.asarray(vertices)
    e = np.roll(v, -1, axis=0) - v
    for k in range(v.shape[0]):
        # inside: cross(e_k, p - v_k) >= 0
        num = e[k, 0] * (a[:, 1] - v[k, 1]) - e[k, 1] * (a[:, 0] - v[k, 0])
        den = e[k, 0] * d[:, 1] - e[k, 1] * d[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -num / den
        enter = den > 0
        leave = den < 0
        lo = np.where(enter, np.maximum(lo, t), lo)
        hi = np.where(leave, np.minimum(hi, t), hi)
        parallel_out = (den == 0) & (num < 0)
        hi = np.where(parallel_out, -1.0, hi)
    return float(np.sum(np.clip(hi - lo, 0.0, None)))


def exact_batch(mu, shape, poses):
    """Exact μ(x + τσΩ) for every pose, or None when no exact path exists."""
    P = len(poses)
    X, tau = poses.translations, poses.dilations
    if isinstance(mu, LebesgueOnShape):
        E = mu.support
        ev = _polygon_vertices(E)
        if isinstance(shape, Ball):
            r = tau * shape.radius
            if isinstance(E, ConvexPolygon) and E.is_axis_rectangle():
                lo, hi = E.bbox()
                return geo.disk_rect_area(X[:, 0], X[:, 1], r, lo[0], hi[0], lo[1], hi[1]) / mu.mass
            if ev is not None:
                return np.array([geo.polygon_disk_area(ev, X[i], r[i]) for i in range(P)]) / mu.mass
            if isinstance(E, Ball):
                dist = np.linalg.norm(X, axis=1)
                f = geo.lens_area if E.dim == 2 else geo.lens_volume
                return f(dist, E.radius, r) / mu.mass
        if isinstance(shape, HalfSpace):
            n, c = _posed_halfspace(shape, poses)
            if ev is not None:
                return np.array([abs(geo.polygon_area(geo.clip_polygon(ev, -n[i], -c[i])))
                                 for i in range(P)]) / mu.mass
            if isinstance(E, Ball):
                f = geo.disk_halfplane_area if E.dim == 2 else geo.ball_halfspace_volume
                return f(E.radius, c) / mu.mass
        if isinstance(shape, (ConvexPolygon, KochRegion)):
            ov = shape.vertex_array
            if ev is not None:
                return np.array([geo.polygon_intersection(ev, poses[i].to_world(ov))
                                 for i in range(P)]) / mu.mass
            if isinstance(E, Ball) and E.dim == 2:
                return np.array([geo.polygon_disk_area(poses[i].to_world(ov), (0.0, 0.0), E.radius)
                                 for i in range(P)]) / mu.mass
        return None
    if isinstance(mu, KochCurveMeasure):
        segs = mu.segments
        if isinstance(shape, Ball):
            return kernels.polyline_fraction_in_disks(segs, X, tau * shape.radius) / mu.n_segments
        if isinstance(shape, HalfSpace):
            n, c = _posed_halfspace(shape, poses)
            return np.array([np.sum(_segment_fraction_halfspace(segs.x0, segs.y0, segs.x1, segs.y1,
                                                                n[i], c[i]))
                             for i in range(P)]) / mu.n_segments
        if isinstance(shape, ConvexPolygon):
            return np.array([_curve_in_convex(segs, shape.vertex_array, poses[i])
                             for i in range(P)]) / mu.n_segments
        return None
    if isinstance(mu, (CircleArcMeasure, SphereSurfaceMeasure)):
        if shape.dim != mu.dim:
            return None
        R = mu.radius
        if isinstance(shape, Ball):
            r = tau * shape.radius
            dist = np.linalg.norm(X, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = (R * R + dist * dist - r * r) / (2 * R * dist)
            q = np.where(dist > 0, q, np.where(r >= R, -np.inf, np.inf))
            q = np.clip(q, -1.0, 1.0)
        elif isinstance(shape, HalfSpace):
            n, c = _posed_halfspace(shape, poses)
            # strict half-space; the boundary circle or cap rim has measure zero
            q = np.clip(c / R, -1.0, 1.0)
        else:
            return None
        if isinstance(mu, CircleArcMeasure):
            return np.arccos(q) / np.pi
        return (1.0 - q) / 2.0
    return None


def evaluate_batch(mu, shape, poses, empirical=None):
    """(values, error bounds) of μ on each posed body."""
    if shape.dim != mu.dim:
        raise LabError(f"measure dimension {mu.dim} does not match shape dimension {shape.dim}")
    vals = exact_batch(mu, shape, poses)
    if vals is not None:
        return np.clip(vals, 0.0, 1.0), np.zeros(len(poses))
    if empirical is None:
        raise UnsupportedPairError(
            f"no exact path for {type(mu).__name__} on {type(shape).__name__}; "
            "pass an EmpiricalMeasure")
    est = [empirical.evaluate(shape, poses[i]) for i in range(len(poses))]
    return np.array([e.value for e in est]), np.array([e.stderr for e in est])


def ball_profile(mu, centers, radii, empirical=None):
    """μ(B(c_i, r_j)) as a (centers, radii) table; radii must be increasing."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) < 0) or np.any(radii <= 0):
        raise LabError("radii must be positive and increasing")
    if isinstance(mu, KochCurveMeasure):
        return kernels.polyline_fraction_profile(mu.segments, centers, radii) / mu.n_segments
    nc, nr = centers.shape[0], radii.size
    rot = np.zeros(nc * nr) if mu.dim == 2 else np.tile([1.0, 0, 0, 0], (nc * nr, 1))
    poses = PoseBatch(np.repeat(centers, nr, axis=0), np.tile(radii, nc), rot)
    return evaluate_batch(mu, Ball(1.0, mu.dim), poses, empirical)[0].reshape(nc, nr)


def evaluate(mu, shape, pose=None, empirical=None):
    """μ((x + τσΩ) ∩ E) with an error bound (0 on exact paths)."""
    pose = pose or AffinePose.identity(shape.dim)
    v, e = evaluate_batch(mu, shape, PoseBatch.from_poses([pose]), empirical)
    return Estimate(float(v[0]), float(e[0]))


# ---------------------------------------------------------------- sampling

def sample_array(mu, n, seed=0):
    if n < 1:
        raise LabError("need at least one sample")
    rng = np.random.default_rng(seed)
    if isinstance(mu, LebesgueOnShape):
        lo, hi = geo.bounding_box(mu.support)
        rate = mu.mass / float(np.prod(hi - lo))
        if rate < 1e-3:
            raise LabError(f"rejection acceptance {rate:.2e} below 1e-3 (degenerate support)")
        out = []
        got = 0
        while got < n:
            m = int((n - got) / rate * 1.2) + 64
            p = lo + rng.random((m, lo.size)) * (hi - lo)
            p = p[mu.support.contains_local(p)]
            out.append(p)
            got += p.shape[0]
        return np.concatenate(out)[:n]
    if isinstance(mu, KochCurveMeasure):
        v = mu.vertices
        k = rng.integers(0, v.shape[0], n)
        t = rng.random(n)[:, None]
        return v[k] + t * (v[(k + 1) % v.shape[0]] - v[k])
    if isinstance(mu, CircleArcMeasure):
        a = 2 * np.pi * rng.random(n)
        return mu.radius * np.column_stack([np.cos(a), np.sin(a)])
    if isinstance(mu, SphereSurfaceMeasure):
        # Archimedes: z uniform on [−R, R] with uniform azimuth
        z = rng.uniform(-1.0, 1.0, n)
        a = 2 * np.pi * rng.random(n)
        s = np.sqrt(1 - z * z)
        return mu.radius * np.column_stack([s * np.cos(a), s * np.sin(a), z])
    if isinstance(mu, Pushforward):
        return mu.map(sample_array(mu.base, n, seed))
    raise LabError(f"cannot sample {type(mu).__name__}")


def sample(mu, n, seed=0):
    """n iid draws from μ as a PointSet."""
    from .pointset import PointSet

    return PointSet(sample_array(mu, n, seed), "iid", seed, mu.ident)


# ---------------------------------------------------------------- Fourier coefficients

def _gl_triangle_rule(order):
    # Duffy-collapsed tensor Gauss-Legendre on the reference triangle
    x, w = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (x + 1)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu)
    s = U
    t = V * (1 - U)
    return s.ravel(), t.ravel(), (W * (1 - U)).ravel()


def polygon_ft_quadrature(vertices, xi, order=None):
    """∫_P e^{−2πiξ·x} dx by Gauss-Legendre on a fan triangulation.

    Returns (value, error estimate); the estimate compares the rule against one
    of twice the order.
    """
    v = np.asarray(vertices, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    diam = float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))
    if order is None:
        order = int(np.clip(8 + 2 * np.pi * diam * np.max(np.linalg.norm(xi, axis=1)), 8, 200))

    def rule(m):
        s, t, w = _gl_triangle_rule(m)
        total = np.zeros(xi.shape[0], dtype=complex)
        o = v[0]
        for i in range(1, v.shape[0] - 1):
            a, b = v[i] - o, v[i + 1] - o
            jac = abs(a[0] * b[1] - a[1] * b[0])
            pts = o + s[:, None] * a + t[:, None] * b
            total += jac * (np.exp(-2j * np.pi * (xi @ pts.T)) @ w)
        return total

    q1 = rule(order)
    q2 = rule(2 * order)
    return q2, np.abs(q2 - q1)


def polygon_ft_exact(vertices, xi):
    """χ̂_P(ξ) for a counterclockwise polygon via the divergence theorem on its edges."""
    v = np.asarray(vertices, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    w = np.roll(v, -1, axis=0)
    m = 0.5 * (v + w)
    e = w - v
    out = np.empty(xi.shape[0], dtype=complex)
    r2 = np.einsum("ij,ij->i", xi, xi)
    zero = r2 == 0
    out[zero] = abs(geo.polygon_area(v))
    nz = ~zero
    if np.any(nz):
        _, T = kernels.edge_ft_sums(m[:, 0], m[:, 1], e[:, 0], e[:, 1], xi[nz, 0], xi[nz, 1])
        out[nz] = 1j * T / (2 * np.pi * r2[nz])
    return out


def _ft(mu, xi):
    r = np.linalg.norm(xi, axis=1)
    if isinstance(mu, LebesgueOnShape):
        E = mu.support
        if isinstance(E, ConvexPolygon) and E.is_axis_rectangle():
            lo, hi = E.bbox()
            c = 0.5 * (lo + hi)
            w = hi - lo
            return np.exp(-2j * np.pi * (xi @ c)) * np.sinc(xi[:, 0] * w[0]) * np.sinc(xi[:, 1] * w[1]), None
        if isinstance(E, Ball):
            x = 2 * np.pi * E.radius * r
            return (jinc(x) if E.dim == 2 else spherical_j1_ratio(x)).astype(complex), None
        if isinstance(E, KochRegion):
            return polygon_ft_exact(E.vertex_array, xi) / mu.mass, None
        if isinstance(E, ConvexPolygon):
            val, err = polygon_ft_quadrature(E.vertex_array, xi)
            return val / mu.mass, err / mu.mass
        return None, None
    if isinstance(mu, KochCurveMeasure):
        v = mu.vertices
        w = np.roll(v, -1, axis=0)
        m, e = 0.5 * (v + w), w - v
        S, _ = kernels.edge_ft_sums(m[:, 0], m[:, 1], e[:, 0], e[:, 1], xi[:, 0], xi[:, 1])
        return S / v.shape[0], None
    if isinstance(mu, CircleArcMeasure):
        return besselj(0, 2 * np.pi * mu.radius * r).astype(complex), None
    if isinstance(mu, SphereSurfaceMeasure):
        return np.sinc(2 * mu.radius * r).astype(complex), None
    if isinstance(mu, Pushforward) and isinstance(mu.map, AffineMap) and mu.map.out_dim == mu.base.dim:
        A = np.asarray(mu.map.matrix)
        base, err = _ft(mu.base, xi @ A)
        if base is None:
            return None, None
        return np.exp(-2j * np.pi * (xi @ np.asarray(mu.map.offset))) * base, err
    return None, None


def fourier_coefficient_with_error(mu, xi, cutoff=FOURIER_CUTOFF, empirical=None):
    """(μ̂(ξ), error estimate); the estimate is zero on closed-form paths."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != mu.dim:
        raise LabError("frequency dimension does not match the measure")
    if np.any(np.linalg.norm(xi, axis=1) > cutoff):
        raise LabError(f"|ξ| exceeds the cutoff {cutoff}")
    val, err = _ft(mu, xi)
    if val is None:
        if empirical is None:
            raise UnsupportedPairError(f"no Fourier path for {type(mu).__name__}")
        val = empirical.fourier_coefficient(xi)
        err = np.full(xi.shape[0], 2.0 / math.sqrt(empirical.size))
    if err is None:
        err = np.zeros(xi.shape[0])
    zero = ~np.any(xi, axis=1)
    val = np.where(zero, 1.0 + 0j, val)
    return (val[0], float(err[0])) if single else (val, err)


def fourier_coefficient(mu, xi, cutoff=FOURIER_CUTOFF, empirical=None):
    """μ̂(ξ) = ∫ e^{−2πiξ·x} dμ(x); ξ of shape (d,) or (F, d)."""
    return fourier_coefficient_with_error(mu, xi, cutoff, empirical)[0]


# ---------------------------------------------------------------- growth condition

@dataclass(frozen=True)
class GrowthReport:
    c_hat: float
    worst_ball: tuple
    alpha: float
    trials: int
    r_min: float
    r_max: float

    def to_dict(self):
        return {"c_hat": self.c_hat, "worst_center": list(self.worst_ball[0]),
                "worst_radius": self.worst_ball[1], "alpha": self.alpha, "trials": self.trials,
                "r_min": self.r_min, "r_max": self.r_max}


def verify_growth(mu, trials=1000, seed=0, alpha=None, r_min=1e-3, r_max=None):
    """Largest μ(B(x, r))/r^α over random balls.

    Radii are log-uniform in [r_min, r_max] (default r_max = 2r₀, which bounds
    diam E). Half the centers are draws from μ; the other half are moved by a
    uniform offset inside B(0, r). Draws use one stream per role, so the
    centers for a given seed are reused across refinement levels of the same
    construction.
    """
    if trials < 1000:
        raise LabError("trials must be at least 1000")
    alpha = mu.alpha if alpha is None else float(alpha)
    r_max = 2 * mu.support_radius if r_max is None else float(r_max)
    ss = np.random.SeedSequence(seed).spawn(3)
    rr = np.random.default_rng(ss[0])
    r = np.exp(rr.uniform(math.log(r_min), math.log(r_max), trials))
    if isinstance(mu, KochCurveMeasure):
        # normalized arclength parameter, so centers track the curve across levels
        s = np.random.default_rng(ss[1]).random(trials)
        x = geo.koch_curve_point(mu.level, s)
    else:
        x = sample_array(mu, trials, ss[1])
    rng = np.random.default_rng(ss[2])
    half = trials // 2
    g = rng.standard_normal((trials - half, mu.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.random((trials - half, 1)) ** (1.0 / mu.dim)
    x[half:] += g * r[half:, None]
    poses = PoseBatch(x, r, np.zeros(trials) if mu.dim == 2 else np.tile([1.0, 0, 0, 0], (trials, 1)))
    vals, _ = evaluate_batch(mu, Ball(1.0, mu.dim), poses)
    ratio = vals / r ** alpha
    k = int(np.argmax(ratio))
    return GrowthReport(float(ratio[k]), (tuple(x[k].tolist()), float(r[k])), alpha, trials, r_min, r_max)
