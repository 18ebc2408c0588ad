"""Fourier side: indicator transforms, shell energies, the bump kernel K_M,
exponential-sum bounds and the Plancherel identity for the discrepancy.

Transforms use the convention f̂(ξ) = ∫ f(x) e^{−2πiξ·x} dx. Indicator
rasters store the exact fraction of each cell covered by the shape
(horizontal coverage is exact, vertical coverage is averaged over
``supersample`` scanlines), so the raster is χ_Ω convolved with the cell.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.special
from scipy.optimize import minimize
from scipy.stats import qmc

from . import geometry as geo
from . import measure as msr
from .bessel import besselj
from .discrepancy import count_batch
from .errors import CertificationError, LabError, ResolutionError, UnboundedError
from .geometry import Ball, PoseBatch
from .pointset import PointSet, partition_points

PARSEVAL_TOL = 1e-9


# ---------------------------------------------------------------- rasters

def _row_intervals_polygon(v, y):
    """Even-odd crossing intervals of a closed polygon with the lines y = y[s].

    Returns (row index, x_left, x_right) arrays; the half-open rule
    ymin <= y < ymax counts a vertex on a scanline exactly once.
    """
    w = np.roll(v, -1, axis=0)
    y0, y1 = v[:, 1], w[:, 1]
    lo, hi = np.minimum(y0, y1), np.maximum(y0, y1)
    dy = y[1] - y[0] if y.size > 1 else 1.0
    base = y[0]
    s0 = np.ceil((lo - base) / dy).astype(np.int64)
    s1 = np.ceil((hi - base) / dy).astype(np.int64)
    # the ceil index can be off by one at round-off; fix against the actual lines
    s0 = np.clip(s0, 0, y.size)
    s1 = np.clip(s1, 0, y.size)
    s0 -= (s0 > 0) & (y[np.maximum(s0 - 1, 0)] >= lo)
    s0 += (s0 < y.size) & (y[np.minimum(s0, y.size - 1)] < lo)
    s1 -= (s1 > 0) & (y[np.maximum(s1 - 1, 0)] >= hi)
    s1 += (s1 < y.size) & (y[np.minimum(s1, y.size - 1)] < hi)
    cnt = np.maximum(s1 - s0, 0)
    e = np.repeat(np.arange(v.shape[0]), cnt)
    first = np.cumsum(cnt) - cnt
    rows = np.repeat(s0 - first, cnt) + np.arange(cnt.sum())
    yy = y[rows]
    t = (yy - y0[e]) / (y1[e] - y0[e])
    xs = v[e, 0] + t * (w[e, 0] - v[e, 0])
    order = np.lexsort((xs, rows))
    rows, xs = rows[order], xs[order]
    if rows.size % 2:
        raise LabError("open scanline crossing; polygon is not closed")
    return rows[0::2], xs[0::2], xs[1::2]


def _row_intervals_ball(r, y):
    inside = np.abs(y) < r
    rows = np.nonzero(inside)[0]
    hw = np.sqrt(r * r - y[rows] ** 2)
    return rows, -hw, hw


def _accumulate(L, ss, rows, xa, xb, h, S):
    # exact horizontal coverage of [xa, xb] per cell, averaged over ss lines per row
    ua = np.clip((xa + 0.5 * S) / h, 0, L)
    ub = np.clip((xb + 0.5 * S) / h, 0, L)
    keep = ub > ua
    rows, ua, ub = rows[keep] // ss, ua[keep], ub[keep]
    ia = np.minimum(np.floor(ua).astype(np.int64), L - 1)
    ib = np.minimum(np.floor(ub).astype(np.int64), L - 1)
    same = ia == ib
    cov = np.zeros(L * L)
    base = rows * L
    cov += np.bincount(base[same] + ia[same], ub[same] - ua[same], minlength=L * L)
    d = ~same
    cov += np.bincount(base[d] + ia[d], ia[d] + 1 - ua[d], minlength=L * L)
    cov += np.bincount(base[d] + ib[d], ub[d] - ib[d], minlength=L * L)
    # full cells strictly between ia and ib through a running sum per row
    diff = np.zeros(L * (L + 1))
    b1 = rows[d] * (L + 1)
    diff += np.bincount(b1 + ia[d] + 1, minlength=L * (L + 1))
    diff -= np.bincount(b1 + ib[d], minlength=L * (L + 1))
    full = np.cumsum(diff.reshape(L, L + 1), axis=1)[:, :L]
    return (cov.reshape(L, L) + full) / ss


def rasterize(shape, L, S, supersample=4):
    """Cell-coverage raster of a planar shape on the L×L grid of side S.

    Row i, column j is the cell centered at (−S/2 + (j+½)h, −S/2 + (i+½)h).
    """
    if shape.dim != 2:
        raise LabError("rasters are planar (d = 2)")
    if isinstance(shape, geo.HalfSpace):
        raise UnboundedError("a half-space has no finite raster")
    h = S / L
    ss = int(supersample)
    y = -0.5 * S + (np.arange(L * ss) + 0.5) * (h / ss)
    if isinstance(shape, Ball):
        rows, xa, xb = _row_intervals_ball(shape.radius, y)
    elif hasattr(shape, "vertex_array") and not isinstance(shape, geo.KochCurvePolyline):
        rows, xa, xb = _row_intervals_polygon(np.asarray(shape.vertex_array, dtype=float), y)
    else:
        # point sampling on an ss×ss sub-lattice for anything else
        out = np.empty((L, L))
        off = (np.arange(ss) + 0.5) / ss
        for i in range(L):
            yy = -0.5 * S + (i + off) * h
            xx = -0.5 * S + (np.arange(L)[:, None] + off[None, :]).ravel() * h
            X, Y = np.meshgrid(xx, yy)
            hit = shape.contains_local(np.column_stack([X.ravel(), Y.ravel()]))
            out[i] = hit.reshape(ss, L, ss).mean(axis=(0, 2))
        return out
    return _accumulate(L, ss, rows, xa, xb, h, S)


def _phase(k, L):
    # e^{−2πi(k/S)x_j} with x_j = −S/2 + (j+½)h, relative to the plain DFT
    return np.where(k % 2 == 0, 1.0, -1.0) * np.exp(-1j * np.pi * k / L)


@dataclass
class SpectralGrid:
    """Raster of χ_Ω on an L×L grid over [−S/2, S/2]² and its transform.

    ``chi_hat`` holds the half-plane kx >= 0 (rows in FFT order of ky); the
    other half follows from χ̂(−ξ) = conj χ̂(ξ). Frequencies are k/S.
    """

    shape: object
    L: int
    S: float
    supersample: int
    raster: np.ndarray = field(repr=False)
    chi_hat: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, shape, L=1024, S=None, supersample=4, workers=None):
        L = int(L)
        if isinstance(shape, geo.HalfSpace):
            raise UnboundedError("a half-space has no finite raster")
        if L < 8 or L & (L - 1):
            raise LabError("L must be a power of two >= 8")
        need = 2 * shape.bounding_radius + 2
        S = float(need if S is None else S)
        if S < need - 1e-12:
            raise LabError(f"box side {S} below 2·bounding_radius + 2 = {need}")
        raster = rasterize(shape, L, S, supersample)
        F = scipy.fft.rfft2(raster, workers=workers)
        h = S / L
        ky = np.fft.fftfreq(L, 1.0 / L).astype(np.int64)
        kx = np.arange(L // 2 + 1)
        F *= (h * h) * _phase(ky, L)[:, None]
        F *= _phase(kx, L)[None, :]
        grid = cls(shape, L, S, int(supersample), raster, F)
        gap = grid.parseval_gap()
        if gap > PARSEVAL_TOL:
            raise CertificationError(f"Parseval gap {gap:.3g} exceeds {PARSEVAL_TOL}")
        return grid

    @property
    def cell(self):
        return self.S / self.L

    @property
    def freq_cell(self):
        return 1.0 / self.S

    @property
    def nyquist(self):
        return 0.5 * self.L / self.S

    def column_weights(self):
        w = np.full(self.L // 2 + 1, 2.0)
        w[0] = w[-1] = 1.0
        return w

    def frequencies(self):
        """(ky, kx) frequency values for the rows and columns of ``chi_hat``."""
        ky = np.fft.fftfreq(self.L, 1.0 / self.L) / self.S
        kx = np.arange(self.L // 2 + 1) / self.S
        return ky, kx

    def spatial_norm2(self):
        return float(np.sum(self.raster ** 2) * self.cell ** 2)

    def spectral_norm2(self):
        e = (self.chi_hat.real ** 2 + self.chi_hat.imag ** 2) @ self.column_weights()
        return float(np.sum(e) * self.freq_cell ** 2)

    def parseval_gap(self):
        a, b = self.spatial_norm2(), self.spectral_norm2()
        return abs(a - b) / a

    def _cell_response(self, ky, kx):
        # transform of the coverage filter: exact box in x, ss-point average in y
        h, ss = self.cell, self.supersample
        fx = np.sinc(h * kx)
        t = np.pi * h * ky / ss
        with np.errstate(invalid="ignore", divide="ignore"):
            fy = np.where(t == 0, 1.0, np.sin(ss * t) / (ss * np.sin(t)))
        return fy[:, None] * fx[None, :]

    def energy(self, deconvolve=True, rows=slice(None)):
        """|χ̂|² on (a block of rows of) the half-plane grid."""
        F = self.chi_hat[rows]
        e = F.real ** 2 + F.imag ** 2
        if deconvolve:
            ky, kx = self.frequencies()
            e /= self._cell_response(ky[rows], kx) ** 2
        return e

    def value(self, k, deconvolve=True):
        """χ̂ at integer frequency indices k = (kx, ky), i.e. at ξ = k/S."""
        k = np.atleast_2d(np.asarray(k, dtype=np.int64))
        if np.any(np.abs(k) >= self.L // 2):
            raise ResolutionError("frequency index beyond the grid")
        flip = k[:, 0] < 0
        kk = np.where(flip[:, None], -k, k)
        out = self.chi_hat[kk[:, 1] % self.L, kk[:, 0]]
        out = np.where(flip, np.conj(out), out)
        if deconvolve:
            resp = np.array([self._cell_response(np.array([ky]), np.array([kx]))[0, 0]
                             for kx, ky in kk / self.S])
            out = out / resp
        return out

    def radial_energy(self, edges, deconvolve=True, block=256):
        """Σ|χ̂|²·Δξ² over the annuli edges[i] <= |ξ| < edges[i+1]."""
        edges = np.asarray(edges, dtype=float)
        ky, kx = self.frequencies()
        w = self.column_weights()
        out = np.zeros(edges.size - 1)
        for lo in range(0, self.L, block):
            rows = slice(lo, lo + block)
            r = np.hypot(ky[rows, None], kx[None, :])
            e = self.energy(deconvolve, rows) * w[None, :]
            out += np.histogram(r, bins=edges, weights=e)[0]
        return out * self.freq_cell ** 2

    def dump(self, path):
        """Write the raster as little-endian float64, row-major, plus a JSON header."""
        path = Path(path)
        self.raster.astype("<f8").tofile(path)
        header = {"L": self.L, "S": self.S, "cell": self.cell, "supersample": self.supersample,
                  "dtype": "<f8", "order": "row-major", "rows": "y ascending",
                  "origin": [-0.5 * self.S, -0.5 * self.S], "shape": self.shape.to_dict()}
        Path(str(path) + ".json").write_text(json.dumps(header, indent=2))
        return path

    @staticmethod
    def load_raster(path):
        header = json.loads(Path(str(path) + ".json").read_text())
        L = header["L"]
        return np.fromfile(path, dtype="<f8").reshape(L, L), header


# ---------------------------------------------------------------- shells and balls

@dataclass(frozen=True)
class ShellBand:
    """The annulus γρ <= |ξ| <= δρ around scale ρ."""

    gamma: float = 0.125
    delta: float = 8.0

    def __post_init__(self):
        if not 0 < self.gamma < self.delta:
            raise LabError("need 0 < gamma < delta")

    def annulus(self, rho):
        return self.gamma * rho, self.delta * rho


def shell_energy(grid, rho, band=ShellBand(), deconvolve=True):
    """∫_{γρ<=|ξ|<=δρ} |χ̂_Ω(ξ)|² dξ as a grid sum over the annulus."""
    lo, hi = band.annulus(rho)
    if hi > grid.nyquist:
        raise ResolutionError(f"δρ = {hi:g} exceeds the grid Nyquist frequency {grid.nyquist:g}")
    return float(grid.radial_energy([lo, hi], deconvolve)[0])


def shell_energies(grid, rhos, band=ShellBand(), deconvolve=True):
    """shell_energy for many ρ in one pass over the grid."""
    rhos = np.asarray(rhos, dtype=float)
    if band.delta * rhos.max() > grid.nyquist:
        raise ResolutionError("δρ exceeds the grid Nyquist frequency")
    edges = np.unique(np.concatenate([band.gamma * rhos, band.delta * rhos]))
    cum = np.concatenate([[0.0], np.cumsum(grid.radial_energy(edges, deconvolve))])
    at = dict(zip(edges, cum))
    return np.array([at[band.delta * r] - at[band.gamma * r] for r in rhos])


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def ball_ft_radial(r, mag, d=2):
    """χ̂_{rB} as a function of |ξ|, vectorized over magnitudes."""
    mag = np.abs(np.asarray(mag, dtype=float))
    out = np.empty_like(mag)
    zero = mag == 0
    out[zero] = math.pi * r ** 2 if d == 2 else 4 / 3 * math.pi * r ** 3
    m = mag[~zero]
    out[~zero] = r ** (d / 2) * m ** (-d / 2) * besselj(d / 2, 2 * math.pi * r * m)
    return out


def ball_indicator_ft(r, xi, d=2):
    """χ̂_{rB}(ξ) = r^{d/2}|ξ|^{−d/2} J_{d/2}(2πr|ξ|), with the volume at ξ = 0.

    ξ is a vector of shape (d,) or an array (F, d).
    """
    if d not in (2, 3):
        raise LabError("d must be 2 or 3")
    if not r > 0:
        raise LabError("radius must be positive")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != d:
        raise LabError(f"frequency must have {d} components")
    out = ball_ft_radial(r, np.linalg.norm(np.atleast_2d(xi), axis=-1), d)
    return float(out[0]) if xi.ndim == 1 else out


def bessel_remainder(d, u):
    """E_d(u) = J_{d/2}(2πu) − π^{−1}u^{−1/2}cos(2πu − (d+1)π/4)."""
    u = np.asarray(u, dtype=float)
    lead = np.cos(2 * np.pi * u - (d + 1) * np.pi / 4) / (np.pi * np.sqrt(u))
    return besselj(d / 2, 2 * np.pi * u) - lead


def bessel_asymptotic_check(d, u_range, points_per_unit=200):
    """sup of u^{3/2}|E_d(u)| over a fine grid of u_range."""
    a, b = map(float, u_range)
    if not (1 <= a < b <= 1e3):
        raise LabError("u_range must lie in [1, 1000]")
    u = np.linspace(a, b, int((b - a) * points_per_unit) + 1)
    return float(np.max(u ** 1.5 * np.abs(bessel_remainder(d, u))))


def leading_term_mean(R, phi):
    """(1/R)∫_R^{2R} cos²(2πu − φ) du in closed form."""
    s = lambda u: math.sin(4 * math.pi * u - 2 * phi) / (8 * math.pi)
    return 0.5 + (s(2 * R) - s(R)) / R


def indicator_ft(shape, xi):
    """χ̂_Ω(ξ) for a ball or polygon shape, ξ of shape (F, 2)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if isinstance(shape, Ball):
        return ball_indicator_ft(shape.radius, xi, shape.dim).astype(complex)
    if hasattr(shape, "vertex_array") and not isinstance(shape, geo.KochCurvePolyline):
        return msr.polygon_ft_exact(shape.vertex_array, xi)
    raise LabError(f"no transform path for {type(shape).__name__}")


def rotational_band_energy(shape, xi_mag, gamma=0.125, delta=8.0, n_rot=4096, seed=0):
    """∫_γ^δ ∫_SO(2) u⁴|χ̂_Ω(uσ^{−1}ξ)|² dσ du by scrambled-Sobol averaging.

    Rotations carry the probability measure; u carries Lebesgue measure, so
    the average is multiplied by δ − γ.
    """
    if shape.dim != 2:
        raise LabError("rotational band energy is implemented for d = 2")
    if not 0 < gamma < delta:
        raise LabError("need 0 < gamma < delta")
    if delta * xi_mag > msr.FOURIER_CUTOFF:
        raise ResolutionError("δ|ξ| beyond the transform cutoff")
    m = max(int(math.ceil(math.log2(max(n_rot, 2)))), 1)
    U = qmc.Sobol(2, scramble=True, seed=seed).random_base2(m)
    u = gamma + (delta - gamma) * U[:, 0]
    if isinstance(shape, Ball):
        vals = ball_ft_radial(shape.radius, u * xi_mag, 2) ** 2
    else:
        th = 2 * np.pi * U[:, 1]
        f = u[:, None] * xi_mag * np.column_stack([np.cos(th), np.sin(th)])
        vals = np.abs(indicator_ft(shape, f)) ** 2
    return float((delta - gamma) * np.mean(u ** 4 * vals))


# ---------------------------------------------------------------- bump kernel

_RADIAL_NODES = 1000


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = r < 0.5
    out[m] = np.exp(-1.0 / (1.0 - 4.0 * r[m] ** 2))
    return out


def _surface(d):
    return 2 * math.pi if d == 2 else 4 * math.pi


def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@lru_cache(maxsize=4)
def _kernel_tables(d):
    r, wr = _gauss(0.0, 0.5, 160)
    c = 1.0 / (_surface(d) * np.sum(wr * _bump(r) * r ** (d - 1)))
    norm2 = c * c * _surface(d) * np.sum(wr * _bump(r) ** 2 * r ** (d - 1))
    s = np.linspace(0.0, 1.0, _RADIAL_NODES)
    # ψ∗ψ(s e₁) = ∫ ψ(y) ψ(s e₁ − y) dy over |y| < 1/2
    if d == 2:
        t, wt = _gauss(0.0, math.pi, 160)
        R, T = np.meshgrid(r, t, indexing="ij")
        W = 2 * np.outer(wr * r, wt)
        cos = np.cos(T)
    else:
        t, wt = _gauss(-1.0, 1.0, 160)
        R, T = np.meshgrid(r, t, indexing="ij")
        W = 2 * math.pi * np.outer(wr * r ** 2, wt)
        cos = T
    pR = _bump(R) * W
    auto = np.empty(s.size)
    for i, si in enumerate(s):
        dist = np.sqrt(np.maximum(si * si + R * R - 2 * si * R * cos, 0.0))
        auto[i] = np.sum(pR * _bump(dist))
    auto *= c * c
    return c, norm2, s, auto


_K_RANGE = 200.0


def _psi_hat(k, d, derivative=False):
    """ψ̂ (or dψ̂/dk) at radial frequencies k by Gauss-Legendre quadrature.

    Beyond |k| = 200 the value is set to zero; the certified tail bound
    covers it (K < 1e−26 there).
    """
    c = _kernel_tables(d)[0]
    k = np.asarray(k, dtype=float)
    flat = k.ravel()
    out = np.zeros(flat.size)
    live = np.nonzero(flat <= _K_RANGE)[0]
    if live.size == 0:
        return out.reshape(k.shape)
    n = int(np.clip(80 + 4 * flat[live].max(), 80, 1000))
    r, wr = _gauss(0.0, 0.5, n)
    wb = wr * _bump(r)
    step = max(1, 2 ** 22 // n)
    for lo in range(0, live.size, step):
        idx = live[lo:lo + step]
        x = 2 * np.pi * np.outer(flat[idx], r)
        if d == 2:
            prof = -scipy.special.j1(x) * (2 * np.pi * r) if derivative else scipy.special.j0(x)
            out[idx] = 2 * np.pi * c * (prof * r) @ wb
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                if derivative:
                    prof = np.where(x == 0, 0.0, (x * np.cos(x) - np.sin(x)) / x ** 2) * (2 * np.pi * r)
                else:
                    prof = np.where(x == 0, 1.0, np.sin(x) / x)
            out[idx] = 4 * np.pi * c * (prof * r ** 2) @ wb
    return out.reshape(k.shape)


@dataclass
class BumpKernel:
    """K_M with K̂ = ψ∗ψ/‖ψ‖² and K = ψ̂²/‖ψ‖², ψ the unit-integral bump."""

    M: float
    L_decay: float
    d: int
    c_psi: float
    psi_norm2: float
    C_L: float
    certificate: dict = field(default_factory=dict)

    def khat(self, xi):
        """K̂_M(ξ) = K̂(ξ/M), zero for |ξ| >= M."""
        _, _, s, auto = _kernel_tables(self.d)
        xi = np.asarray(xi, dtype=float)
        mag = np.abs(xi) if xi.ndim == 0 else np.linalg.norm(xi, axis=-1)
        q = mag / self.M
        out = np.interp(q, s, auto / self.psi_norm2, right=0.0)
        return np.where(q >= 1.0, 0.0, np.clip(out, 0.0, 1.0))

    def K(self, y):
        """Unscaled radial profile K(|y|) = ψ̂(|y|)²/‖ψ‖²."""
        return _psi_hat(np.asarray(y, dtype=float), self.d) ** 2 / self.psi_norm2

    def dK(self, y):
        y = np.asarray(y, dtype=float)
        return 2 * _psi_hat(y, self.d) * _psi_hat(y, self.d, True) / self.psi_norm2

    def __call__(self, x):
        """K_M(x) = M^d K(M|x|) for points x of shape (n, d)."""
        mag = np.linalg.norm(np.atleast_2d(np.asarray(x, dtype=float)), axis=-1)
        return self.M ** self.d * self.K(self.M * mag)

    def tail_bound(self, dist):
        """Certified |K_M(x)| <= C_L M^{d−L}|x|^{−L} for |x| >= 1/M."""
        return self.C_L * self.M ** (self.d - self.L_decay) * np.asarray(dist, dtype=float) ** (-self.L_decay)

    def reach(self):
        """Radius (in units of 1/M) beyond which K stays below 1e−14·K(0)."""
        return self.certificate["reach"]

    def khat_grid(self, L=512, extent=2.0):
        """K̂_M on the L×L midpoint grid over [−extent·M, extent·M]²."""
        f = (np.arange(L) + 0.5 - L / 2) * (2 * extent * self.M / L)
        X, Y = np.meshgrid(f, f, indexing="ij")
        return np.hypot(X, Y), self.khat(np.stack([X, Y], axis=-1))


@lru_cache(maxsize=16)
def _certify_cached(d, L_decay):
    c, norm2, s, auto = _kernel_tables(d)
    khat = auto / norm2
    cert = {"d": d, "L_decay": L_decay, "c_psi": c, "psi_norm2": norm2,
            "khat0_raw": float(auto[0]), "khat_min": float(khat.min()), "khat_max": float(khat.max())}
    if khat.min() < 0 or khat.max() > 1 + 1e-12:
        raise CertificationError("K̂ left [0, 1]")
    # support: ψ∗ψ vanishes identically once s >= 1
    beyond = float(np.asarray(_autocorr_at(d, 1.0 + 1e-6)))
    cert["khat_beyond"] = beyond
    if beyond != 0.0:
        raise CertificationError("K̂ nonzero beyond |ξ| = M")
    y = np.linspace(0.0, _K_RANGE, 20001)
    K = _psi_hat(y, d) ** 2 / norm2
    cert["K0"] = float(K[0])
    if np.max(K) > 1.0:
        raise CertificationError("K exceeds 1 inside the unit ball")
    far = y >= 1.0
    prod = y[far] ** L_decay * K[far]
    C_L = float(prod.max())
    cert["C_L"] = C_L
    cert["tail_end"] = float(prod[-1])
    if not np.isfinite(C_L) or prod[-1] > 1e-3 * C_L:
        raise CertificationError("tail bound not established on the certification grid")
    big = np.nonzero(K >= 1e-14 * K[0])[0]
    cert["reach"] = float(y[big[-1] + 1])
    return cert


def _certify(d, L_decay, M):
    return dict(_certify_cached(d, L_decay), M=M)


def _autocorr_at(d, s):
    c, _, _, _ = _kernel_tables(d)
    r, wr = _gauss(0.0, 0.5, 160)
    t, wt = _gauss(0.0, math.pi, 160) if d == 2 else _gauss(-1.0, 1.0, 160)
    R, T = np.meshgrid(r, t, indexing="ij")
    cos = np.cos(T) if d == 2 else T
    W = 2 * np.outer(wr * r, wt) if d == 2 else 2 * math.pi * np.outer(wr * r ** 2, wt)
    dist = np.sqrt(np.maximum(s * s + R * R - 2 * s * R * cos, 0.0))
    return c * c * np.sum(_bump(R) * W * _bump(dist))


def build_kernel(M, L_decay=8, d=2):
    """Certified bump kernel K_M (K̂ ∈ [0, 1], support |ξ| <= M, tail bound)."""
    if not M >= 1:
        raise LabError("M must be >= 1")
    if d not in (2, 3):
        raise LabError("d must be 2 or 3")
    cert = _certify(d, float(L_decay), float(M))
    return BumpKernel(float(M), float(L_decay), d, cert["c_psi"], cert["psi_norm2"], cert["C_L"], cert)


@dataclass(frozen=True)
class KMReport:
    M: float
    alpha: float
    max_value: float
    ratio: float
    worst_z: tuple
    trials: int

    def to_dict(self):
        return asdict(self)


def km_convolution(mu, kernel, z, empirical=None, panels=32, order=8):
    """K_M∗μ(z) = K_M(ρ*)μ(B(z,ρ*)) − ∫_0^{ρ*} K_M'(ρ) μ(B(z,ρ)) dρ (layer cake).

    ρ* is where K has decayed below 1e−14 of its peak; the ball measures use
    the exact evaluation paths.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    M, d = kernel.M, kernel.d
    Y = kernel.reach()
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, Y, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    y = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wy = (0.5 * (b - a) * w).ravel()
    dK = kernel.dK(y)
    Kend = float(kernel.K(np.array([Y]))[0])
    ny = y.size
    order = np.argsort(y)
    radii = np.concatenate([y[order] / M, [Y / M]])
    F = msr.ball_profile(mu, z, radii, empirical)
    F = np.concatenate([F[:, :ny][:, np.argsort(order)], F[:, ny:]], axis=1)
    # with ρ = y/M: K_M'(ρ)dρ = M^d K'(y) dy
    return M ** d * (Kend * F[:, -1] - F[:, :ny] @ (dK * wy))


def km_convolution_bound(mu, kernel, trials=200, seed=0, empirical=None):
    """max over sampled z of |K_M∗μ(z)| and its ratio to M^{d−α}."""
    if trials < 100:
        raise LabError("need trials >= 100")
    rng = np.random.default_rng(seed)
    base = msr.sample_array(mu, trials, seed=seed)
    half = trials // 2
    z = base.copy()
    z[half:] += rng.normal(scale=1.0 / kernel.M, size=z[half:].shape)
    vals = np.abs(km_convolution(mu, kernel, z, empirical))
    i = int(np.argmax(vals))
    alpha = float(mu.alpha)
    return KMReport(kernel.M, alpha, float(vals[i]), float(vals[i] / kernel.M ** (kernel.d - alpha)),
                    tuple(float(v) for v in z[i]), trials)


# ---------------------------------------------------------------- exponential sums

def _points(points):
    return points.points if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, dtype=float))


def _axis(M, step):
    n = int(math.ceil(2 * M / step))
    return -0.5 * n * step + (np.arange(n) + 0.5) * step


def _cm_grid(z, mu, M, step):
    f = _axis(M, step)
    Ax = np.exp(-2j * np.pi * np.outer(z[:, 0], f))
    Ay = np.exp(-2j * np.pi * np.outer(z[:, 1], f))
    X, Y = np.meshgrid(f, f, indexing="ij")
    r = np.hypot(X, Y)
    mask = (r >= 1.0) & (r <= M)
    xi = np.column_stack([X[mask], Y[mask]])
    mh = np.zeros(X.shape, dtype=complex)
    mh[mask] = msr.fourier_coefficient(mu, xi)
    return f, Ax, Ay, mask, mh


def _cm_value(z, mu, M, step):
    _, Ax, Ay, mask, mh = _cm_grid(z, mu, M, step)
    R = Ax.T @ Ay - z.shape[0] * mh
    return float(np.sum(np.abs(R[mask]) ** 2) * step * step)


@dataclass(frozen=True)
class CasselsResult:
    value: float
    error: float
    M: float
    step: float
    N: int

    def to_dict(self):
        return asdict(self)


def cassels_montgomery(points, mu, M, quad=None):
    """∫_{1<=|ξ|<=M} |Σ_j e^{−2πiξ·z_j} − Nμ̂(ξ)|² dξ as a midpoint grid sum.

    ``quad`` is the grid step (default 1/(8(r+1)) with r the largest |z_j|);
    the error estimate is the change when the step is halved.
    """
    z = _points(points)
    if z.shape[1] != 2 or mu.dim != 2:
        raise LabError("the exponential-sum integral is implemented for d = 2")
    if not M > 1:
        raise LabError("need M > 1")
    r = float(np.max(np.linalg.norm(z, axis=1)))
    step = float(quad) if quad else 1.0 / (8 * (max(r, mu.support_radius) + 1))
    coarse = _cm_value(z, mu, M, step)
    fine = _cm_value(z, mu, M, step / 2)
    return CasselsResult(fine, abs(fine - coarse), float(M), step / 2, z.shape[0])


def _cm_objective(flat, mu, M, step, mh_cache):
    z = flat.reshape(-1, 2)
    f, mask, mh = mh_cache
    Ax = np.exp(-2j * np.pi * np.outer(z[:, 0], f))
    Ay = np.exp(-2j * np.pi * np.outer(z[:, 1], f))
    R = (Ax.T @ Ay - z.shape[0] * mh) * mask
    val = np.sum(R.real ** 2 + R.imag ** 2) * step * step
    Rc = np.conj(R)
    # ∂/∂z_j |R|² summed: 2 Re[conj(R) · (−2πiξ) e^{−2πiξ·z_j}]
    gx = np.einsum("ji,ik,jk->j", Ax * f[None, :], Rc, Ay)
    gy = np.einsum("ji,ik,jk->j", Ax, Rc, Ay * f[None, :])
    g = 2 * np.real(-2j * np.pi * np.column_stack([gx, gy])) * step * step
    return val, g.ravel()


def calibrate_cassels(mu, n=16, M=None, restarts=8, seed=0, step=0.125):
    """Brute-force ĉ = min over n-point configurations of I(M)/(n M²).

    Minimizes the grid integral over point positions inside the support's
    bounding box with L-BFGS-B from random and partition-like starts.
    """
    M = float(M or 4 * math.sqrt(n))
    f, _, _, mask, mh = _cm_grid(np.zeros((1, 2)), mu, M, step)
    cache = (f, mask, mh)
    lo, hi = geo.bounding_box(mu.support) if hasattr(mu, "support") else (None, None)
    if lo is None:
        r = mu.support_radius
        lo, hi = np.full(2, -r), np.full(2, r)
    bounds = [(lo[0], hi[0]), (lo[1], hi[1])] * n
    starts = [msr.sample_array(mu, n, seed=seed + k) for k in range(restarts)]
    try:
        starts.append(partition_points(mu, n).points)
    except LabError:
        pass
    best = math.inf
    for z0 in starts:
        res = minimize(_cm_objective, z0.ravel(), args=(mu, M, step, cache), jac=True,
                       method="L-BFGS-B", bounds=bounds, options={"maxiter": 500})
        best = min(best, float(res.fun))
    return best / (n * M * M)


# ---------------------------------------------------------------- Plancherel bridge

@dataclass(frozen=True)
class BridgeResult:
    spatial: float
    spectral: float
    gap: float
    L: int
    S: float

    def to_dict(self):
        return asdict(self)


def _rotation(sigma):
    if np.ndim(sigma) == 0:
        return float(sigma), geo.rotation_matrices(float(sigma), 2)
    R = np.asarray(sigma, dtype=float)
    return math.atan2(R[1, 0], R[0, 0]), R


def plancherel_bridge(points, mu, shape, tau, sigma=0.0, grid=1024, tol=0.1):
    """∫|D_N(x,τ,σ)|²dx on a translation grid against ∫|D̂_N(ξ,τ,σ)|²dξ.

    D̂ = (Σ e^{−2πiξ·z_j} − Nμ̂)·conj χ̂_{τσΩ}. The translation grid is the
    L×L midpoint grid over a box of side S holding the support of D; the
    frequency side samples ξ = k/S for |k_i| <= L/2, which is exact for the
    periodized sum, so only the truncation at L/(2S) is left.
    """
    z = _points(points)
    if z.shape[1] != 2 or mu.dim != 2:
        raise LabError("the bridge is implemented for d = 2")
    L = int(grid)
    theta, R = _rotation(sigma)
    reach = max(float(np.max(np.linalg.norm(z, axis=1))), mu.support_radius) + tau * shape.bounding_radius
    S = 2 * reach * (1 + 1e-9)
    h = S / L
    if z.shape[0] > 1:
        d = np.linalg.norm(z[:, None] - z[None], axis=-1)
        spacing = float(np.min(d[np.triu_indices(z.shape[0], 1)]))
    else:
        spacing = math.inf
    if h > min(spacing, tau * shape.bounding_radius / 4):
        raise ResolutionError(f"cell {h:.3g} does not resolve the shape or the point spacing")
    x = -0.5 * S + (np.arange(L) + 0.5) * h
    N = z.shape[0]
    spatial = 0.0
    for i in range(L):
        tr = np.column_stack([x, np.full(L, x[i])])
        poses = PoseBatch(tr, np.full(L, float(tau)), np.full(L, theta))
        cnt = count_batch(z, shape, poses)
        val, _ = msr.evaluate_batch(mu, shape, poses)
        spatial += float(np.sum((cnt - N * val) ** 2))
    spatial *= h * h
    k = (np.arange(L) - L // 2) / S
    Ax = np.exp(-2j * np.pi * np.outer(z[:, 0], k))
    Ay = np.exp(-2j * np.pi * np.outer(z[:, 1], k))
    spectral = 0.0
    block = max(1, 2 ** 20 // L)
    for lo in range(0, L, block):
        kx = k[lo:lo + block]
        X, Y = np.meshgrid(kx, k, indexing="ij")
        xi = np.column_stack([X.ravel(), Y.ravel()])
        ex = (Ax[:, lo:lo + block].T @ Ay).ravel()
        nu = ex - N * msr.fourier_coefficient(mu, xi)
        # χ̂_{τσΩ}(ξ) = τ² χ̂_Ω(τσᵀξ)
        chi = tau ** 2 * indicator_ft(shape, tau * xi @ R)
        spectral += float(np.sum(np.abs(nu * np.conj(chi)) ** 2))
    spectral /= S * S
    gap = abs(spatial - spectral) / spatial
    if gap > tol:
        raise ResolutionError(f"spatial and spectral sides differ by {gap:.1%}; refine the grid")
    return BridgeResult(spatial, spectral, gap, L, S)
