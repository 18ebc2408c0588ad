"""Pure numpy/scipy/shapely twins of the compiled kernels.

Signatures match ``_ckernels`` exactly. The polygon intersection uses GEOS
through shapely, which makes it an independent route for cross-checks.
"""
import numpy as np
import shapely
from scipy.spatial import cKDTree

_CHUNK = 1 << 16


def _ranges(starts, counts):
    # concatenated aranges [s, s+c) without a Python loop
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + np.arange(total) - offs


def pip_slab(x0, y0, x1, y1, ybase, inv_h, ptr, idx, px, py):
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    n = px.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    nslab = ptr.shape[0] - 1
    for lo in range(0, n, _CHUNK):
        x = px[lo:lo + _CHUNK]
        y = py[lo:lo + _CHUNK]
        s = np.floor((y - ybase) * inv_h)
        valid = (s >= 0) & (s < nslab)
        s = np.where(valid, s, 0).astype(np.int64)
        cnt = np.where(valid, ptr[s + 1] - ptr[s], 0)
        owner = np.repeat(np.arange(x.shape[0]), cnt)
        e = idx[_ranges(ptr[s], cnt)]
        X = x[owner]
        Y = y[owner]
        xa, ya, xb, yb = x0[e], y0[e], x1[e], y1[e]
        dx, dy = xb - xa, yb - ya
        cr = (X - xa) * dy - (Y - ya) * dx
        l2 = dx * dx + dy * dy
        t = (X - xa) * dx + (Y - ya) * dy
        on = (cr * cr <= 1e-26 * l2) & (t >= -1e-13 * l2) & (t <= l2 * (1 + 1e-13))
        straddle = (ya > Y) != (yb > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = xa + (Y - ya) * dx / dy
        hit = straddle & (X < xi)
        par = np.bincount(owner, weights=hit, minlength=x.shape[0]).astype(np.int64) & 1
        onb = np.bincount(owner, weights=on, minlength=x.shape[0]) > 0
        out[lo:lo + _CHUNK] = (par.astype(bool) | onb).astype(np.uint8)
    return out


def polygon_intersection_area(ax, ay, bx, by, grid=0):
    a = shapely.Polygon(np.column_stack([ax, ay]))
    b = shapely.Polygon(np.column_stack([bx, by]))
    return float(shapely.intersection(a, b).area)


def polyline_fraction_in_disks(x0, y0, x1, y1, midx, halfspan, cx, cy, r):
    cx = np.asarray(cx, dtype=np.float64)
    out = np.zeros(cx.shape[0])
    for i in range(cx.shape[0]):
        k0 = np.searchsorted(midx, cx[i] - r[i] - halfspan, side="left")
        k1 = np.searchsorted(midx, cx[i] + r[i] + halfspan, side="left")
        if k1 <= k0:
            continue
        dx = x1[k0:k1] - x0[k0:k1]
        dy = y1[k0:k1] - y0[k0:k1]
        fx = x0[k0:k1] - cx[i]
        fy = y0[k0:k1] - cy[i]
        A = dx * dx + dy * dy
        B = fx * dx + fy * dy
        C = fx * fx + fy * fy - r[i] * r[i]
        disc = B * B - A * C
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = np.maximum((-B - sq) / A, 0.0)
        t1 = np.minimum((-B + sq) / A, 1.0)
        out[i] = np.sum(np.where(ok & (t1 > t0), t1 - t0, 0.0))
    return out


def polyline_fraction_profile(x0, y0, x1, y1, cx, cy, r):
    out = np.zeros((len(cx), len(r)))
    dx, dy = x1 - x0, y1 - y0
    A = dx * dx + dy * dy
    for i in range(len(cx)):
        fx, fy = x0 - cx[i], y0 - cy[i]
        gx, gy = x1 - cx[i], y1 - cy[i]
        B = fx * dx + fy * dy
        t = np.clip(-B / A, 0.0, 1.0)
        dmin = np.hypot(fx + t * dx, fy + t * dy)
        dmax = np.sqrt(np.maximum(fx * fx + fy * fy, gx * gx + gy * gy))
        j0 = np.searchsorted(r, dmin, side="left")
        j1 = np.searchsorted(r, dmax, side="left")
        out[i] = np.cumsum(np.bincount(j1, minlength=len(r) + 1))[:len(r)]
        cnt = j1 - j0
        k = np.repeat(np.arange(len(x0)), cnt)
        j = np.repeat(j0 - (np.cumsum(cnt) - cnt), cnt) + np.arange(cnt.sum())
        C = fx[k] ** 2 + fy[k] ** 2 - r[j] ** 2
        disc = B[k] ** 2 - A[k] * C
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = np.maximum((-B[k] - sq) / A[k], 0.0)
        t1 = np.minimum((-B[k] + sq) / A[k], 1.0)
        out[i] += np.bincount(j, np.where(ok & (t1 > t0), t1 - t0, 0.0), minlength=len(r))
    return out


def count_in_balls(pts, centers, radii):
    pts = np.asarray(pts, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    if pts.shape[0] == 0:
        return np.zeros(centers.shape[0], dtype=np.int64)
    tree = cKDTree(pts)
    # cKDTree uses closed balls; the tiny inflation guards round-off at |p-c| = r
    cnt = tree.query_ball_point(centers, radii * (1 + 1e-15), return_length=True)
    return np.asarray(cnt, dtype=np.int64)


def edge_ft_sums(mx, my, ex, ey, fx, fy):
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    nf = fx.shape[0]
    S = np.zeros(nf, dtype=np.complex128)
    T = np.zeros(nf, dtype=np.complex128)
    step = max(1, (1 << 22) // max(1, mx.shape[0]))
    for lo in range(0, nf, step):
        u = fx[lo:lo + step, None]
        v = fy[lo:lo + step, None]
        w = np.sinc(u * ex + v * ey)
        ph = np.exp(-2j * np.pi * (u * mx + v * my)) * w
        S[lo:lo + step] = ph.sum(axis=1)
        T[lo:lo + step] = (ph * (u * ey - v * ex)).sum(axis=1)
    return S, T
