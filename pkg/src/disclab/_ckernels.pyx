# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every function here has a twin with the same signature in ``_pykernels``;
``disclab.kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, sin, cos, fabs, NAN, M_PI
from libc.stdlib cimport malloc, free, realloc, qsort

cnp.import_array()


# ---------------------------------------------------------------- point in polygon

cdef inline bint _on_segment(double px, double py, double ax, double ay,
                             double bx, double by) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay
    cdef double cr = (px - ax) * dy - (py - ay) * dx
    cdef double l2 = dx * dx + dy * dy
    if cr * cr > 1e-26 * l2:
        return False
    cdef double t = (px - ax) * dx + (py - ay) * dy
    return -1e-13 * l2 <= t <= l2 * (1.0 + 1e-13)


def pip_slab(const double[::1] x0, const double[::1] y0,
             const double[::1] x1, const double[::1] y1,
             double ybase, double inv_h,
             const cnp.int64_t[::1] ptr, const cnp.int64_t[::1] idx,
             const double[::1] px, const double[::1] py):
    """Even-odd membership of points using a horizontal slab index.

    Points lying on an edge count as inside.
    """
    cdef Py_ssize_t n = px.shape[0], nslab = ptr.shape[0] - 1
    out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] res = out
    cdef Py_ssize_t i, k, e, s
    cdef double x, y, xa, ya, xb, yb, xi
    cdef int cnt
    cdef bint edge_hit
    with nogil:
        for i in range(n):
            x = px[i]
            y = py[i]
            s = <Py_ssize_t> floor((y - ybase) * inv_h)
            if s < 0 or s >= nslab:
                continue
            cnt = 0
            edge_hit = False
            for k in range(ptr[s], ptr[s + 1]):
                e = idx[k]
                xa = x0[e]; ya = y0[e]; xb = x1[e]; yb = y1[e]
                if _on_segment(x, y, xa, ya, xb, yb):
                    edge_hit = True
                    break
                if (ya > y) != (yb > y):
                    xi = xa + (y - ya) * (xb - xa) / (yb - ya)
                    if x < xi:
                        cnt += 1
            if edge_hit or (cnt & 1):
                res[i] = 1
    return out


# ---------------------------------------------------------------- polygon intersection area

cdef struct Cross:
    Py_ssize_t ea
    Py_ssize_t eb
    double ta
    double tb


cdef int _cmp_b(const void* p, const void* q) noexcept nogil:
    cdef const Cross* a = <const Cross*> p
    cdef const Cross* b = <const Cross*> q
    if a.eb != b.eb:
        return -1 if a.eb < b.eb else 1
    if a.tb != b.tb:
        return -1 if a.tb < b.tb else 1
    return 0


cdef int _cmp_a(const void* p, const void* q) noexcept nogil:
    cdef const Cross* a = <const Cross*> p
    cdef const Cross* b = <const Cross*> q
    if a.ea != b.ea:
        return -1 if a.ea < b.ea else 1
    if a.ta != b.ta:
        return -1 if a.ta < b.ta else 1
    return 0


cdef int _vertex_state(double x, double y, const double[::1] vx,
                       const double[::1] vy, double eps2) noexcept nogil:
    # 1 inside, 0 outside, -1 when the point is within sqrt(eps2) of the boundary
    cdef Py_ssize_t n = vx.shape[0], i, j
    cdef bint inside = False
    cdef double xa, ya, xb, yb, dx, dy, t, l2, qx, qy
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        xa = vx[i]; ya = vy[i]; xb = vx[j]; yb = vy[j]
        dx = xb - xa; dy = yb - ya
        l2 = dx * dx + dy * dy
        t = 0.0
        if l2 > 0:
            t = ((x - xa) * dx + (y - ya) * dy) / l2
            if t < 0.0: t = 0.0
            if t > 1.0: t = 1.0
        qx = xa + t * dx - x; qy = ya + t * dy - y
        if qx * qx + qy * qy <= eps2:
            return -1
        if (ya > y) != (yb > y):
            if x < xa + (y - ya) * dx / dy:
                inside = not inside
    return 1 if inside else 0


cdef int _start_state(Cross* cr, Py_ssize_t nc, bint by_a,
                      const double[::1] vx, const double[::1] vy,
                      const double[::1] ox, const double[::1] oy,
                      double gx0, double gx1, double gy0, double gy1,
                      double eps2) noexcept nogil:
    """Inside flag of vertex 0, read off a vertex that is clearly away from the
    other boundary and carried back through the crossings before it."""
    cdef Py_ssize_t n = vx.shape[0], s, c, flips
    cdef int st
    for s in range(min(n, 256)):
        if vx[s] < gx0 or vx[s] > gx1 or vy[s] < gy0 or vy[s] > gy1:
            st = 0
        else:
            st = _vertex_state(vx[s], vy[s], ox, oy, eps2)
            if st < 0:
                continue
        flips = 0
        for c in range(nc):
            if (cr[c].ea if by_a else cr[c].eb) < s:
                flips += 1
        return st ^ (flips & 1)
    return -1


cdef double _walk(Cross* cr, Py_ssize_t nc, bint by_a,
                  const double[::1] vx, const double[::1] vy,
                  bint inside0, int* ok) noexcept nogil:
    # twice the area enclosed by the parts of the walked boundary lying inside
    cdef Py_ssize_t n = vx.shape[0], i, j, c = 0, ei
    cdef double acc = 0.0, px, py, qx, qy, cx, cy, t, nx, ny
    cdef bint inside = inside0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        px = vx[i]; py = vy[i]; qx = vx[j]; qy = vy[j]
        cx = px; cy = py
        while c < nc:
            ei = cr[c].ea if by_a else cr[c].eb
            if ei != i:
                break
            t = cr[c].ta if by_a else cr[c].tb
            nx = px + t * (qx - px)
            ny = py + t * (qy - py)
            if inside:
                acc += cx * ny - cy * nx
            inside = not inside
            cx = nx; cy = ny
            c += 1
        if inside:
            acc += cx * qy - cy * qx
    if inside != inside0:
        ok[0] = 0
    return acc


def polygon_intersection_area(const double[::1] ax, const double[::1] ay,
                              const double[::1] bx, const double[::1] by,
                              int grid=0):
    """Area of A ∩ B for simple counterclockwise polygons.

    Boundary pieces of each polygon lying inside the other are integrated
    with Green's theorem. Crossings are located through a uniform grid over
    the overlap of the bounding boxes. Returns NaN when two edges touch
    without crossing or the crossing parity check fails; callers fall back
    then.
    """
    cdef Py_ssize_t na = ax.shape[0], nb = bx.shape[0]
    cdef double gx0, gx1, gy0, gy1
    gx0 = max(np.min(ax), np.min(bx)); gx1 = min(np.max(ax), np.max(bx))
    gy0 = max(np.min(ay), np.min(by)); gy1 = min(np.max(ay), np.max(by))
    if not (gx0 < gx1 and gy0 < gy1):
        return 0.0
    cdef int gn = grid
    if gn <= 0:
        gn = <int> sqrt(<double> min(na, nb)) + 1
        gn = max(16, min(gn, 2048))
    cdef double cw = (gx1 - gx0) / gn, ch = (gy1 - gy0) / gn
    cdef double icw = 1.0 / cw, ich = 1.0 / ch

    cdef Py_ssize_t ncell = <Py_ssize_t> gn * gn
    cdef cnp.int64_t* cptr = <cnp.int64_t*> malloc((ncell + 1) * sizeof(cnp.int64_t))
    cdef cnp.int64_t* fill = <cnp.int64_t*> malloc((ncell + 1) * sizeof(cnp.int64_t))
    cdef Py_ssize_t* stamp = <Py_ssize_t*> malloc(nb * sizeof(Py_ssize_t))
    cdef cnp.int64_t* cidx = NULL
    cdef Cross* cr = NULL
    cdef Py_ssize_t ncr = 0, cap = 1024
    cr = <Cross*> malloc(cap * sizeof(Cross))

    cdef Py_ssize_t i, j, k, ii, jj, c, e, ci0, ci1, cj0, cj1, total
    cdef double xa, ya, xb, yb, xc, yc, xd, yd, lo_x, hi_x, lo_y, hi_y
    cdef double d1, d2, d3, d4, sumA = 0.0, sumB = 0.0, eps2
    cdef int ok = 1, st

    with nogil:
        for c in range(ncell + 1):
            cptr[c] = 0
        # count B edges per cell
        for j in range(nb):
            k = j + 1 if j + 1 < nb else 0
            lo_x = min(bx[j], bx[k]); hi_x = max(bx[j], bx[k])
            lo_y = min(by[j], by[k]); hi_y = max(by[j], by[k])
            if hi_x < gx0 or lo_x > gx1 or hi_y < gy0 or lo_y > gy1:
                continue
            ci0 = <Py_ssize_t> floor((max(lo_x, gx0) - gx0) * icw)
            ci1 = <Py_ssize_t> floor((min(hi_x, gx1) - gx0) * icw)
            cj0 = <Py_ssize_t> floor((max(lo_y, gy0) - gy0) * ich)
            cj1 = <Py_ssize_t> floor((min(hi_y, gy1) - gy0) * ich)
            # an edge on the far side of the overlap box maps to index gn
            if ci0 >= gn: ci0 = gn - 1
            if cj0 >= gn: cj0 = gn - 1
            if ci1 >= gn: ci1 = gn - 1
            if cj1 >= gn: cj1 = gn - 1
            for jj in range(cj0, cj1 + 1):
                for ii in range(ci0, ci1 + 1):
                    cptr[jj * gn + ii + 1] += 1
        for c in range(ncell):
            cptr[c + 1] += cptr[c]
        total = cptr[ncell]
        cidx = <cnp.int64_t*> malloc((total + 1) * sizeof(cnp.int64_t))
        for c in range(ncell + 1):
            fill[c] = cptr[c]
        for j in range(nb):
            stamp[j] = -1
            k = j + 1 if j + 1 < nb else 0
            lo_x = min(bx[j], bx[k]); hi_x = max(bx[j], bx[k])
            lo_y = min(by[j], by[k]); hi_y = max(by[j], by[k])
            if hi_x < gx0 or lo_x > gx1 or hi_y < gy0 or lo_y > gy1:
                continue
            ci0 = <Py_ssize_t> floor((max(lo_x, gx0) - gx0) * icw)
            ci1 = <Py_ssize_t> floor((min(hi_x, gx1) - gx0) * icw)
            cj0 = <Py_ssize_t> floor((max(lo_y, gy0) - gy0) * ich)
            cj1 = <Py_ssize_t> floor((min(hi_y, gy1) - gy0) * ich)
            # an edge on the far side of the overlap box maps to index gn
            if ci0 >= gn: ci0 = gn - 1
            if cj0 >= gn: cj0 = gn - 1
            if ci1 >= gn: ci1 = gn - 1
            if cj1 >= gn: cj1 = gn - 1
            for jj in range(cj0, cj1 + 1):
                for ii in range(ci0, ci1 + 1):
                    c = jj * gn + ii
                    cidx[fill[c]] = j
                    fill[c] += 1

        # crossings, in A-edge order
        for i in range(na):
            k = i + 1 if i + 1 < na else 0
            xa = ax[i]; ya = ay[i]; xb = ax[k]; yb = ay[k]
            lo_x = min(xa, xb); hi_x = max(xa, xb)
            lo_y = min(ya, yb); hi_y = max(ya, yb)
            if hi_x < gx0 or lo_x > gx1 or hi_y < gy0 or lo_y > gy1:
                continue
            ci0 = <Py_ssize_t> floor((max(lo_x, gx0) - gx0) * icw)
            ci1 = <Py_ssize_t> floor((min(hi_x, gx1) - gx0) * icw)
            cj0 = <Py_ssize_t> floor((max(lo_y, gy0) - gy0) * ich)
            cj1 = <Py_ssize_t> floor((min(hi_y, gy1) - gy0) * ich)
            # an edge on the far side of the overlap box maps to index gn
            if ci0 >= gn: ci0 = gn - 1
            if cj0 >= gn: cj0 = gn - 1
            if ci1 >= gn: ci1 = gn - 1
            if cj1 >= gn: cj1 = gn - 1
            for jj in range(cj0, cj1 + 1):
                for ii in range(ci0, ci1 + 1):
                    c = jj * gn + ii
                    for e in range(cptr[c], cptr[c + 1]):
                        j = cidx[e]
                        if stamp[j] == i:
                            continue
                        stamp[j] = i
                        k = j + 1 if j + 1 < nb else 0
                        xc = bx[j]; yc = by[j]; xd = bx[k]; yd = by[k]
                        d1 = (xd - xc) * (ya - yc) - (yd - yc) * (xa - xc)
                        d2 = (xd - xc) * (yb - yc) - (yd - yc) * (xb - xc)
                        d3 = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)
                        d4 = (xb - xa) * (yd - ya) - (yb - ya) * (xd - xa)
                        if d1 == 0 or d2 == 0 or d3 == 0 or d4 == 0:
                            # touching or collinear edges: leave it to the caller
                            if d1 * d2 <= 0 and d3 * d4 <= 0:
                                ok = 0
                            continue
                        if (d1 > 0) == (d2 > 0) or (d3 > 0) == (d4 > 0):
                            continue
                        if ncr == cap:
                            cap *= 2
                            cr = <Cross*> realloc(cr, cap * sizeof(Cross))
                        cr[ncr].ea = i
                        cr[ncr].eb = j
                        cr[ncr].ta = d1 / (d1 - d2)
                        cr[ncr].tb = d3 / (d3 - d4)
                        ncr += 1

        eps2 = 1e-24 * ((gx1 - gx0) ** 2 + (gy1 - gy0) ** 2)
        qsort(cr, ncr, sizeof(Cross), _cmp_a)
        st = _start_state(cr, ncr, True, ax, ay, bx, by, gx0, gx1, gy0, gy1, eps2)
        if st < 0:
            ok = 0
        else:
            sumA = _walk(cr, ncr, True, ax, ay, st == 1, &ok)
        qsort(cr, ncr, sizeof(Cross), _cmp_b)
        st = _start_state(cr, ncr, False, bx, by, ax, ay, gx0, gx1, gy0, gy1, eps2)
        if st < 0:
            ok = 0
        else:
            sumB = _walk(cr, ncr, False, bx, by, st == 1, &ok)

    free(cptr); free(fill); free(stamp); free(cidx); free(cr)
    if not ok:
        return NAN
    return 0.5 * (sumA + sumB)


# ---------------------------------------------------------------- polyline inside disks

cdef inline Py_ssize_t _lower_bound(const double[::1] a, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def polyline_fraction_in_disks(const double[::1] x0, const double[::1] y0,
                             const double[::1] x1, const double[::1] y1,
                             const double[::1] midx, double halfspan,
                             const double[::1] cx, const double[::1] cy,
                             const double[::1] r):
    """Sum over segments of the fraction of each segment inside each closed disk.

    Segments must be sorted by midpoint abscissa ``midx``; ``halfspan`` bounds
    half of any segment's x-extent.
    """
    cdef Py_ssize_t nd = cx.shape[0], i, k, k0, k1
    out = np.zeros(nd, dtype=np.float64)
    cdef double[::1] res = out
    cdef double dx, dy, fx, fy, A, B, C, disc, sq, t0, t1, acc, rr
    with nogil:
        for i in range(nd):
            rr = r[i]
            k0 = _lower_bound(midx, cx[i] - rr - halfspan)
            k1 = _lower_bound(midx, cx[i] + rr + halfspan)
            acc = 0.0
            for k in range(k0, k1):
                dx = x1[k] - x0[k]
                dy = y1[k] - y0[k]
                fx = x0[k] - cx[i]
                fy = y0[k] - cy[i]
                A = dx * dx + dy * dy
                B = fx * dx + fy * dy
                C = fx * fx + fy * fy - rr * rr
                disc = B * B - A * C
                if disc <= 0.0:
                    continue
                sq = sqrt(disc)
                t0 = (-B - sq) / A
                t1 = (-B + sq) / A
                if t0 < 0.0: t0 = 0.0
                if t1 > 1.0: t1 = 1.0
                if t1 > t0:
                    acc += t1 - t0
            res[i] = acc
    return out


def polyline_fraction_profile(const double[::1] x0, const double[::1] y0,
                              const double[::1] x1, const double[::1] y1,
                              const double[::1] cx, const double[::1] cy,
                              const double[::1] r):
    """Segment fractions inside B(c_i, r_j) for every center and sorted radius.

    A segment counts fully for radii beyond its farthest endpoint; only the
    radii between its nearest and farthest distance need the chord formula.
    """
    cdef Py_ssize_t nc = cx.shape[0], nr = r.shape[0], ns = x0.shape[0]
    cdef Py_ssize_t i, j, k, j0, j1
    out = np.zeros((nc, nr), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double[::1] full = np.zeros(nr + 1, dtype=np.float64)
    cdef double dx, dy, fx, fy, gx, gy, A, B, C, disc, sq, t0, t1, t, dmin2, dmax2, acc, ex, ey
    with nogil:
        for i in range(nc):
            for j in range(nr + 1):
                full[j] = 0.0
            for k in range(ns):
                dx = x1[k] - x0[k]
                dy = y1[k] - y0[k]
                fx = x0[k] - cx[i]
                fy = y0[k] - cy[i]
                gx = x1[k] - cx[i]
                gy = y1[k] - cy[i]
                A = dx * dx + dy * dy
                B = fx * dx + fy * dy
                t = -B / A
                if t < 0.0: t = 0.0
                if t > 1.0: t = 1.0
                ex = fx + t * dx
                ey = fy + t * dy
                dmin2 = ex * ex + ey * ey
                dmax2 = fx * fx + fy * fy
                if gx * gx + gy * gy > dmax2:
                    dmax2 = gx * gx + gy * gy
                j0 = _lower_bound(r, sqrt(dmin2))
                j1 = _lower_bound(r, sqrt(dmax2))
                full[j1] += 1.0
                for j in range(j0, j1):
                    C = fx * fx + fy * fy - r[j] * r[j]
                    disc = B * B - A * C
                    if disc <= 0.0:
                        continue
                    sq = sqrt(disc)
                    t0 = (-B - sq) / A
                    t1 = (-B + sq) / A
                    if t0 < 0.0: t0 = 0.0
                    if t1 > 1.0: t1 = 1.0
                    if t1 > t0:
                        res[i, j] += t1 - t0
            acc = 0.0
            for j in range(nr):
                acc += full[j]
                res[i, j] += acc
    return out


# ---------------------------------------------------------------- counts in balls

def count_in_balls(const double[:, ::1] pts, const double[:, ::1] centers,
                   const double[::1] radii):
    """Number of points in each closed ball (boundary counts as inside)."""
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1], m = centers.shape[0]
    cdef Py_ssize_t i, j, q
    out = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    cdef double r2, s, t
    cdef cnp.int64_t cnt
    with nogil:
        for j in range(m):
            r2 = radii[j] * radii[j]
            cnt = 0
            for i in range(n):
                s = 0.0
                for q in range(d):
                    t = pts[i, q] - centers[j, q]
                    s += t * t
                if s <= r2:
                    cnt += 1
            res[j] = cnt
    return out


# ---------------------------------------------------------------- edge Fourier sums

def edge_ft_sums(const double[::1] mx, const double[::1] my,
                 const double[::1] ex, const double[::1] ey,
                 const double[::1] fx, const double[::1] fy):
    """Per-frequency sums over segments with midpoints m and vectors e.

    Returns (S, T) with S = Σ e^{-2πiξ·m} sinc(ξ·e) and
    T = Σ (ξ·ν) e^{-2πiξ·m} sinc(ξ·e), ν = (e_y, -e_x), sinc(t) = sin(πt)/(πt).
    """
    cdef Py_ssize_t nf = fx.shape[0], ne = mx.shape[0], i, k
    S = np.zeros(nf, dtype=np.complex128)
    T = np.zeros(nf, dtype=np.complex128)
    cdef double complex[::1] s_ = S
    cdef double complex[::1] t_ = T
    cdef double u, v, ph, w, sr, si, tr, ti, a, nu, c, sn
    with nogil:
        for i in range(nf):
            u = fx[i]; v = fy[i]
            sr = 0.0; si = 0.0; tr = 0.0; ti = 0.0
            for k in range(ne):
                a = M_PI * (u * ex[k] + v * ey[k])
                if fabs(a) < 1e-8:
                    w = 1.0 - a * a / 6.0
                else:
                    w = sin(a) / a
                ph = -2.0 * M_PI * (u * mx[k] + v * my[k])
                c = cos(ph) * w
                sn = sin(ph) * w
                nu = u * ey[k] - v * ex[k]
                sr += c; si += sn
                tr += nu * c; ti += nu * sn
            s_[i] = sr + 1j * si
            t_[i] = tr + 1j * ti
    return S, T
