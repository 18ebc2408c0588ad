"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Setting ``DISCLAB_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from . import _pykernels

_want_pure = os.environ.get("DISCLAB_PURE_PYTHON", "") not in ("", "0")
try:
    if _want_pure:
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def backend(name=None):
    """Return a kernel module by name ("cython" or "python"), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pip_slab(index, px, py, impl=None):
    impl = impl or _impl
    return impl.pip_slab(index.x0, index.y0, index.x1, index.y1, index.ybase,
                         index.inv_h, index.ptr, index.idx, _c(px), _c(py)).view(bool)


def polygon_intersection_area(a, b, impl=None):
    impl = impl or _impl
    return impl.polygon_intersection_area(_c(a[:, 0]), _c(a[:, 1]), _c(b[:, 0]), _c(b[:, 1]), 0)


def polyline_fraction_in_disks(segs, centers, radii, impl=None):
    impl = impl or _impl
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    return impl.polyline_fraction_in_disks(segs.x0, segs.y0, segs.x1, segs.y1, segs.midx,
                                         segs.halfspan, _c(centers[:, 0]), _c(centers[:, 1]),
                                         _c(np.broadcast_to(radii, centers.shape[:1])))


def polyline_fraction_profile(segs, centers, radii, impl=None):
    """(centers, radii) table of summed segment fractions; radii must be sorted."""
    impl = impl or _impl
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    return impl.polyline_fraction_profile(segs.x0, segs.y0, segs.x1, segs.y1,
                                          _c(centers[:, 0]), _c(centers[:, 1]), _c(radii))


def count_in_balls(pts, centers, radii, impl=None):
    impl = impl or _impl
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    centers = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    radii = _c(np.broadcast_to(radii, centers.shape[:1]))
    return impl.count_in_balls(pts, centers, radii)


def edge_ft_sums(mx, my, ex, ey, fx, fy, impl=None):
    impl = impl or _impl
    return impl.edge_ft_sums(_c(mx), _c(my), _c(ex), _c(ey), _c(fx), _c(fy))
