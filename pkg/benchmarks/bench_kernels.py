"""Time the compiled kernels against the numpy fallback on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each row checks that both backends agree before timing them.
"""
import argparse
import time

import numpy as np

from disclab import geometry as geo
from disclab import kernels


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(scale):
    rng = np.random.default_rng(0)
    koch = geo.koch_polygon(7 if scale else 5)
    idx = geo.build_slab_index(koch)
    p = rng.uniform(-0.6, 0.6, (200_000 * scale + 20_000, 2))
    yield "pip_slab", lambda impl: kernels.pip_slab(idx, p[:, 0], p[:, 1], impl)

    other = koch @ np.array([[0.8, -0.6], [0.6, 0.8]]) * 0.9 + 0.05
    yield "polygon_intersection_area", lambda impl: kernels.polygon_intersection_area(koch, other, impl)

    segs = geo.SegmentSet.from_closed(koch)
    c = rng.uniform(-0.5, 0.5, (200 * scale + 50, 2))
    r = rng.uniform(0.01, 0.3, c.shape[0])
    yield "polyline_fraction_in_disks", lambda impl: kernels.polyline_fraction_in_disks(segs, c, r, impl)

    radii = np.sort(rng.uniform(0.001, 0.5, 64))
    yield "polyline_fraction_profile", lambda impl: kernels.polyline_fraction_profile(segs, c, radii, impl)

    pts = rng.uniform(-0.5, 0.5, (4096 * scale + 512, 2))
    cb = rng.uniform(-0.5, 0.5, (4096, 2))
    rb = rng.uniform(0.05, 0.3, 4096)
    yield "count_in_balls", lambda impl: kernels.count_in_balls(pts, cb, rb, impl)

    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    e = np.roll(sq, -1, 0) - sq
    m = sq + e / 2
    f = rng.normal(0, 20, (20_000 * scale + 2000, 2))
    yield "edge_ft_sums", lambda impl: kernels.edge_ft_sums(m[:, 0], m[:, 1], e[:, 0], e[:, 1],
                                                            f[:, 0], f[:, 1], impl)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small inputs, for smoke runs")
    args = ap.parse_args(argv)
    try:
        cy = kernels.backend("cython")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1
    py = kernels.backend("python")
    print(f"{'kernel':28s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for name, call in cases(0 if args.quick else 1):
        a, b = np.asarray(call(cy)), np.asarray(call(py))
        t = np.result_type(a.dtype, np.float64)
        diff = float(np.max(np.abs(a.astype(t) - b.astype(t)))) if a.size else 0.0
        tc, tp = best_of(lambda: call(cy), args.repeat), best_of(lambda: call(py), args.repeat)
        print(f"{name:28s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f} {diff:9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
