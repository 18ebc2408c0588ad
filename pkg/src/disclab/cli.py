"""Command line entry point: ``lab run|suite|fit-beta|spectrum|cassels``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiment as exp
from . import geometry as geo
from . import measure as msr
from . import pointset as pts
from . import spectral as sp
from .errors import LabError


def _json_arg(text):
    """A JSON document given inline or as a path to a file."""
    p = Path(text)
    if p.is_file():
        return json.loads(p.read_text())
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise LabError(f"not a file or JSON document: {text}") from None


def _writer(path):
    fh = open(path, "w", newline="") if path else sys.stdout
    return fh, csv.writer(fh, lineterminator="\r\n")


def _log(args):
    return None if args.quiet else (lambda s: print(s, file=sys.stderr))


def cmd_run(args):
    cfg = exp.ExperimentConfig.load(args.config).replace(seed=args.seed, n_poses=args.poses, out=args.out)
    rep = exp.run_experiment(cfg, log=_log(args))
    f = rep.fit
    print(f"{cfg.name}: slope {f.slope:.4f} ± {f.stderr:.4f} target {rep.target:.4f} "
          f"slope {rep.verdicts['slope']} lower-bound {rep.verdicts['lower_bound']}")
    return 0 if rep.passed else 1


def cmd_suite(args):
    rows, status = exp.run_suite(args.manifest, out=args.out, seed=args.seed, n_poses=args.poses, log=_log(args))
    for r in rows:
        print(f"{r['verdict']} {r['name']} slope {r['slope']:.4f} target {r['target']:.4f}")
    return status


def cmd_fit_beta(args):
    shape = geo.shape_from_dict(_json_arg(args.shape)) if args.shape else geo.KochRegion(args.level)
    n = np.arange(args.n_min, args.n_max + 1)
    t = math.sqrt(3) / 2 * 3.0 ** (-n)
    fit = geo.fit_beta(shape, args.direction, t, samples=args.samples, seed=args.seed, kappa3=args.kappa3)
    fh, w = _writer(args.out)
    w.writerow(["t", "volume", "stderr"])
    for row in zip(fit.t, fit.values, fit.stderrs):
        w.writerow([repr(float(x)) for x in row])
    if args.out:
        fh.close()
    if not args.quiet:
        print(f"beta_hat {fit.beta_hat:.6f} kappa1 {fit.kappa1_hat:.6g} kappa2 {fit.kappa2_hat:.6g} "
              f"kappa3 {fit.kappa3:.6g}", file=sys.stderr)
    return 0


def cmd_spectrum(args):
    if args.kernel:
        fh, w = _writer(args.out)
        keys = ("M", "d", "L_decay", "c_psi", "psi_norm2", "K0", "C_L", "reach", "khat_min", "khat_max",
                "khat_beyond")
        w.writerow(keys)
        for M in args.kernel:
            cert = sp.build_kernel(M, args.decay, args.dim).certificate
            w.writerow([repr(float(cert[k])) for k in keys])
        if args.out:
            fh.close()
        return 0
    shape = geo.shape_from_dict(_json_arg(args.shape)) if args.shape else geo.KochRegion(args.level)
    grid = sp.SpectralGrid.build(shape, L=args.grid, S=args.extent, supersample=args.supersample)
    if args.dump:
        grid.dump(args.dump)
    top = args.top or grid.nyquist / 8
    rhos = top * 3.0 ** np.linspace(-2, 0, args.shells)
    band = sp.ShellBand(args.gamma, args.delta)
    e = sp.shell_energies(grid, rhos, band, deconvolve=not args.raw)
    fh, w = _writer(args.out)
    w.writerow(["rho", "energy"])
    for r, v in zip(rhos, e):
        w.writerow([repr(float(r)), repr(float(v))])
    if args.out:
        fh.close()
    if not args.quiet:
        slope = sp.fit_slope(rhos, e)
        print(f"shell slope {slope:.4f} parseval gap {grid.parseval_gap():.2e}", file=sys.stderr)
    return 0


def cmd_cassels(args):
    mu = msr.measure_from_dict(_json_arg(args.measure)) if args.measure else msr.uniform_square()
    if args.points:
        P = pts.PointSet.from_csv(args.points)
    else:
        P = pts.iid_points(mu, args.iid, seed=args.seed)
    M = args.M or 4 * math.sqrt(len(P.points))
    res = sp.cassels_montgomery(P, mu, M)
    N = res.N
    print(f"N {N} M {M:.6g} integral {res.value:.10g} ± {res.error:.2g} ratio {res.value / (N * M * M):.6g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="lab", description="Discrepancy experiments.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(q, poses=False):
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--out", default=None)
        q.add_argument("--quiet", action="store_true")
        if poses:
            q.add_argument("--poses", type=int, default=None, help="Monte Carlo poses per N")

    q = sub.add_parser("run", help="run one experiment config")
    q.add_argument("config")
    common(q, poses=True)
    q.set_defaults(func=cmd_run)

    q = sub.add_parser("suite", help="run a manifest of configs")
    q.add_argument("manifest")
    common(q, poses=True)
    q.set_defaults(func=cmd_suite)

    q = sub.add_parser("fit-beta", help="symmetric-difference exponent along t_n = (√3/2)3^-n")
    q.add_argument("--shape", help="shape JSON (inline or file); default KochRegion")
    q.add_argument("--level", type=int, default=8)
    q.add_argument("--direction", type=float, nargs=2, default=(1.0, 0.0))
    q.add_argument("--n-min", type=int, default=1)
    q.add_argument("--n-max", type=int, default=6)
    q.add_argument("--samples", type=int, default=200_000)
    q.add_argument("--kappa3", type=float, default=None)
    common(q)
    q.set_defaults(func=cmd_fit_beta)

    q = sub.add_parser("spectrum", help="shell energies of a shape, or kernel certificates")
    q.add_argument("--shape", help="shape JSON (inline or file); default KochRegion")
    q.add_argument("--level", type=int, default=8)
    q.add_argument("--grid", type=int, default=1024)
    q.add_argument("--extent", type=float, default=None, help="periodization box side")
    q.add_argument("--supersample", type=int, default=4)
    q.add_argument("--top", type=float, default=None, help="largest shell radius (default Nyquist/8)")
    q.add_argument("--shells", type=int, default=17)
    q.add_argument("--gamma", type=float, default=0.125)
    q.add_argument("--delta", type=float, default=8.0)
    q.add_argument("--raw", action="store_true", help="skip pixel deconvolution")
    q.add_argument("--dump", help="write the raster as raw f8 plus a JSON header")
    q.add_argument("--kernel", type=float, nargs="+", help="certify K_M for these M instead")
    q.add_argument("--decay", type=float, default=8.0)
    q.add_argument("--dim", type=int, default=2)
    common(q)
    q.set_defaults(func=cmd_spectrum)

    q = sub.add_parser("cassels", help="exponential-sum integral over 1 <= |ξ| <= M")
    q.add_argument("--points", help="CSV of points")
    q.add_argument("--iid", type=int, default=100, help="draw this many iid points instead")
    q.add_argument("--measure", help="measure JSON (default uniform square)")
    q.add_argument("--M", type=float, default=None, help="default 4√N")
    common(q)
    q.set_defaults(func=cmd_cassels)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.cmd == "cassels" and args.seed is None:
        args.seed = 0
    if args.cmd == "fit-beta" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except LabError as e:
        print(f"lab: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
