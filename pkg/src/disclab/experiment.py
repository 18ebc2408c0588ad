"""Config-driven sweeps over N with exponent fits, reports and plots.

A config names a measure μ, a test shape Ω, a family (affine or half-space),
a point generator and a dyadic list of N. ``run_experiment`` estimates the
L² discrepancy at each N, fits the log₂–log₂ slope and compares it with a
target; ``run_suite`` runs a manifest of configs and writes one verdict row
per config. Outputs depend only on the config and its seed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import discrepancy as disc
from . import geometry as geo
from . import measure as msr
from . import pointset as pts
from .discrepancy import _workers
from .errors import LabError

LOG3_4 = math.log(4, 3)
GENERATORS = ("iid", "partition", "equispaced-circle", "csv")
DEFAULT_BAND = 0.05
EXCLUDE_REL_STDERR = 0.25


class ExperimentError(LabError):
    """A sweep failed; the message names N and the stage."""


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``measure`` and ``shape`` use the package's JSON dictionaries."""

    name: str
    measure: dict
    shape: dict | None
    family: dict
    generator: str
    N_list: tuple
    n_poses: int = 4096
    seed: int = 0
    out: str | None = None
    band: float = DEFAULT_BAND
    target: float | None = None
    alpha: float | None = None
    beta: float | None = None
    jitter: bool = False
    csv_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        n = self.N_list
        if len(n) < 4:
            raise LabError("N_list needs at least 4 entries for a slope fit")
        if any(b <= a for a, b in zip(n, n[1:])) or n[0] < 1:
            raise LabError("N_list must be positive and strictly increasing")
        if self.generator not in GENERATORS:
            raise LabError(f"unknown generator {self.generator!r}; use one of {GENERATORS}")
        if self.generator == "csv" and not self.csv_path:
            raise LabError("the csv generator needs csv_path (with {N} for the size)")
        if self.family.get("kind") not in ("affine", "halfspace"):
            raise LabError("family kind must be 'affine' or 'halfspace'")
        if self.family["kind"] == "affine" and self.shape is None:
            raise LabError("an affine family needs a shape")
        if not self.band > 0:
            raise LabError("band must be positive")
        # resolve ids now so a bad config fails before any work
        self.resolve()

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise LabError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise LabError(f"config file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()))

    def to_dict(self):
        d = asdict(self)
        d["N_list"] = list(self.N_list)
        return d

    def replace(self, **kw):
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    def resolve(self):
        """(μ, family) objects for the config."""
        mu = msr.measure_from_dict(self.measure)
        f = self.family
        if f["kind"] == "affine":
            shape = geo.shape_from_dict(self.shape)
            fam = disc.AffineFamily(shape, f.get("a", 0.25), f.get("b", 1.0), f.get("box"))
        else:
            fam = disc.HalfSpaceFamily(f.get("rho_max"), mu.dim)
        return mu, fam


def _beta_of(shape):
    if isinstance(shape, geo.KochRegion):
        return 2 - LOG3_4, "snowflake region: β = 2 − log₃4"
    if isinstance(shape, geo.RectangleUnionGamma):
        return shape.beta, "rectangle union: β from construction"
    if isinstance(shape, (geo.Ball, geo.ConvexPolygon, geo.HalfSpace)):
        return 1.0, "convex body: β = 1"
    raise LabError(f"no β known for {type(shape).__name__}; set beta in the config")


def predicted_exponent(config):
    """(1/2 − β/(2α), provenance) for the config."""
    mu, fam = config.resolve()
    if config.alpha is not None:
        alpha, a_src = float(config.alpha), "config"
    else:
        alpha, a_src = float(mu.alpha), f"{type(mu).__name__}.alpha"
    if config.beta is not None:
        beta, b_src = float(config.beta), "config"
    elif isinstance(fam, disc.HalfSpaceFamily):
        beta, b_src = 1.0, "half-spaces: β = 1"
    else:
        beta, b_src = _beta_of(fam.shape)
    return 0.5 - beta / (2 * alpha), {"alpha": alpha, "alpha_source": a_src, "beta": beta, "beta_source": b_src}


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    used: tuple
    excluded: tuple

    def to_dict(self):
        return asdict(self)


def fit_loglog(N, values, stderrs, exclude_first=True):
    """Weighted least squares of log₂ value on log₂ N.

    Point weights are 1/σ² with σ = stderr/(value·ln 2); the slope error comes
    from those σ alone. The smallest N is dropped when its stderr exceeds 25%
    of its value.
    """
    N = np.asarray(N, dtype=float)
    v = np.asarray(values, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    keep = np.ones(N.size, dtype=bool)
    if exclude_first and s[0] > EXCLUDE_REL_STDERR * v[0]:
        keep[0] = False
    x, y = np.log2(N[keep]), np.log2(v[keep])
    sig = s[keep] / (v[keep] * math.log(2))
    sig = np.where(sig > 0, sig, np.min(sig[sig > 0]) if np.any(sig > 0) else 1.0)
    w = 1 / sig ** 2
    X = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    coef = cov @ (X.T @ (w * y))
    used = tuple(int(n) for n in N[keep])
    excluded = tuple(int(n) for n in N[~keep])
    return SlopeFit(float(coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]), used, excluded)


def lower_bound_check(N, values, stderrs, exponent):
    """ĉ = L2(N₀)/N₀^e; every later N must satisfy L2(N) >= ĉ N^e − 3 stderr."""
    c = values[0] / N[0] ** exponent
    ok = [v >= c * n ** exponent - 3 * s for n, v, s in zip(N[1:], values[1:], stderrs[1:])]
    return float(c), bool(all(ok))


# ---------------------------------------------------------------- running

@dataclass
class ExperimentReport:
    config: dict
    rows: list
    fit: SlopeFit
    predicted: float
    provenance: dict
    target: float
    band: float
    c_hat: float
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v == "PASS" for v in self.verdicts.values())

    def to_dict(self):
        return {"config": self.config, "rows": self.rows, "fit": self.fit.to_dict(),
                "predicted_exponent": self.predicted, "provenance": self.provenance,
                "target": self.target, "band": self.band, "c_hat": self.c_hat,
                "exclusion_rule": f"drop the smallest N when stderr > {EXCLUDE_REL_STDERR:.0%} of its value",
                "verdicts": self.verdicts}


def _point_seed(seed, N):
    return int(np.random.SeedSequence([int(seed), int(N)]).generate_state(1)[0])


def make_points(config, mu, N):
    g = config.generator
    if g == "iid":
        return pts.iid_points(mu, N, seed=_point_seed(config.seed, N))
    if g == "partition":
        seed = _point_seed(config.seed, N) if config.jitter else None
        return pts.partition_points(mu, N, seed=seed, jitter=config.jitter)
    if g == "equispaced-circle":
        return pts.equispaced_circle(N)
    return pts.PointSet.from_csv(config.csv_path.format(N=N))


def _target(config, predicted):
    if config.target is not None:
        return float(config.target)
    # iid points have E|D|² ≍ N, so their slope is 1/2 whatever the geometry
    return 0.5 if config.generator == "iid" else predicted


def run_experiment(config, write=True, log=None):
    """Sweep N, fit the slope and write report.json, rows.csv and plot.svg."""
    mu, fam = config.resolve()
    predicted, prov = predicted_exponent(config)
    rows = []
    for N in config.N_list:
        stage = "points"
        try:
            P = make_points(config, mu, N)
            stage = "l2"
            if isinstance(fam, disc.AffineFamily):
                est = disc.l2_affine(P, mu, fam, config.n_poses, config.seed)
            else:
                est = disc.l2_halfspace(P, mu, fam, config.n_poses, config.seed)
        except (LabError, OSError, ValueError) as e:
            raise ExperimentError(f"{config.name}: N={N} stage={stage}: {e}") from e
        row = {"N": N, "generator": config.generator, **est.to_dict()}
        rows.append(row)
        if log:
            log(f"{config.name}: N={N} L2={est.value:.6g} ± {est.stderr:.2g}")
    Ns = [r["N"] for r in rows]
    vals = [r["value"] for r in rows]
    errs = [r["stderr"] for r in rows]
    fit = fit_loglog(Ns, vals, errs)
    target = _target(config, predicted)
    c_hat, lb_ok = lower_bound_check(Ns, vals, errs, predicted)
    verdicts = {"slope": "PASS" if abs(fit.slope - target) <= config.band else "FAIL",
                "lower_bound": "PASS" if lb_ok else "FAIL"}
    rep = ExperimentReport(config.to_dict(), rows, fit, predicted, prov, target, config.band, c_hat, verdicts)
    if write:
        write_outputs(rep, Path(config.out or f"out/{config.name}"))
    return rep


ROW_FIELDS = ("N", "generator", "value", "stderr", "n_poses", "seed", "mean_square",
              "mean_square_stderr", "family_volume")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in ROW_FIELDS])
    return buf.getvalue()


def write_outputs(rep, out):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "rows.csv").write_text(rows_csv(rep.rows), newline="")
    (out / "plot.svg").write_text(plot_svg(rep))


# ---------------------------------------------------------------- svg

def plot_svg(rep, width=520, height=380):
    """Log-log scatter with stderr bars, the fitted line and the predicted slope."""
    N = np.array([r["N"] for r in rep.rows], dtype=float)
    v = np.array([r["value"] for r in rep.rows])
    s = np.array([r["stderr"] for r in rep.rows])
    x = np.log2(N)
    lo_v = np.log2(np.maximum(v - s, v * 0.5))
    hi_v = np.log2(v + s)
    x0, x1 = x.min() - 0.5, x.max() + 0.5
    y0, y1 = lo_v.min() - 0.5, hi_v.max() + 0.5
    m = 50

    def px(a):
        return m + (a - x0) / (x1 - x0) * (width - 2 * m)

    def py(b):
        return height - m - (b - y0) / (y1 - y0) * (height - 2 * m)

    f = rep.fit
    used = np.isin(N, f.used)
    xa = x[used][0]
    ya = np.log2(v[used][0])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>']
    for xi in x:
        out.append(f'<text x="{px(xi):.2f}" y="{height - m + 15}" text-anchor="middle">2^{xi:.0f}</text>')
    for t in np.arange(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<text x="{m - 6}" y="{py(t) + 4:.2f}" text-anchor="end">2^{t:.0f}</text>')
    out.append(f'<text x="{width / 2:.0f}" y="{height - 10}" text-anchor="middle">N</text>')
    out.append(f'<text x="14" y="{height / 2:.0f}" transform="rotate(-90 14 {height / 2:.0f})" '
               f'text-anchor="middle">L2 discrepancy</text>')
    line = lambda slope, b, color, dash: (
        f'<line x1="{px(x0):.2f}" y1="{py(b + slope * x0):.2f}" x2="{px(x1):.2f}" '
        f'y2="{py(b + slope * x1):.2f}" stroke="{color}"{dash}/>')
    out.append(line(f.slope, f.intercept, "#1f77b4", ""))
    out.append(line(rep.target, ya - rep.target * xa, "#d62728", ' stroke-dasharray="5,4"'))
    for xi, vi, l, h, u in zip(x, v, lo_v, hi_v, used):
        c = "black" if u else "#999999"
        out.append(f'<line x1="{px(xi):.2f}" y1="{py(l):.2f}" x2="{px(xi):.2f}" y2="{py(h):.2f}" stroke="{c}"/>')
        out.append(f'<circle cx="{px(xi):.2f}" cy="{py(math.log2(vi)):.2f}" r="3" fill="{c}"/>')
    out.append(f'<text x="{m + 8}" y="{m - 20}">{rep.config["name"]}: slope {f.slope:.4f} ± {f.stderr:.4f}, '
               f'target {rep.target:.4f} ({rep.verdicts["slope"]})</text>')
    out.append(f'<text x="{m + 8}" y="{m - 6}" fill="#1f77b4">fit</text>'
               f'<text x="{m + 40}" y="{m - 6}" fill="#d62728">target slope</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- suites

SUMMARY_FIELDS = ("name", "generator", "slope", "slope_stderr", "target", "band", "c_hat",
                  "slope_verdict", "lower_bound_verdict", "verdict")


def load_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise LabError(f"manifest not found: {path}")
    doc = json.loads(path.read_text())
    entries = doc.get("configs", []) if isinstance(doc, dict) else doc
    configs = []
    for e in entries:
        if isinstance(e, str):
            p = (path.parent / e) if not Path(e).is_absolute() else Path(e)
            configs.append(ExperimentConfig.load(p))
        else:
            configs.append(ExperimentConfig.from_dict(e))
    return configs


def run_suite(manifest, out=None, seed=None, n_poses=None, log=None):
    """Run every config of a manifest; returns (summary rows, exit status)."""
    configs = load_manifest(manifest)
    out = Path(out) if out else Path(manifest).parent / "suite_out"
    configs = [c.replace(seed=seed, n_poses=n_poses, out=str(out / c.name)) for c in configs]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise LabError("config names in a manifest must be unique")
    workers = min(_workers(), max(1, len(configs)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reports = list(ex.map(lambda c: run_experiment(c, log=log), configs))
    else:
        reports = [run_experiment(c, log=log) for c in configs]
    rows = []
    for c, r in zip(configs, reports):
        rows.append({"name": c.name, "generator": c.generator, "slope": r.fit.slope,
                     "slope_stderr": r.fit.stderr, "target": r.target, "band": r.band, "c_hat": r.c_hat,
                     "slope_verdict": r.verdicts["slope"], "lower_bound_verdict": r.verdicts["lower_bound"],
                     "verdict": "PASS" if r.passed else "FAIL"})
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(SUMMARY_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in SUMMARY_FIELDS])
    (out / "summary.csv").write_text(buf.getvalue(), newline="")
    return rows, int(any(r["verdict"] == "FAIL" for r in rows))
