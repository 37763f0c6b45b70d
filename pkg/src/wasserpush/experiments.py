"""Convergence sweeps, bound audits and histogram comparisons, plus their file outputs."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import BoundReport, bound_report
from .config import ExperimentConfig, Problem, build_problem, metric_column, parse_metric
from .density import (
    NearFlatError,
    default_y_grid,
    empirical_measure,
    histogram_estimate,
    histogram_to_measure,
    l1_pdf_error,
    monotone_pieces,
    pdf_piecewise_monotone,
)
from .measure import from_samples, hminus1_distance, w1_via_cdf, wasserstein_p
from .pushforward import (
    ParameterQuadrature,
    build_quadrature,
    evaluate_on_nodes,
    make_rng,
    sample_inputs,
)
from .surrogates import fit_gpc_collocation, fit_pwl, fit_spline, fit_tensor_spline, jacobi_basis

__all__ = [
    "ConvergenceRecord",
    "RateFit",
    "make_surrogate",
    "reference_quadrature",
    "run_convergence",
    "fit_rate",
    "audit_bounds",
    "compare_histogram",
    "emit_outputs",
    "demo_oscillator",
    "resolution_sensitivity",
    "ERROR_FLOOR",
]

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-13


@dataclass
class ConvergenceRecord:
    N: int
    errors: dict
    walltime_ms: float
    failure: str | None = None


@dataclass
class RateFit:
    """Least-squares rate: power ``e = C N^s`` or exponential ``e = C 10^(s N)``."""

    model: str
    slope: float
    intercept: float
    r2: float
    n_min: int
    n_max: int
    n_points: int
    metric: str = "w1"

    @property
    def C(self) -> float:
        return math.exp(self.intercept) if self.model == "power" else 10.0**self.intercept

    def as_dict(self):
        return {
            "model": self.model,
            "metric": self.metric,
            "slope": self.slope,
            "C": self.C,
            "intercept": self.intercept,
            "r2": self.r2,
            "n_range": [self.n_min, self.n_max],
            "n_points": self.n_points,
        }


def reference_quadrature(problem: Problem, resolution: int) -> ParameterQuadrature:
    return build_quadrature(problem.box, problem.weight, resolution, "midpoint-grid")


def _per_axis(N, dim):
    return max(4, int(round(N ** (1.0 / dim))))


def make_surrogate(problem: Problem, kind: str, N: int, boundary: str = "not-a-knot"):
    """Fit the configured surrogate of ``problem.f`` from N samples."""
    box = problem.box
    f = problem.f
    if kind == "none":
        if problem.g is None:
            raise ValueError(f"problem {problem.name!r} has no fixed g")
        return problem.g
    if kind in ("tensor-spline",) or (kind == "spline" and problem.dim == 2):
        if problem.dim != 2:
            raise ValueError("tensor-spline surrogates need a 2D problem")
        m = _per_axis(N, 2)
        x1 = np.linspace(box.lower[0], box.upper[0], m)
        x2 = np.linspace(box.lower[1], box.upper[1], m)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        vals = np.asarray(f(np.stack([X1.ravel(), X2.ravel()], axis=1)), dtype=float).reshape(m, m)
        return fit_tensor_spline(x1, x2, vals, box)
    if problem.dim != 1:
        raise ValueError(f"{kind} surrogates are one-dimensional")
    lo, hi = box.lower[0], box.upper[0]
    if kind == "spline":
        x = np.linspace(lo, hi, N)
        ends = None
        if boundary == "clamped":
            d = problem.df or (lambda t: (f(t + 1e-6) - f(t - 1e-6)) / 2e-6)
            ends = (float(np.asarray(d(np.array([lo])))[0]), float(np.asarray(d(np.array([hi])))[0]))
        return fit_spline(x, f(x), boundary, ends, box)
    if kind == "pwl":
        x = np.linspace(lo, hi, N)
        return fit_pwl(x, f(x), box)
    if kind == "gpc":
        w = problem.weight
        b1, b2 = w.params if w.kind == "jacobi" else (0.0, 0.0)
        if w.kind not in ("jacobi", "uniform"):
            raise ValueError("gPC needs a uniform or Jacobi input weight")
        return fit_gpc_collocation(f, jacobi_basis(b1, b2, N + 1), N, box)
    raise ValueError(f"unknown surrogate kind {kind!r}")


def _pdf_of(h, dh, pieces, weight, y):
    return pdf_piecewise_monotone(h, weight, pieces, y, dh=dh)


def _surrogate_pdf_inputs(problem, g, kind):
    lo, hi = problem.box.lower[0], problem.box.upper[0]
    if kind == "none":
        pieces = problem.g_pieces or monotone_pieces(g, lo, hi, problem.dg)
        return problem.dg, pieces
    dg = getattr(g, "derivative", None)
    return dg, monotone_pieces(g, lo, hi, dg)


def pdf_pair(problem: Problem, g, kind: str, fv, gv, n_grid: int = 2000):
    """Exact pushforward densities of f and g on a shared grid (1D only)."""
    if problem.dim != 1 or not problem.has_density or problem.pieces is None:
        raise ValueError(f"problem {problem.name!r} has no piecewise-monotone density description")
    lo, hi = problem.box.lower[0], problem.box.upper[0]
    ends = np.array([lo, hi])
    fr = np.concatenate([fv, problem.f(ends)])
    gr = np.concatenate([gv, np.asarray(g(ends), dtype=float)])
    y = default_y_grid([(fr.min(), fr.max()), (gr.min(), gr.max())], n=n_grid)
    pf = _pdf_of(problem.f, problem.df, problem.pieces, problem.weight, y)
    dg, gp = _surrogate_pdf_inputs(problem, g, kind)
    pg = _pdf_of(g, dg, gp, problem.weight, y)
    return y, pf, pg


def l1pdf(problem: Problem, g, kind: str) -> float:
    """L1 distance between the exact pushforward densities of f and g."""
    if problem.dim != 1 or not problem.has_density or problem.pieces is None:
        raise ValueError(f"problem {problem.name!r} has no piecewise-monotone density description")
    dg, gp = _surrogate_pdf_inputs(problem, g, kind)
    return l1_pdf_error(problem.f, problem.pieces, g, gp, problem.weight, problem.df, dg)


def _metrics(problem, g, kind, quad, fv, mu, metrics):
    gv = evaluate_on_nodes(g, quad)
    nu = from_samples(gv, quad.weights)
    out = {}
    for m in metrics:
        name, order = parse_metric(m)
        if name == "wp":
            out[m] = wasserstein_p(mu, nu, order)
        elif name == "l1cdf":
            out[m] = w1_via_cdf(mu, nu)
        elif name == "hm1":
            out[m] = hminus1_distance(mu, nu)
        elif name == "l1pdf":
            out[m] = l1pdf(problem, g, kind)
    return out


def run_convergence(config: ExperimentConfig) -> list[ConvergenceRecord]:
    """Sweep N, fitting the surrogate and measuring every configured metric."""
    problem = build_problem(config.problem)
    quad = reference_quadrature(problem, config.ref_resolution)
    fv = evaluate_on_nodes(problem.f, quad)
    mu = from_samples(fv, quad.weights)
    records = []
    for N in config.n_sweep:
        t0 = time.perf_counter()
        try:
            g = make_surrogate(problem, config.surrogate_kind, N, config.boundary)
            errs = _metrics(problem, g, config.surrogate_kind, quad, fv, mu, config.metrics)
            failure = None
        except (ValueError, RuntimeError, NearFlatError) as exc:
            log.warning("N=%d failed: %s", N, exc)
            errs, failure = {}, str(exc)
        records.append(ConvergenceRecord(int(N), errs, (time.perf_counter() - t0) * 1e3, failure))
    return records


def resolution_sensitivity(config: ExperimentConfig, N: int, metric: str = "w1") -> float:
    """Relative change of a reported distance when the reference resolution doubles."""
    vals = []
    for M in (config.ref_resolution, 2 * config.ref_resolution):
        cfg = config.with_overrides(ref_resolution=M, n_sweep=(N,), metrics=(metric,))
        rec = run_convergence(cfg)[0]
        if rec.failure:
            raise RuntimeError(rec.failure)
        vals.append(rec.errors[metric])
    return abs(vals[1] - vals[0]) / abs(vals[0]) if vals[0] else abs(vals[1])


def fit_rate(records, model: str = "power", metric: str = "w1", floor: float = ERROR_FLOOR) -> RateFit:
    """Least-squares fit of log(error) against log N (power) or N (exponential).

    ``records`` is a list of :class:`ConvergenceRecord` or of ``(N, error)`` pairs.
    Errors at or below ``floor`` are treated as round-off and dropped.
    """
    pts = []
    for r in records:
        if isinstance(r, ConvergenceRecord):
            if r.failure or metric not in r.errors:
                continue
            pts.append((r.N, r.errors[metric]))
        else:
            pts.append((float(r[0]), float(r[1])))
    pts = [(n, e) for n, e in pts if e > floor and math.isfinite(e)]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points above the {floor:g} floor, got {len(pts)}")
    n = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    if model == "power":
        xs, ys = np.log(n), np.log(e)
    elif model == "exponential":
        xs, ys = n, np.log10(e)
    else:
        raise ValueError(f"unknown rate model {model!r}")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    return RateFit(model, float(slope), float(intercept), r2, int(n.min()), int(n.max()), len(pts), metric)


# --- bound audit ------------------------------------------------------------------


@dataclass
class AuditResult:
    report: BoundReport
    N: int | None
    pdf_sup_gap: float | None = None
    notes: list = field(default_factory=list)


def audit_bounds(config: ExperimentConfig, p=None, q_list=None, K=None, echo=print) -> AuditResult:
    """Bound report for f against the surrogate at the largest N (or the fixed g)."""
    p = config.p if p is None else p
    q_list = config.q_list if q_list is None else q_list
    K = config.K if K is None else K
    problem = build_problem(config.problem)
    quad = reference_quadrature(problem, config.ref_resolution)
    kind = config.surrogate_kind
    if problem.g is not None:
        kind, N = "none", None
    else:
        N = config.n_sweep[-1]
    g = make_surrogate(problem, kind, N or 1, config.boundary)
    report = bound_report(problem.f, g, quad, problem.weight, p, q_list, K)
    result = AuditResult(report, N)
    if problem.dim == 1 and problem.has_density and problem.pieces is not None:
        fv = evaluate_on_nodes(problem.f, quad)
        gv = evaluate_on_nodes(g, quad)
        try:
            y, pf, pg = pdf_pair(problem, g, kind, fv, gv)
            lo = max(pf.support[0], pg.support[0])
            hi = min(pf.support[1], pg.support[1])
            inner = (y > lo) & (y < hi)
            result.pdf_sup_gap = float(np.max(np.abs(pf.density - pg.density)[inner]))
        except (ValueError, NearFlatError) as exc:
            result.notes.append(f"pdf contrast skipped: {exc}")
    if report.moments_skipped:
        result.notes.append(f"moment lower bounds skipped: {report.moments_skipped}")
    label = f"N={N}" if N is not None else "fixed g"
    echo(f"problem={problem.name} surrogate={kind} ({label}) p={p:g}: W_p = {report.w_p:.6g}")
    for name, lhs, rhs, ok in report.checks():
        echo(f"  [{'ok' if ok else 'VIOLATED'}] {name}: {lhs:.6g} vs {rhs:.6g}")
    if result.pdf_sup_gap is not None:
        echo(f"  contrast: sup |p_mu - p_nu| = {result.pdf_sup_gap:.6g}")
    for note in result.notes:
        echo(f"  note: {note}")
    return result


# --- histogram comparison ---------------------------------------------------------


@dataclass
class HistogramComparison:
    rows: list  # one dict per budget
    seed_rows: list  # one dict per (budget, seed)
    fits: dict


def compare_histogram(config: ExperimentConfig, seeds=None, budgets=None) -> HistogramComparison:
    """Spline-surrogate pipeline versus the histogram of N i.i.d. pushed samples."""
    seeds = tuple(config.seeds if seeds is None else seeds)
    budgets = tuple(config.budgets if budgets is None else budgets)
    problem = build_problem(config.problem)
    if problem.dim not in (1, 2):
        raise ValueError("histogram comparison supports 1D and 2D problems")
    quad = reference_quadrature(problem, config.ref_resolution)
    fv = evaluate_on_nodes(problem.f, quad)
    mu = from_samples(fv, quad.weights)
    kind = "spline" if problem.dim == 1 else "tensor-spline"
    rows, seed_rows = [], []
    for N in budgets:
        g = make_surrogate(problem, kind, N)
        spline_w1 = wasserstein_p(mu, from_samples(evaluate_on_nodes(g, quad), quad.weights), 1)
        K = config.atoms_per_bin or max(4, math.ceil(4 * config.ref_resolution / N))
        hist_w1, emp_w1, widths = [], [], []
        for s in seeds:
            rng = make_rng(config.seed, s, N)
            alpha = sample_inputs(problem.weight, N, rng)
            arg = alpha[:, 0] if problem.dim == 1 else alpha
            y = np.asarray(problem.f(arg), dtype=float).reshape(-1)
            hist = histogram_estimate(y, N)
            mh = histogram_to_measure(hist, K)
            h_err = wasserstein_p(mu, mh, 1)
            e_err = wasserstein_p(empirical_measure(y), mh, 1)
            width = float(hist.widths.max())
            hist_w1.append(h_err)
            emp_w1.append(e_err)
            widths.append(width)
            seed_rows.append({"N": N, "seed": s, "hist_w1": h_err, "emp_hist_w1": e_err, "max_bin_width": width})
        rows.append(
            {
                "N": N,
                "spline_w1": spline_w1,
                "hist_w1_mean": float(np.mean(hist_w1)),
                "hist_w1_std": float(np.std(hist_w1)),
                "emp_hist_w1_mean": float(np.mean(emp_w1)),
                "max_bin_width_mean": float(np.mean(widths)),
            }
        )
    fits = {}
    for key, col in (("spline", "spline_w1"), ("histogram", "hist_w1_mean"), ("emp_vs_hist", "emp_hist_w1_mean")):
        try:
            fits[key] = fit_rate([(r["N"], r[col]) for r in rows], "power", metric=col)
        except ValueError as exc:
            log.warning("no %s rate: %s", key, exc)
    return HistogramComparison(rows, seed_rows, fits)


# --- oscillator demo ----------------------------------------------------------------


def demo_oscillator(config: ExperimentConfig, n_nodes: int = 4, n_grid: int = 2000):
    """f(v) = v^2 on U[1, 2] against its piecewise-linear interpolant on ``n_nodes`` nodes."""
    problem_cfg = dict(config.problem) if config.problem.get("name") == "oscillator" else {"name": "oscillator"}
    problem = build_problem(problem_cfg)
    lo, hi = problem.box.lower[0], problem.box.upper[0]
    nodes = np.linspace(lo, hi, n_nodes)
    g = fit_pwl(nodes, problem.f(nodes), problem.box)
    quad = reference_quadrature(problem, config.ref_resolution)
    fv = evaluate_on_nodes(problem.f, quad)
    gv = evaluate_on_nodes(g, quad)
    mu = from_samples(fv, quad.weights)
    nu = from_samples(gv, quad.weights)
    y = default_y_grid([(problem.f(np.array([lo]))[0], problem.f(np.array([hi]))[0])], n=n_grid)
    pf = pdf_piecewise_monotone(problem.f, problem.weight, problem.pieces, y, dh=problem.df)
    g_pieces = list(zip(nodes[:-1], nodes[1:]))
    pg = pdf_piecewise_monotone(g, problem.weight, g_pieces, y, dh=g.derivative)
    dense = np.linspace(lo, hi, 20001)
    summary = {
        "n_nodes": n_nodes,
        "nodes": nodes.tolist(),
        "sup_abs_f_minus_g": float(np.max(np.abs(problem.f(dense) - g(dense)))),
        "w1": wasserstein_p(mu, nu, 1),
        "w2": wasserstein_p(mu, nu, 2),
        "hm1": hminus1_distance(mu, nu),
        "l1pdf": l1_pdf_error(problem.f, problem.pieces, g, g_pieces, problem.weight, problem.df, g.derivative),
        "mean_f": float(np.dot(quad.weights, fv)),
        "mean_g": float(np.dot(quad.weights, gv)),
    }
    table = {
        "y": y,
        "pdf_f": pf.density,
        "pdf_g": pg.density,
        "cdf_f": mu.cdf()(y),
        "cdf_g": nu.cdf()(y),
    }
    return summary, table


# --- outputs -----------------------------------------------------------------------


def fmt(x) -> str:
    """17-significant-digit float formatting (round-trips exactly)."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    _write_text(path, buf.getvalue())


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, obj):
    _write_text(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def emit_outputs(records, fits, outdir, metrics=None, record_walltime=False):
    """Write convergence.csv, rates.json and plot.gp into ``outdir``.

    The walltime_ms column is only filled when ``record_walltime`` is set, so
    default runs stay byte-for-byte reproducible.
    """
    outdir = Path(outdir)
    if metrics is None:
        metrics = []
        for r in records:
            for m in r.errors:
                if m not in metrics:
                    metrics.append(m)
    cols = [metric_column(m) for m in metrics]
    rows = []
    for r in records:
        row = [r.N] + [r.errors.get(m) for m in metrics]
        row.append(r.walltime_ms if record_walltime else None)
        rows.append(row)
    paths = {"csv": outdir / "convergence.csv", "rates": outdir / "rates.json", "plot": outdir / "plot.gp"}
    write_csv(paths["csv"], ["N", *cols, "walltime_ms"], rows)
    fit_list = list(fits.values()) if isinstance(fits, dict) else list(fits)
    failures = {str(r.N): r.failure for r in records if r.failure}
    write_json(paths["rates"], {"fits": [f.as_dict() for f in fit_list], "failures": failures})
    _write_text(paths["plot"], plot_script(cols, fit_list))
    return paths


def plot_script(cols, fits, csv_name="convergence.csv") -> str:
    lines = [
        "# gnuplot script: log-log and semilog views of " + csv_name,
        'set datafile separator ","',
        "set key autotitle columnhead",
        'set terminal pngcairo size 1200,500',
        'set output "convergence.png"',
        "set multiplot layout 1,2",
        "set logscale y",
        "set format y '10^{%L}'",
        "set xlabel 'N'",
        "set ylabel 'error'",
        "",
        "set logscale x",
        "set title 'log-log (algebraic rates)'",
    ]
    series = ", ".join(f"'{csv_name}' using 1:{i + 2} with linespoints" for i in range(len(cols)))
    extra = []
    for f in fits:
        if f.model == "power":
            extra.append(f"{f.C!r}*x**({f.slope!r}) title 'fit {f.metric} ~ N^{{{f.slope:.2f}}}'")
    lines.append("plot " + ", ".join([series] + extra) if series else "# no metric columns")
    lines += ["", "unset logscale x", "set title 'semilog (spectral rates)'"]
    extra = []
    for f in fits:
        if f.model == "exponential":
            extra.append(f"{f.C!r}*10**({f.slope!r}*x) title 'fit {f.metric} ~ 10^{{{f.slope:.3f}N}}'")
    lines.append("plot " + ", ".join([series] + extra) if series else "# no metric columns")
    lines += ["unset multiplot", ""]
    return "\n".join(lines)
