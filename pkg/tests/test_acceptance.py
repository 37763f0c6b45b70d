"""Acceptance criteria 1-14, each reported as one PASS/FAIL line at the stated tolerance."""
import math
import time

import numpy as np
import pytest

from wasserpush.bounds import (
    a_k_coefficient,
    bound_report,
    estimate_tau,
    interpolation_constant,
    loeper_peyre_residual,
    rearrange_decreasing,
)
from wasserpush.cli import main
from wasserpush.config import build_problem, config_from_dict
from wasserpush.experiments import compare_histogram, fit_rate, make_surrogate, run_convergence
from wasserpush.measure import brute_force_wp, from_samples, hminus1_distance, moment, w1_via_cdf, wasserstein_p
from wasserpush.pushforward import ParameterBox, build_quadrature, lq_error, pushforward, uniform_weight

UNIT = ParameterBox([0.0], [1.0])
W = uniform_weight(UNIT)
SLACK = 1e-3


@pytest.fixture(scope="module")
def quad():
    return build_quadrature(UNIT, W, 4000)


def smooth_function(rng):
    """Random smooth function on [0, 1]: a few sines plus a quadratic."""
    amp = rng.normal(size=3)
    freq = rng.uniform(0.5, 8.0, size=3)
    phase = rng.uniform(0, 2 * np.pi, size=3)
    poly = rng.normal(size=3)

    def f(a):
        a = np.asarray(a, dtype=float)
        out = poly[0] + poly[1] * a + poly[2] * a**2
        for c, k, s in zip(amp, freq, phase):
            out = out + c * np.sin(k * a + s)
        return out

    return f


def monotone_function(rng):
    """Strictly increasing a + slope*x + c sin(k x)/k with |c| < slope; returns (f, f')."""
    slope = rng.uniform(0.5, 3.0)
    c = rng.uniform(-0.9, 0.9) * slope
    k = rng.uniform(1.0, 10.0)
    b = rng.normal()
    return (lambda x: b + slope * np.asarray(x) + c * np.sin(k * np.asarray(x)) / k,
            lambda x: slope + c * np.cos(k * np.asarray(x)))


@pytest.fixture(scope="module")
def smooth_pairs():
    rng = np.random.default_rng(2024)
    return [(smooth_function(rng), smooth_function(rng)) for _ in range(100)]


@pytest.fixture(scope="module")
def gpc_sweep():
    t0 = time.perf_counter()
    cfg = config_from_dict({"surrogate": {"kind": "gpc"}, "metrics": ["w1", "l1pdf"]})
    recs = run_convergence(cfg)
    return recs, time.perf_counter() - t0


def test_criterion_01_spline_rate(verdict):
    t0 = time.perf_counter()
    recs = run_convergence(config_from_dict({}))
    elapsed = time.perf_counter() - t0
    fit = fit_rate(recs, "power")
    ok = -5.2 <= fit.slope <= -3.8 and fit.r2 >= 0.98 and elapsed < 60
    verdict(1, ok, f"spline W1 slope {fit.slope:.3f} in [-5.2, -3.8], R2 {fit.r2:.4f} >= 0.98, {elapsed:.1f}s < 60s")


def test_criterion_02_gpc_rate(verdict, gpc_sweep):
    recs, elapsed = gpc_sweep
    fit = fit_rate(recs, "exponential", "w1")
    w = {r.N: r.errors["w1"] for r in recs}
    drop = w[120] / w[4]
    ok = -0.95 <= fit.slope <= -0.45 and drop <= 1e-8 and elapsed < 120
    verdict(
        2,
        ok,
        f"gPC W1 slope {fit.slope:.4f} decades/degree in [-0.95, -0.45]; "
        f"W1(120)/W1(4) = {drop:.2e} <= 1e-8; {elapsed:.1f}s < 120s",
    )


def test_gpc_rate_matches_analyticity(gpc_sweep):
    # tanh(9a) has poles at a = +-i pi/18; the Bernstein ellipse through them
    # has rho = s + sqrt(1 + s^2), s = pi/18, so errors decay like rho^-N
    s = math.pi / 18
    expected = -math.log10(s + math.sqrt(1 + s * s))
    fit = fit_rate(gpc_sweep[0], "exponential", "w1")
    assert fit.slope == pytest.approx(expected, rel=0.1)


def test_criterion_03_pdf_contrast(verdict, gpc_sweep):
    recs, _ = gpc_sweep
    e = {r.N: r.errors for r in recs}
    pdf_drop = math.log10(e[4]["l1pdf"] / e[120]["l1pdf"])
    w_drop = math.log10(e[4]["w1"] / e[120]["w1"])
    ratio = w_drop / pdf_drop
    ok = pdf_drop <= 5 and w_drop >= 8 and ratio >= 1.5
    verdict(
        3,
        ok,
        f"L1 PDF drop {pdf_drop:.2f} decades <= 5; W1 drop {w_drop:.2f} >= 8; ratio {ratio:.2f} >= 1.5",
    )


def test_criterion_04_upper_bounds(verdict, quad, smooth_pairs):
    bad = 0
    for f, g in smooth_pairs:
        for p in (1, 2, 3):
            rep = bound_report(f, g, quad, W, p=p, q_list=())
            bad += rep.w_p > rep.upper_lp + SLACK
            bad += rep.w_p > rep.upper_inf + SLACK
    verdict(4, bad == 0, f"{bad} violations of W_p <= ||f-g||_p, ||f-g||_inf over 100 pairs x p in {{1,2,3}}")


def test_criterion_05_interpolated_bound(verdict, quad, smooth_pairs):
    bad = 0
    for f, g in smooth_pairs:
        fv, gv = f(quad.nodes[:, 0]), g(quad.nodes[:, 0])
        mu, nu = from_samples(fv, quad.weights), from_samples(gv, quad.weights)
        sup = np.max(np.abs(fv - gv))
        for p in (1, 2, 3):
            wp = wasserstein_p(mu, nu, p)
            for q in (1, 2, 4):
                lq = lq_error(f, g, quad, q)
                rhs = interpolation_constant(p, q) * sup ** (p / (q + p)) * lq ** (q / (q + p))
                bad += wp > rhs + SLACK
    verdict(5, bad == 0, f"{bad} violations of the interpolated bound over 100 pairs x 9 (p, q)")


def test_criterion_06_mean_bound_and_equality(verdict, quad, smooth_pairs):
    bad = 0
    for f, g in smooth_pairs:
        rep = bound_report(f, g, quad, W, p=1, q_list=())
        bad += not (rep.lower_mean <= rep.w_p + SLACK and rep.w_p <= rep.upper_lp + SLACK)
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        f = smooth_function(rng)
        c, k, s = rng.uniform(0.01, 1), rng.uniform(1, 8), rng.uniform(0, 6)
        g = lambda a, f=f, c=c, k=k, s=s: f(a) - c * (1.05 + np.sin(k * a + s))  # f >= g
        rep = bound_report(f, g, quad, W, p=1, q_list=())
        worst = max(worst, abs(rep.w_p - rep.upper_lp))
    ok = bad == 0 and worst <= SLACK
    verdict(6, ok, f"{bad} chain violations on 100 pairs; max |W1 - ||f-g||_1| = {worst:.1e} <= 1e-3 on 20 f>=g pairs")


def test_criterion_07_moment_lower_bound(verdict, quad):
    f, g = (lambda a: 3 * a - 3), (lambda a: 2 * a - 2)
    a1 = a_k_coefficient(f, g, quad, W, 1)
    pairs = [(f, g)]
    rng = np.random.default_rng(7)
    while len(pairs) < 21:
        (h1, _), (h2, _) = monotone_function(rng), monotone_function(rng)
        if rng.random() < 0.5:
            h1 = lambda a, h=h1: -h(a)  # noqa: E731  decreasing pairs too
        if min(estimate_tau(rearrange_decreasing(h, quad)) for h in (h1, h2)) > 0:
            pairs.append((h1, h2))
    bad = checked = 0
    for h1, h2 in pairs:
        rep = bound_report(h1, h2, quad, W, p=2, q_list=(), K=5)
        checked += len(rep.lower_moments)
        bad += rep.moments_skipped is not None
        bad += sum(lb > rep.w_p + SLACK for _, lb in rep.lower_moments)
    ok = bad == 0 and checked == 105 and abs(a1 - math.sqrt(2 / 3)) <= 1e-6
    verdict(7, ok, f"A_1 = {a1:.8f} vs sqrt(2/3) = {math.sqrt(2 / 3):.8f}; {bad} violations in {checked} A_k checks")


def test_criterion_08_brute_force_oracle(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 8))
        mu = from_samples(rng.normal(size=n) * rng.uniform(0.1, 10))
        nu = from_samples(rng.normal(size=n) * rng.uniform(0.1, 10) + rng.normal())
        for p in (1, 2, 3):
            exact = brute_force_wp(mu, nu, p)
            worst = max(worst, abs(wasserstein_p(mu, nu, p) - exact) / max(exact, 1e-300))
    verdict(8, worst <= 1e-10, f"max relative gap to permutation brute force {worst:.1e} <= 1e-10")


def test_criterion_09_cdf_identity(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        n, m = rng.integers(1, 60, size=2)
        mu = from_samples(rng.standard_cauchy(n), rng.uniform(0.01, 1, n))
        nu = from_samples(rng.normal(size=m) * 3, rng.uniform(0.01, 1, m))
        d = wasserstein_p(mu, nu, 1)
        worst = max(worst, abs(d - w1_via_cdf(mu, nu)) / d)
    verdict(9, worst <= 1e-10, f"max relative |W1 - int|F - G|| = {worst:.1e} <= 1e-10")


def test_criterion_10_loeper_peyre(verdict, quad):
    rng = np.random.default_rng(10)
    dense = np.linspace(0, 1, 200_001)
    worst = math.inf
    for _ in range(100):
        (f, df), (g, dg) = monotone_function(rng), monotone_function(rng)
        # density of an increasing map of U[0,1] is 1/h' at the preimage
        sup_f, sup_g = 1 / np.min(df(dense)), 1 / np.min(dg(dense))
        r = loeper_peyre_residual(pushforward(f, quad), pushforward(g, quad), sup_f, sup_g)
        worst = min(worst, r)
    verdict(10, worst >= -1e-3, f"min residual {worst:.2e} >= -1e-3 over 100 monotone pairs")


def test_criterion_11_histogram_comparison(verdict):
    cmp = compare_histogram(config_from_dict({}))
    spline, hist, internal = cmp.fits["spline"], cmp.fits["histogram"], cmp.fits["emp_vs_hist"]
    better = all(r["spline_w1"] < r["hist_w1_mean"] for r in cmp.rows if r["N"] >= 16)
    ok = spline.slope <= -3.5 and -0.65 <= hist.slope <= -0.35 and better and internal.slope <= -1.5
    verdict(
        11,
        ok,
        f"spline slope {spline.slope:.2f} <= -3.5; histogram slope {hist.slope:.3f} in [-0.65, -0.35] "
        f"(20 seeds); spline better for all N >= 16: {better}; "
        f"W1(emp, hist) slope {internal.slope:.3f} <= -1.5",
    )


def test_criterion_12_atom(verdict, quad):
    prob = build_problem({"name": "fk-atom", "k": 2})
    mu = pushforward(prob.f, quad)
    mass0 = float(mu.weights[0]) if mu.atoms[0] == 0.0 else 0.0
    nu = pushforward(make_surrogate(prob, "pwl", 16), quad)
    vals = [wasserstein_p(mu, nu, p) for p in (1, 2, 3, math.inf)]
    vals += [w1_via_cdf(mu, nu), hminus1_distance(mu, nu), moment(mu, 2)]
    finite = all(math.isfinite(v) for v in vals)
    verdict(12, abs(mass0 - 0.5) <= 0.01 and finite, f"atom at 0 has mass {mass0:.4f} (0.5 +- 0.01); all distances finite: {finite}")


def test_criterion_13_rearrangement(verdict, quad):
    bumpy = lambda a: 5 * (1 + a * np.sin(10 * a) * np.exp(-(a**2)))  # noqa: E731
    rng = np.random.default_rng(13)
    funcs = [bumpy] + [smooth_function(rng) for _ in range(20)]
    zero = lambda a: 0 * a  # noqa: E731
    worst, monotone = 0.0, True
    for f in funcs:
        rf = rearrange_decreasing(f, quad)
        monotone &= bool(np.all(np.diff(rf.values) <= 0))
        for p in (1, 2, 4):
            worst = max(worst, abs(rf.norm(p) - lq_error(f, zero, quad, p)))
    verdict(13, worst <= 1e-6 and monotone, f"max | ||f||_p - ||f*||_p | = {worst:.1e} <= 1e-6; f* nonincreasing: {monotone}")


@pytest.mark.parametrize("cmd", ["converge", "bounds", "compare-hist", "demo-oscillator"])
def test_criterion_14_determinism(verdict, tmp_path, cmd, capsys):
    dirs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main([cmd, "--out", str(out), "--seed", "11"]) in (0, 1)
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].iterdir())
    same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names
    )
    capsys.readouterr()
    verdict(14, same, f"{cmd}: {len(names)} output files byte-identical across two runs")
