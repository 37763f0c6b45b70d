import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasserpush.bounds import (
    TauHypothesisError,
    a_k_coefficient,
    bound_report,
    estimate_tau,
    interpolation_constant,
    loeper_peyre_residual,
    rearrange_decreasing,
)
from wasserpush.measure import from_samples
from wasserpush.pushforward import ParameterBox, build_quadrature, jacobi_weight, lq_error, uniform_weight

UNIT = ParameterBox([0.0], [1.0])
W = uniform_weight(UNIT)
Q = build_quadrature(UNIT, W, 4000)


def lin(a, b):
    return lambda x: a * np.asarray(x) + b


def test_interpolation_constant_closed_form():
    # p = q gives 2^(1/p)
    for p in (1.0, 2.0, 3.0):
        assert interpolation_constant(p, p) == pytest.approx(2 ** (1 / p))


def test_interpolation_constant_is_optimal_split():
    # C(p, q)^p = min_r [ r^-q + r^p ]  with ||f-g||_inf = ||f-g||_q = 1
    for p, q in [(1, 2), (2, 1), (3, 4), (1, 4)]:
        r = np.linspace(0.05, 5, 200_001)
        assert interpolation_constant(p, q) ** p == pytest.approx(np.min(r ** (-q) + r**p), rel=1e-8)


def test_sharpness_case():
    rep = bound_report(lin(0, 0), lin(0, 2), Q, W, p=3)
    assert rep.w_p == pytest.approx(2.0) and rep.upper_inf == pytest.approx(2.0)
    assert rep.upper_lp == pytest.approx(2.0)


def test_equality_chain_for_ordered_pair():
    rep = bound_report(lin(1, 0), lin(0, 0), Q, W, p=1)
    assert rep.lower_mean == pytest.approx(0.5, abs=1e-12)
    assert rep.w_p == pytest.approx(0.5, abs=1e-12)
    assert rep.upper_lp == pytest.approx(0.5, abs=1e-12)


def test_identical_pair_is_all_zero():
    rep = bound_report(np.sin, np.sin, Q, W, p=1)
    assert rep.w_p == 0 and rep.upper_inf == 0 and rep.upper_lp == 0
    assert all(v == 0 for v in rep.upper_interp.values())


def test_oscillatory_pair():
    d = 1e-3
    rep = bound_report(lin(1, 0), lambda a: a + d * np.sin(a / (10 * d)), Q, W, p=1)
    assert rep.w_p <= rep.upper_inf <= 1e-3 + 1e-9
    assert rep.ok


def test_tau_examples():
    assert estimate_tau(rearrange_decreasing(lin(3, -3), Q)) == pytest.approx(3, rel=1e-6)
    assert estimate_tau(rearrange_decreasing(lin(2, -2), Q)) == pytest.approx(2, rel=1e-6)
    assert estimate_tau(rearrange_decreasing(lin(0, 1), Q)) == 0.0


def test_a_k_worked_example():
    f, g = lin(3, -3), lin(2, -2)
    assert a_k_coefficient(f, g, Q, W, 1) == pytest.approx(math.sqrt(2 / 3), abs=1e-6)
    assert a_k_coefficient(f, g, Q, W, 2) == pytest.approx(math.sqrt(3) / 2 * 3**-1.5 * math.sqrt(2), abs=1e-6)


def test_a_k_requires_monotone():
    with pytest.raises(TauHypothesisError):
        a_k_coefficient(lin(0, 1), lin(1, 0), Q, W, 1)
    with pytest.raises(ValueError):
        a_k_coefficient(lin(1, 0), lin(2, 0), Q, W, 0)


def test_moment_bounds_on_linear_pair():
    rep = bound_report(lin(3, -3), lin(2, -2), Q, W, p=2, K=5)
    assert [k for k, _ in rep.lower_moments] == [1, 2, 3, 4, 5]
    assert rep.ok


def test_moment_bounds_skipped_when_flat():
    rep = bound_report(lambda a: np.minimum(a, 0.5), lin(1, 0), Q, W, p=2)
    assert rep.lower_moments == [] and "tau" in rep.moments_skipped


def test_a_k_non_uniform_weight_stays_valid():
    box = ParameterBox([-1.0], [1.0])
    w = jacobi_weight(2.0, 2.0, box)
    q = build_quadrature(box, w, 4000)
    rep = bound_report(lin(1, 0), lambda a: 1.3 * a + 0.2, q, w, p=2, K=5)
    assert rep.lower_moments and rep.ok


def test_interp_tends_to_sup_bound():
    f, g = np.sin, lambda a: np.sin(a) + 0.1 * a**3
    qs = (1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0)
    rep = bound_report(f, g, Q, W, p=1, q_list=qs)
    vals = [rep.upper_interp[q] for q in qs]
    assert all(v >= rep.w_p for v in vals)
    # C(p, q) -> 1 and ||.||_q -> ||.||_inf, so the gap to the sup bound closes
    gaps = [abs(v - rep.upper_inf) for v in vals[2:]]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3 * rep.upper_inf


def test_rearrangement_examples():
    rf = rearrange_decreasing(lin(1, 0), Q)
    s = rf.breakpoints[1:] - 0.5 * rf.weights
    np.testing.assert_allclose(rf.values, 1 - s, atol=1e-12)
    const = rearrange_decreasing(lin(0, 4), Q)
    assert np.all(const.values == 4)


def test_bumpy_rearrangement_norms():
    f = lambda a: 5 * (1 + a * np.sin(10 * a) * np.exp(-(a**2)))  # noqa: E731
    rf = rearrange_decreasing(f, Q)
    assert np.all(np.diff(rf.values) <= 0)
    for p in (1, 2, 4):
        assert rf.norm(p) == pytest.approx(lq_error(f, lin(0, 0), Q, p), abs=1e-6)


def test_loeper_peyre_examples():
    n = 4000
    u = from_samples((np.arange(n) + 0.5) / n)
    assert loeper_peyre_residual(u, u, 1, 1) == 0
    r = loeper_peyre_residual(u, u.shifted(0.5), 1, 1)
    assert r == pytest.approx(0.5 - math.sqrt(0.25 - 0.125 / 3), abs=1e-4)
    with pytest.raises(ValueError):
        loeper_peyre_residual(u, u, math.inf, 1)


smooth = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 6), st.floats(-1, 1))


def make(c):
    a, b, k, s = c
    return lambda x: a * np.sin(k * x + s) + b * x**2


@given(smooth, smooth, st.sampled_from([1.0, 2.0, 3.0]))
def test_upper_bounds_hold(c1, c2, p):
    q = build_quadrature(UNIT, W, 500)
    rep = bound_report(make(c1), make(c2), q, W, p=p, q_list=(1, 2, 4))
    assert rep.ok, rep.checks()
