"""Upper and lower bounds on W_p(f_* rho, g_* rho) in terms of f - g.

Upper bounds: ``W_p <= ||f - g||_inf``, ``W_p <= ||f - g||_p`` and the
interpolated ``W_p <= C(p, q) ||f - g||_inf^{p/(p+q)} ||f - g||_q^{q/(p+q)}``.
Lower bounds: ``|E f - E g| <= W_1`` and, for strictly monotone
rearrangements, ``A_k |E f^k - E g^k| <= W_2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measure import WeightedAtomMeasure1D, from_samples, hminus1_distance, moment, wasserstein_p
from .pushforward import DensityWeight, ParameterQuadrature, _norm, evaluate_on_nodes

__all__ = [
    "BoundReport",
    "RearrangedFunction",
    "rearrange_decreasing",
    "estimate_tau",
    "a_k_coefficient",
    "interpolation_constant",
    "bound_report",
    "loeper_peyre_residual",
    "TauHypothesisError",
]

FLAT_RUN_WEIGHT = 1e-6


class TauHypothesisError(ValueError):
    """The rearrangements are not strictly monotone (tau = 0)."""


@dataclass(frozen=True, eq=False)
class RearrangedFunction:
    """Nonincreasing step function f*(s) on [0, 1].

    ``values[i]`` is taken on ``(breakpoints[i], breakpoints[i+1]]``; the
    breakpoints are cumulative node weights, so s is the probability coordinate.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    source: object = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(self.breakpoints, s, side="left") - 1, 0, self.values.size - 1)
        return self.values[i]

    def norm(self, p: float) -> float:
        return _norm(np.abs(self.values), self.weights, p)


def rearrange_decreasing(f, quad: ParameterQuadrature) -> RearrangedFunction:
    """Decreasing rearrangement of f with respect to the quadrature measure."""
    vals = evaluate_on_nodes(f, quad)
    order = np.argsort(-vals, kind="stable")
    w = quad.weights[order]
    s = np.concatenate(([0.0], np.cumsum(w)))
    s[-1] = 1.0
    return RearrangedFunction(s, vals[order], w, f)


def estimate_tau(rf: RearrangedFunction) -> float:
    """Smallest secant slope |dv/ds| of the rearrangement, in the probability coordinate.

    Equal values are grouped into runs; a run heavier than ``FLAT_RUN_WEIGHT``
    means f* has a flat piece and 0 is returned.
    """
    if rf.values.size < 3:
        raise ValueError("need at least 3 breakpoints to estimate tau")
    uniq, start = np.unique(-rf.values, return_index=True)
    start = np.sort(start)
    counts = np.diff(np.append(start, rf.values.size))
    run_w = np.add.reduceat(rf.weights, start)
    if np.any((counts > 1) & (run_w > FLAT_RUN_WEIGHT)):
        return 0.0
    if start.size < 2:
        return 0.0
    centers = rf.breakpoints[start] + 0.5 * run_w
    slopes = np.abs(np.diff(rf.values[start]) / np.diff(centers))
    return float(slopes.min())


def a_k_coefficient(
    f, g, quad: ParameterQuadrature, weight: DensityWeight, k: int, tau: float | None = None
) -> float:
    """Coefficient A_k of the moment lower bound on W_2.

    A_k = sqrt(2k-1)/k * (M^(2k-1) - m^(2k-1))^(-1/2) * tau^(1/2) * ||r||_inf^(-1/2)

    tau is the slope bound in the parameter coordinate. The secants from
    :func:`estimate_tau` live in the probability coordinate s, where
    ds = r dalpha, so they are converted with the declared sup of r; this keeps
    the bound valid for non-uniform weights and is exact for uniform ones.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    fv = evaluate_on_nodes(f, quad)
    gv = evaluate_on_nodes(g, quad)
    if tau is None:
        tau_s = min(
            estimate_tau(rearrange_decreasing(f, quad)),
            estimate_tau(rearrange_decreasing(g, quad)),
        )
        tau = tau_s * weight.r_sup
    if not tau > 0:
        raise TauHypothesisError("rearranged functions are not strictly monotone (tau = 0)")
    if not math.isfinite(weight.r_sup):
        raise ValueError("A_k needs a bounded input density")
    # sup and inf over the closed box: the nodes miss the boundary by half a cell
    corners = _box_corners(quad.box)
    arg = corners[:, 0] if quad.dim == 1 else corners
    edge = np.concatenate([np.asarray(h(arg), dtype=float).reshape(-1) for h in (f, g)])
    edge = edge[np.isfinite(edge)]
    big = max(fv.max(), gv.max(), edge.max(initial=-math.inf))
    small = min(fv.min(), gv.min(), edge.min(initial=math.inf))
    e = 2 * int(k) - 1
    span = big**e - small**e
    if not span > 0:
        raise ValueError("degenerate range: M^(2k-1) == m^(2k-1)")
    return math.sqrt(e) / k * span**-0.5 * math.sqrt(tau) / math.sqrt(weight.r_sup)


def _box_corners(box):
    grids = np.meshgrid(*zip(box.lower, box.upper), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def interpolation_constant(p: float, q: float) -> float:
    """C(p, q) obtained by optimizing the splitting radius in the L^q/L^inf bound."""
    return ((p / q) ** (q / (p + q)) + (q / p) ** (p / (p + q))) ** (1.0 / p)


@dataclass
class BoundReport:
    p: float
    w_p: float
    upper_inf: float
    upper_lp: float
    upper_interp: dict = field(default_factory=dict)  # q -> bound
    lower_mean: float | None = None
    lower_moments: list = field(default_factory=list)  # (k, A_k * |dE^k|)
    moments_skipped: str | None = None
    slack: float = 1e-3

    def checks(self) -> list[tuple[str, float, float, bool]]:
        """(name, lhs, rhs, ok) for every populated inequality."""
        out = [
            ("W_p <= ||f-g||_inf", self.w_p, self.upper_inf),
            ("W_p <= ||f-g||_p", self.w_p, self.upper_lp),
        ]
        for q, b in sorted(self.upper_interp.items()):
            out.append((f"W_p <= C(p,{q:g}) interp(q={q:g})", self.w_p, b))
        if self.lower_mean is not None:
            out.append(("|Ef-Eg| <= W_1", self.lower_mean, self.w_p))
        for k, lb in self.lower_moments:
            out.append((f"A_{k}|Ef^{k}-Eg^{k}| <= W_2", lb, self.w_p))
        return [(n, a, b, a <= b + self.slack) for n, a, b in out]

    @property
    def ok(self) -> bool:
        return all(c[3] for c in self.checks())

    def as_row(self) -> dict:
        row = {"p": self.p, "w_p": self.w_p, "upper_inf": self.upper_inf, "upper_lp": self.upper_lp}
        for q, b in sorted(self.upper_interp.items()):
            row[f"upper_interp_q{q:g}"] = b
        if self.lower_mean is not None:
            row["lower_mean"] = self.lower_mean
        for k, lb in self.lower_moments:
            row[f"lower_moment_k{k}"] = lb
        return row


def bound_report(
    f,
    g,
    quad: ParameterQuadrature,
    weight: DensityWeight,
    p: float = 1.0,
    q_list=(1, 2, 4),
    K: int = 5,
    slack: float = 1e-3,
) -> BoundReport:
    """W_p of the two pushforwards together with every applicable bound."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    fv = evaluate_on_nodes(f, quad)
    gv = evaluate_on_nodes(g, quad)
    w = quad.weights
    mu = from_samples(fv, w)
    nu = from_samples(gv, w)
    diff = np.abs(fv - gv)
    w_p = wasserstein_p(mu, nu, p)
    sup = _norm(diff, w, math.inf)
    report = BoundReport(p=p, w_p=w_p, upper_inf=sup, upper_lp=_norm(diff, w, p), slack=slack)
    for q in q_list:
        lq = _norm(diff, w, q)
        report.upper_interp[float(q)] = (
            interpolation_constant(p, q) * sup ** (p / (q + p)) * lq ** (q / (q + p))
        )
    if p == 1:
        report.lower_mean = abs(float(np.dot(w, fv - gv)))
    if p == 2:
        try:
            for k in range(1, K + 1):
                a_k = a_k_coefficient(f, g, quad, weight, k)
                report.lower_moments.append((k, a_k * abs(moment(mu, k) - moment(nu, k))))
        except (TauHypothesisError, ValueError) as exc:
            report.lower_moments = []
            report.moments_skipped = str(exc)
    return report


def loeper_peyre_residual(
    mu: WeightedAtomMeasure1D, nu: WeightedAtomMeasure1D, pdf_sup_mu: float, pdf_sup_nu: float
) -> float:
    """max(||p_mu||_inf, ||p_nu||_inf)^(1/2) W_2 - ||mu - nu||_{H^-1}; >= 0 when densities exist."""
    for s in (pdf_sup_mu, pdf_sup_nu):
        if not (s > 0 and math.isfinite(s)):
            raise ValueError(f"density bounds must be positive and finite, got {s}")
    return math.sqrt(max(pdf_sup_mu, pdf_sup_nu)) * wasserstein_p(mu, nu, 2) - hminus1_distance(mu, nu)
