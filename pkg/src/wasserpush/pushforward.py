"""Discretize an input measure on a box and push functions through it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import betaln

from .measure import WeightedAtomMeasure1D, from_samples

__all__ = [
    "ParameterBox",
    "DensityWeight",
    "ParameterQuadrature",
    "uniform_weight",
    "jacobi_weight",
    "custom_weight",
    "build_quadrature",
    "pushforward",
    "lq_error",
    "evaluate_on_nodes",
    "make_rng",
    "sample_inputs",
]

SCHEMES = ("midpoint-grid", "gauss-jacobi", "monte-carlo")


@dataclass(frozen=True, eq=False)
class ParameterBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size not in (1, 2, 3):
            raise ValueError("box bounds must be vectors of equal length 1, 2 or 3")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"need lower < upper, got {lo} and {hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, pts, tol=1e-12) -> bool:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        return bool(np.all(pts >= self.lower - tol) and np.all(pts <= self.upper + tol))

    def __repr__(self):
        return f"ParameterBox({self.lower.tolist()}, {self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class DensityWeight:
    """Density r of the input measure with respect to Lebesgue measure on ``box``.

    ``r_sup`` is the declared sup norm of r (``inf`` for unbounded Jacobi
    weights with a negative exponent).
    """

    box: ParameterBox
    evaluator: Callable
    r_sup: float
    kind: str = "custom"
    params: tuple = field(default=())

    def __call__(self, alpha):
        return self.evaluator(np.asarray(alpha, dtype=float))

    def normalization_error(self, resolution: int = 200_000) -> float:
        """|integral of r - 1| under a reference rule (Gauss-Jacobi when available)."""
        if self.kind == "jacobi":
            from scipy.special import roots_jacobi

            b1, b2 = self.params
            x, w = roots_jacobi(200, b1, b2)
            k = math.exp(-(b1 + b2 + 1) * math.log(2.0) - betaln(b1 + 1, b2 + 1))
            return abs(k * w.sum() - 1.0)
        if self.box.dim == 1:
            lo, hi = self.box.lower[0], self.box.upper[0]
            h = (hi - lo) / resolution
            x = lo + (np.arange(resolution) + 0.5) * h
            return abs(float(np.sum(self(x[:, None]))) * h - 1.0)
        m = int(round(resolution ** (1.0 / self.box.dim)))
        pts, cell = _midpoint_grid(self.box, m)
        return abs(float(np.sum(self(pts))) * cell - 1.0)


def uniform_weight(box: ParameterBox) -> DensityWeight:
    r = 1.0 / box.volume

    def ev(a):
        a = np.asarray(a, dtype=float).reshape(-1, box.dim)
        return np.full(a.shape[0], r)

    return DensityWeight(box, ev, r, "uniform")


def jacobi_weight(beta1: float, beta2: float, box: ParameterBox | None = None) -> DensityWeight:
    """Normalized k (1-t)^beta1 (1+t)^beta2 with t the affine image of the box in [-1, 1]."""
    if not (beta1 > -1 and beta2 > -1):
        raise ValueError(f"Jacobi exponents must exceed -1, got ({beta1}, {beta2})")
    if box is None:
        box = ParameterBox([-1.0], [1.0])
    if box.dim != 1:
        raise ValueError("Jacobi weights are one-dimensional")
    lo, hi = box.lower[0], box.upper[0]
    jac = 2.0 / (hi - lo)
    k = math.exp(-(beta1 + beta2 + 1) * math.log(2.0) - betaln(beta1 + 1, beta2 + 1))

    def ref(t):
        return k * (1 - t) ** beta1 * (1 + t) ** beta2

    def ev(a):
        a = np.asarray(a, dtype=float).reshape(-1)
        t = np.clip((2 * a - lo - hi) / (hi - lo), -1.0, 1.0)
        return ref(t) * jac

    if beta1 < 0 or beta2 < 0:
        r_sup = math.inf
    else:
        cands = [-1.0, 1.0]
        if beta1 + beta2 > 0:
            cands.append((beta2 - beta1) / (beta1 + beta2))
        r_sup = float(max(ref(np.array(cands)))) * jac
    return DensityWeight(box, ev, r_sup, "jacobi", (float(beta1), float(beta2)))


def custom_weight(box: ParameterBox, evaluator: Callable, r_sup: float) -> DensityWeight:
    if not r_sup > 0:
        raise ValueError("declared sup of the density must be positive")
    return DensityWeight(box, evaluator, float(r_sup), "custom")


@dataclass(frozen=True, eq=False)
class ParameterQuadrature:
    """Nodes (shape (n, d)) and probability weights realizing the input measure."""

    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    box: ParameterBox
    seed: int | None = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        w = np.array(self.weights, dtype=float).ravel()
        if nodes.shape[0] != w.size or nodes.shape[1] != self.box.dim:
            raise ValueError("nodes/weights shape mismatch")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1")
        if not self.box.contains(nodes):
            raise ValueError("quadrature nodes must lie in the box")
        nodes.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def dim(self):
        return self.box.dim


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, *stream)``."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def _midpoint_grid(box, m):
    axes = [
        lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi in zip(box.lower, box.upper)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return pts, box.volume / m ** box.dim


def sample_inputs(weight: DensityWeight, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` i.i.d. draws from the input measure, shape (m, d)."""
    box = weight.box
    if weight.kind == "uniform":
        u = rng.random((m, box.dim))
        return box.lower + u * (box.upper - box.lower)
    if weight.kind == "jacobi":
        b1, b2 = weight.params
        # (t + 1)/2 ~ Beta(beta2 + 1, beta1 + 1)
        s = rng.beta(b2 + 1.0, b1 + 1.0, size=m)
        lo, hi = box.lower[0], box.upper[0]
        return (lo + s * (hi - lo))[:, None]
    if not math.isfinite(weight.r_sup):
        raise ValueError("rejection sampling needs a finite declared density bound")
    out = []
    have = 0
    while have < m:
        u = box.lower + rng.random((2 * m, box.dim)) * (box.upper - box.lower)
        keep = rng.random(2 * m) * weight.r_sup <= weight(u)
        out.append(u[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:m]


def build_quadrature(
    box: ParameterBox,
    weight: DensityWeight,
    resolution: int,
    scheme: str = "midpoint-grid",
    seed: int = 0,
) -> ParameterQuadrature:
    """Discretize the input measure ``weight`` on ``box``.

    midpoint-grid
        ``resolution**d`` cell midpoints weighted by r(node) * cell volume, renormalized.
    gauss-jacobi
        ``resolution`` Gauss nodes of the Jacobi weight (1D only).
    monte-carlo
        ``resolution`` i.i.d. draws with equal weights, reproducible from ``seed``.
    """
    if int(resolution) != resolution or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution}")
    resolution = int(resolution)
    if scheme == "midpoint-grid":
        pts, cell = _midpoint_grid(box, resolution)
        w = np.asarray(weight(pts), dtype=float) * cell
        keep = w > 0
        pts, w = pts[keep], w[keep]
        return ParameterQuadrature(pts, w / w.sum(), scheme, box)
    if scheme == "gauss-jacobi":
        if box.dim != 1 or weight.kind not in ("jacobi", "uniform"):
            raise ValueError("gauss-jacobi quadrature needs a 1D Jacobi (or uniform) weight")
        from .surrogates import gauss_nodes, jacobi_basis

        b1, b2 = weight.params if weight.kind == "jacobi" else (0.0, 0.0)
        x, w = gauss_nodes(jacobi_basis(b1, b2, resolution), resolution)
        lo, hi = box.lower[0], box.upper[0]
        return ParameterQuadrature(lo + (x + 1) * 0.5 * (hi - lo), w, scheme, box)
    if scheme == "monte-carlo":
        pts = sample_inputs(weight, resolution, make_rng(seed, resolution))
        w = np.full(resolution, 1.0 / resolution)
        return ParameterQuadrature(pts, w, scheme, box, seed)
    raise ValueError(f"unknown quadrature scheme {scheme!r}; choose from {SCHEMES}")


def evaluate_on_nodes(func, quad: ParameterQuadrature) -> np.ndarray:
    """Evaluate ``func`` at every node; 1D functions receive a flat array."""
    arg = quad.nodes[:, 0] if quad.dim == 1 else quad.nodes
    vals = np.asarray(func(arg), dtype=float)
    vals = np.broadcast_to(vals, (len(quad),)).copy() if vals.ndim == 0 else vals.reshape(-1)
    if vals.size != len(quad):
        raise ValueError(f"function returned {vals.size} values for {len(quad)} nodes")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"non-finite value {vals[i]!r} at node {quad.nodes[i].tolist()}")
    return vals


def pushforward(func, quad: ParameterQuadrature) -> WeightedAtomMeasure1D:
    """Atomic image measure: atoms func(node_i) carrying the node weights."""
    return from_samples(evaluate_on_nodes(func, quad), quad.weights)


def lq_error(f, g, quad: ParameterQuadrature, q: float = 2.0) -> float:
    """Discrete L^q(rho) norm of f - g; q = inf gives the max over the nodes.

    The max over nodes is a lower estimate of the true essential sup.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    diff = np.abs(evaluate_on_nodes(f, quad) - evaluate_on_nodes(g, quad))
    return _norm(diff, quad.weights, q)


def _norm(diff, weights, q):
    if math.isinf(q):
        return float(diff.max())
    scale = diff.max()
    if scale == 0:
        return 0.0
    return float(scale * np.dot(weights, (diff / scale) ** q) ** (1.0 / q))
