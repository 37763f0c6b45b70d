"""Surrogate models g of a response f.

Piecewise-linear interpolants, cubic splines (not-a-knot, clamped, natural),
bicubic tensor-product splines and gPC collocation polynomials on Gauss-Jacobi
nodes. All models are immutable after fitting and reject evaluation points
outside their domain box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.special import betaln

from .pushforward import ParameterBox

__all__ = [
    "SurrogateModel",
    "PiecewiseLinearModel",
    "CubicSplineModel",
    "TensorSplineModel",
    "GpcModel",
    "JacobiBasis",
    "fit_pwl",
    "fit_spline",
    "fit_tensor_spline",
    "jacobi_basis",
    "gauss_nodes",
    "fit_gpc_collocation",
    "evaluate",
]

DOMAIN_TOL = 1e-12


class SurrogateModel:
    """Base class: an evaluable approximation living on a box."""

    kind: str = "abstract"
    domain: ParameterBox

    def __call__(self, alpha):
        return self.evaluate(alpha)

    def _clamp(self, pts):
        lo, hi = self.domain.lower, self.domain.upper
        tol = DOMAIN_TOL * np.maximum(1.0, np.abs(hi - lo))
        if np.any(pts < lo - tol) or np.any(pts > hi + tol):
            raise ValueError(f"{self.kind} surrogate evaluated outside its domain {self.domain}")
        return np.clip(pts, lo, hi)

    def _points_1d(self, alpha):
        a = np.asarray(alpha, dtype=float)
        if a.ndim == 2 and a.shape[1] == 1:
            a = a[:, 0]
        return self._clamp(a[..., None])[..., 0]

    def evaluate(self, alpha):
        raise NotImplementedError


def evaluate(model: SurrogateModel, alpha):
    """Evaluate a fitted surrogate at one point or an array of points."""
    return model.evaluate(alpha)


def _check_nodes(nodes, values):
    x = np.asarray(nodes, dtype=float).ravel()
    y = np.asarray(values, dtype=float)
    if y.shape[0] != x.size:
        raise ValueError("nodes and values differ in length")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("nodes and values must be finite")
    if np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing without duplicates")
    return x, y


# --- piecewise linear -------------------------------------------------------


class PiecewiseLinearModel(SurrogateModel):
    kind = "pwl"

    def __init__(self, nodes, values, domain):
        self.nodes = nodes
        self.values = values
        self.domain = domain

    def evaluate(self, alpha):
        a = self._points_1d(alpha)
        out = np.interp(a, self.nodes, self.values)
        return out if out.ndim else float(out)

    def derivative(self, alpha):
        a = self._points_1d(alpha)
        slopes = np.diff(self.values) / np.diff(self.nodes)
        i = np.clip(np.searchsorted(self.nodes, a, side="right") - 1, 0, slopes.size - 1)
        return slopes[i]


def fit_pwl(nodes, values, domain: ParameterBox | None = None) -> PiecewiseLinearModel:
    """Continuous piecewise-linear interpolant through ``(nodes, values)``."""
    x, y = _check_nodes(nodes, values)
    if x.size < 2:
        raise ValueError("piecewise-linear interpolation needs at least 2 nodes")
    if domain is None:
        domain = ParameterBox([x[0]], [x[-1]])
    elif domain.dim != 1 or x[0] > domain.lower[0] or x[-1] < domain.upper[0]:
        raise ValueError("nodes must cover the domain endpoints")
    return PiecewiseLinearModel(x, y.astype(float), domain)


# --- cubic splines ------------------------------------------------------------


def _spline_slopes(x, y, boundary="not-a-knot", end_slopes=None):
    """Nodal first derivatives of the C2 cubic spline through (x, y).

    ``y`` may carry extra trailing dimensions (several right-hand sides).
    The system is tridiagonal for every supported boundary condition once the
    not-a-knot rows are written in their reduced two-term form.
    """
    n = x.size
    h = np.diff(x)
    yy = y.reshape(n, -1)
    delta = np.diff(yy, axis=0) / h[:, None]

    ab = np.zeros((3, n))  # rows: super, main, sub
    rhs = np.zeros((n, yy.shape[1]))
    # interior rows
    ab[0, 2:] = h[:-1]
    ab[1, 1:-1] = 2.0 * (h[:-1] + h[1:])
    ab[2, :-2] = h[1:]
    rhs[1:-1] = 3.0 * (h[1:, None] * delta[:-1] + h[:-1, None] * delta[1:])

    if boundary == "not-a-knot":
        if n < 4:
            raise ValueError("not-a-knot cubic spline needs at least 4 nodes")
        d = x[2] - x[0]
        ab[1, 0] = h[1]
        ab[0, 1] = d
        rhs[0] = ((h[0] + 2.0 * d) * h[1] * delta[0] + h[0] ** 2 * delta[1]) / d
        d = x[-1] - x[-3]
        ab[1, -1] = h[-2]
        ab[2, -2] = d
        rhs[-1] = (h[-1] ** 2 * delta[-2] + (2.0 * d + h[-1]) * h[-2] * delta[-1]) / d
    elif boundary == "clamped":
        if end_slopes is None:
            raise ValueError("clamped boundary needs end_slopes=(f'(a), f'(b))")
        if n < 2:
            raise ValueError("cubic spline needs at least 2 nodes")
        ab[1, 0] = 1.0
        ab[0, 1] = 0.0
        rhs[0] = end_slopes[0]
        ab[1, -1] = 1.0
        ab[2, -2] = 0.0
        rhs[-1] = end_slopes[1]
    elif boundary == "natural":
        if n < 3:
            raise ValueError("natural cubic spline needs at least 3 nodes")
        ab[1, 0] = 2.0
        ab[0, 1] = 1.0
        rhs[0] = 3.0 * delta[0]
        ab[1, -1] = 2.0
        ab[2, -2] = 1.0
        rhs[-1] = 3.0 * delta[-1]
    else:
        raise ValueError(f"unknown spline boundary condition {boundary!r}")

    try:
        m = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - valid nodes never hit this
        raise RuntimeError("spline system is singular") from exc
    return m.reshape(y.shape)


def _hermite_eval(x, y, m, t):
    """Evaluate the cubic Hermite pieces defined by nodal values/slopes.

    ``y`` and ``m`` have shape (n,) or (n, k); with k columns the result has
    shape (len(t), k).
    """
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
    h = x[i + 1] - x[i]
    s = (t - x[i]) / h
    if y.ndim > 1:
        s = s[:, None]
        h = h[:, None]
    y0, y1, m0, m1 = y[i], y[i + 1], m[i], m[i + 1]
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * m0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * m1
    )


def _hermite_deriv(x, y, m, t):
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
    h = x[i + 1] - x[i]
    s = (t - x[i]) / h
    y0, y1, m0, m1 = y[i], y[i + 1], m[i], m[i + 1]
    s2 = s * s
    return (
        (6 * s2 - 6 * s) * y0 / h
        + (3 * s2 - 4 * s + 1) * m0
        + (-6 * s2 + 6 * s) * y1 / h
        + (3 * s2 - 2 * s) * m1
    )


def _hermite_rows(x, Y, Mslopes, t):
    """Row-wise evaluation: row j of Y/Mslopes is a separate spline evaluated at t[j]."""
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, x.size - 2)
    rows = np.arange(t.size)
    h = x[i + 1] - x[i]
    s = (t - x[i]) / h
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * Y[rows, i]
        + (s3 - 2 * s2 + s) * h * Mslopes[rows, i]
        + (-2 * s3 + 3 * s2) * Y[rows, i + 1]
        + (s3 - s2) * h * Mslopes[rows, i + 1]
    )


class CubicSplineModel(SurrogateModel):
    kind = "spline"
    order = 3

    def __init__(self, nodes, values, slopes, boundary, domain):
        self.nodes = nodes
        self.values = values
        self.slopes = slopes
        self.boundary = boundary
        self.domain = domain

    def evaluate(self, alpha):
        a = self._points_1d(alpha)
        out = _hermite_eval(self.nodes, self.values, self.slopes, np.atleast_1d(a))
        return out.reshape(a.shape) if a.ndim else float(out[0])

    def derivative(self, alpha):
        a = self._points_1d(alpha)
        out = _hermite_deriv(self.nodes, self.values, self.slopes, np.atleast_1d(a))
        return out.reshape(a.shape) if a.ndim else float(out[0])


def fit_spline(
    nodes,
    values,
    boundary: str = "not-a-knot",
    end_slopes: tuple[float, float] | None = None,
    domain: ParameterBox | None = None,
) -> CubicSplineModel:
    """C2 cubic spline interpolant.

    Parameters
    ----------
    nodes, values : array_like
        Strictly increasing interpolation nodes and the sampled f values.
    boundary : {"not-a-knot", "clamped", "natural"}
        Closure condition. ``clamped`` needs ``end_slopes``.
    """
    x, y = _check_nodes(nodes, values)
    if domain is None:
        domain = ParameterBox([x[0]], [x[-1]])
    slopes = _spline_slopes(x, y.astype(float), boundary, end_slopes)
    return CubicSplineModel(x, y.astype(float), slopes, boundary, domain)


class TensorSplineModel(SurrogateModel):
    """Bicubic not-a-knot tensor spline.

    Data slopes along the first axis are solved once for every grid column.
    Along the second axis the spline of the intermediate values is linear in
    those values, so its slope operator is precomputed as a matrix.
    """

    kind = "tensor-spline"

    def __init__(self, x1, x2, values, slopes1, slope_op2, domain):
        self.nodes = (x1, x2)
        self.values = values
        self._slopes1 = slopes1
        self._slope_op2 = slope_op2
        self.domain = domain

    def evaluate(self, alpha, chunk=65536):
        pts = np.asarray(alpha, dtype=float)
        single = pts.ndim == 1
        pts = self._clamp(np.atleast_2d(pts))
        x1, x2 = self.nodes
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], chunk):
            p = pts[start:start + chunk]
            inter = _hermite_eval(x1, self.values, self._slopes1, p[:, 0])  # (k, n2)
            slopes2 = inter @ self._slope_op2.T
            out[start:start + chunk] = _hermite_rows(x2, inter, slopes2, p[:, 1])
        return float(out[0]) if single else out


def fit_tensor_spline(x1, x2, values, domain: ParameterBox | None = None) -> TensorSplineModel:
    """Bicubic not-a-knot spline through ``values[i, j] = f(x1[i], x2[j])``."""
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    v = np.asarray(values, dtype=float)
    if v.shape != (x1.size, x2.size):
        raise ValueError(f"values must have shape {(x1.size, x2.size)}, got {v.shape}")
    if x1.size < 4 or x2.size < 4:
        raise ValueError("tensor spline needs at least 4 nodes per axis")
    _check_nodes(x1, v)
    _check_nodes(x2, v.T)
    if domain is None:
        domain = ParameterBox([x1[0], x2[0]], [x1[-1], x2[-1]])
    slopes1 = _spline_slopes(x1, v, "not-a-knot")
    slope_op2 = _spline_slopes(x2, np.eye(x2.size), "not-a-knot")
    return TensorSplineModel(x1, x2, v, slopes1, slope_op2, domain)


# --- Jacobi polynomials and gPC ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class JacobiBasis:
    """Orthonormal polynomials for the probability weight ~ (1-a)^beta1 (1+a)^beta2 on [-1, 1].

    ``diag[n]`` and ``offdiag[n]`` are the recurrence coefficients in
    ``a p_n = offdiag[n+1] p_{n+1} + diag[n] p_n + offdiag[n] p_{n-1}``
    (``offdiag[0]`` is unused and set to 0).
    """

    beta1: float
    beta2: float
    max_degree: int
    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def norm_constant(self) -> float:
        """k such that k (1-a)^beta1 (1+a)^beta2 integrates to one on [-1, 1]."""
        b1, b2 = self.beta1, self.beta2
        return math.exp(-(b1 + b2 + 1) * math.log(2.0) - betaln(b1 + 1, b2 + 1))

    def weight(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return self.norm_constant * (1 - a) ** self.beta1 * (1 + a) ** self.beta2

    def vandermonde(self, alpha, degree: int | None = None, derivative: bool = False):
        """Matrix ``V[i, n] = p_n(alpha[i])`` for n <= degree (optionally also p_n')."""
        degree = self.max_degree if degree is None else degree
        if degree > self.max_degree:
            raise ValueError(f"degree {degree} exceeds basis max_degree {self.max_degree}")
        a = np.atleast_1d(np.asarray(alpha, dtype=float))
        V = np.zeros((a.size, degree + 1))
        D = np.zeros_like(V)
        V[:, 0] = 1.0
        for n in range(degree):
            prev = V[:, n - 1] if n > 0 else 0.0
            dprev = D[:, n - 1] if n > 0 else 0.0
            b = self.offdiag[n]
            V[:, n + 1] = ((a - self.diag[n]) * V[:, n] - b * prev) / self.offdiag[n + 1]
            D[:, n + 1] = (V[:, n] + (a - self.diag[n]) * D[:, n] - b * dprev) / self.offdiag[n + 1]
        return (V, D) if derivative else V

    def clenshaw(self, coeffs, alpha):
        """Evaluate ``sum_n coeffs[n] p_n(alpha)`` by backward recurrence."""
        c = np.asarray(coeffs, dtype=float)
        a = np.asarray(alpha, dtype=float)
        nmax = c.size - 1
        if nmax > self.max_degree:
            raise ValueError("more coefficients than the basis supports")
        b1 = np.zeros_like(a)
        b2 = np.zeros_like(a)
        for n in range(nmax, -1, -1):
            an = (a - self.diag[n]) / self.offdiag[n + 1]
            bn1 = self.offdiag[n + 1] / self.offdiag[n + 2]
            b1, b2 = c[n] + an * b1 - bn1 * b2, b1
        return b1


def _jacobi_recurrence(b1, b2, nmax):
    """Monic Jacobi recurrence coefficients (alpha_n, beta_n), n = 0..nmax."""
    a, b = float(b1), float(b2)
    n = np.arange(nmax + 1, dtype=float)
    alpha = np.empty(nmax + 1)
    beta = np.zeros(nmax + 1)
    alpha[0] = (b - a) / (a + b + 2.0)
    if nmax >= 1:
        nn = n[1:]
        s = 2.0 * nn + a + b
        alpha[1:] = (b * b - a * a) / (s * (s + 2.0))
        beta[1] = 4.0 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        if nmax >= 2:
            nn = n[2:]
            s = 2.0 * nn + a + b
            beta[2:] = 4.0 * nn * (nn + a) * (nn + b) * (nn + a + b) / (s * s * (s + 1.0) * (s - 1.0))
    return alpha, beta


def jacobi_basis(beta1: float, beta2: float, max_degree: int) -> JacobiBasis:
    """Orthonormal Jacobi basis up to ``max_degree`` for the normalized weight."""
    if not (beta1 > -1 and beta2 > -1):
        raise ValueError(f"Jacobi exponents must exceed -1, got ({beta1}, {beta2})")
    if max_degree < 0:
        raise ValueError("max_degree must be nonnegative")
    alpha, beta = _jacobi_recurrence(beta1, beta2, max_degree + 2)
    return JacobiBasis(
        float(beta1), float(beta2), int(max_degree), alpha, np.sqrt(beta)
    )


def gauss_nodes(basis: JacobiBasis, N: int):
    """N-point Gauss rule for the basis weight; weights sum to one.

    Nodes are the eigenvalues of the truncated Jacobi matrix, refined by one
    Newton step on p_N. Weights use the Christoffel formula
    ``w_j = 1 / sum_{n<N} p_n(x_j)^2``.
    """
    if int(N) != N or N < 1 or N > basis.max_degree:
        raise ValueError(f"need 1 <= N <= max_degree={basis.max_degree}, got {N}")
    N = int(N)
    if N == 1:
        x = np.array([basis.diag[0]])
    else:
        x = eigh_tridiagonal(basis.diag[:N], basis.offdiag[1:N], eigvals_only=True)
    V, D = basis.vandermonde(x, N, derivative=True)
    x = x - V[:, N] / D[:, N]
    V = basis.vandermonde(x, N - 1)
    w = 1.0 / np.sum(V * V, axis=1)
    return x, w / w.sum()


class GpcModel(SurrogateModel):
    kind = "gpc"

    def __init__(self, basis, coeffs, nodes, domain):
        self.basis = basis
        self.coeffs = coeffs
        self.nodes = nodes
        self.domain = domain

    @property
    def N(self):
        return self.coeffs.size

    def _to_reference(self, a):
        lo, hi = self.domain.lower[0], self.domain.upper[0]
        return np.clip((2.0 * a - (lo + hi)) / (hi - lo), -1.0, 1.0)

    def evaluate(self, alpha):
        a = self._points_1d(alpha)
        out = self.basis.clenshaw(self.coeffs, self._to_reference(a))
        return out if np.ndim(out) else float(out)

    def derivative(self, alpha):
        a = np.atleast_1d(self._points_1d(alpha))
        lo, hi = self.domain.lower[0], self.domain.upper[0]
        _, D = self.basis.vandermonde(self._to_reference(a), self.N - 1, derivative=True)
        return (D @ self.coeffs) * (2.0 / (hi - lo))


def fit_gpc_collocation(f, basis: JacobiBasis, N: int, domain: ParameterBox | None = None) -> GpcModel:
    """Collocation gPC surrogate of degree N-1.

    f is sampled at the N Gauss nodes of ``basis`` (mapped affinely onto
    ``domain``, default [-1, 1]) and the coefficients are the discrete
    projections ``sum_j f(a_j) p_n(a_j) w_j``, n < N.
    """
    if domain is None:
        domain = ParameterBox([-1.0], [1.0])
    if domain.dim != 1:
        raise ValueError("gPC collocation is one-dimensional")
    x, w = gauss_nodes(basis, N)
    lo, hi = domain.lower[0], domain.upper[0]
    nodes = lo + (x + 1.0) * 0.5 * (hi - lo)
    vals = np.asarray(f(nodes), dtype=float)
    if vals.shape != nodes.shape or not np.all(np.isfinite(vals)):
        bad = np.flatnonzero(~np.isfinite(np.broadcast_to(vals, nodes.shape)))
        where = f" at node {nodes[bad[0]]!r}" if bad.size else ""
        raise ValueError(f"f could not be evaluated at the Gauss nodes{where}")
    V = basis.vandermonde(x, N - 1)
    coeffs = V.T @ (w * vals)
    return GpcModel(basis, coeffs, nodes, domain)
