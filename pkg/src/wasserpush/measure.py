"""Finitely atomic probability measures on the real line and exact distances.

Every measure is a sorted list of atoms with positive weights. Because both
the CDF and the quantile function of such a measure are step functions, the
Wasserstein distances, the L1/L2 distances between CDFs and all moments are
finite sums and are computed exactly (up to floating point rounding).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "WeightedAtomMeasure1D",
    "CdfView",
    "QuantileView",
    "from_samples",
    "wasserstein_p",
    "w1_via_cdf",
    "hminus1_distance",
    "moment",
    "brute_force_wp",
]

WEIGHT_SUM_TOL = 1e-12
BRUTE_FORCE_MAX_ATOMS = 8


@dataclass(frozen=True, eq=False)
class WeightedAtomMeasure1D:
    """Probability measure ``sum_i weights[i] * delta(atoms[i])``.

    Use :func:`from_samples` to build one from raw data; the constructor only
    validates. Arrays are stored read-only.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            raise ValueError("a measure needs at least one atom")
        if atoms.shape != weights.shape:
            raise ValueError(
                f"atoms and weights differ in length ({atoms.size} vs {weights.size})"
            )
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing (merge duplicates first)")
        if not np.all(weights > 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.atoms.size

    def __eq__(self, other):
        if not isinstance(other, WeightedAtomMeasure1D):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(
            self.weights, other.weights
        )

    __hash__ = None

    @property
    def support(self) -> tuple[float, float]:
        return float(self.atoms[0]), float(self.atoms[-1])

    def cumulative_weights(self) -> np.ndarray:
        """Right-continuous CDF values at the atoms; the last entry is exactly 1."""
        cw = np.cumsum(self.weights)
        cw[-1] = 1.0
        return cw

    def cdf(self) -> "CdfView":
        return CdfView(self)

    def quantile(self) -> "QuantileView":
        return QuantileView(self)

    def shifted(self, t: float) -> "WeightedAtomMeasure1D":
        atoms = self.atoms + t
        if np.all(np.diff(atoms) > 0):
            return WeightedAtomMeasure1D(atoms, self.weights)
        # atoms closer than ulp(t) collided; merge them
        return from_samples(atoms, self.weights)

    def mean(self) -> float:
        return moment(self, 1)


class CdfView:
    """F(y) = mu((-inf, y]), a right-continuous step function."""

    def __init__(self, measure: WeightedAtomMeasure1D):
        self.measure = measure
        self._cw = measure.cumulative_weights()

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.measure.atoms, y, side="right")
        out = np.where(idx > 0, self._cw[np.maximum(idx - 1, 0)], 0.0)
        return out if out.ndim else float(out)


class QuantileView:
    """Generalized inverse F^{-1}(t) = inf{x : F(x) >= t} on (0, 1]."""

    def __init__(self, measure: WeightedAtomMeasure1D):
        self.measure = measure
        self._cw = measure.cumulative_weights()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0) | (t > 1)):
            raise ValueError("quantile levels must lie in (0, 1]")
        idx = np.searchsorted(self._cw, t, side="left")
        out = self.measure.atoms[np.minimum(idx, len(self.measure) - 1)]
        return out if out.ndim else float(out)


def from_samples(
    values: Sequence[float], weights: Sequence[float] | None = None
) -> WeightedAtomMeasure1D:
    """Build a measure from (possibly weighted) samples.

    Bitwise-equal values are merged and their weights summed; near-duplicates
    stay distinct. Missing weights default to uniform, and weights are
    renormalized to sum to one.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("cannot build a measure from an empty sample")
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"non-finite sample value {values[i]!r} at index {i}")
    if weights is None:
        w = np.full(values.size, 1.0 / values.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != values.shape:
            raise ValueError("values and weights differ in length")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be positive and finite")
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = w[order]
    atoms, start = np.unique(v, return_index=True)
    merged = np.add.reduceat(w, start)
    merged = merged / merged.sum()
    return WeightedAtomMeasure1D(atoms, merged)


def _check_measure(m):
    if not isinstance(m, WeightedAtomMeasure1D):
        raise TypeError(f"expected WeightedAtomMeasure1D, got {type(m).__name__}")


def _quantile_pieces(mu, nu):
    """Common refinement of the two quantile step functions.

    Returns interval lengths dt and the constant quantile values of mu and nu
    on each interval of (0, 1].
    """
    cu = mu.cumulative_weights()
    cv = nu.cumulative_weights()
    t = np.union1d(cu, cv)
    t = t[t > 0]
    lo = np.concatenate(([0.0], t[:-1]))
    dt = t - lo
    keep = dt > 0
    lo, t, dt = lo[keep], t[keep], dt[keep]
    mid = 0.5 * (lo + t)
    iu = np.minimum(np.searchsorted(cu, mid, side="left"), len(mu) - 1)
    iv = np.minimum(np.searchsorted(cv, mid, side="left"), len(nu) - 1)
    return dt, mu.atoms[iu], nu.atoms[iv]


def wasserstein_p(mu: WeightedAtomMeasure1D, nu: WeightedAtomMeasure1D, p: float = 1.0) -> float:
    """W_p between two atomic measures via the monotone (quantile) coupling."""
    _check_measure(mu)
    _check_measure(nu)
    if not p >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {p}")
    dt, qu, qv = _quantile_pieces(mu, nu)
    gap = np.abs(qu - qv)
    if math.isinf(p):
        return float(gap.max())
    if p == 1:
        return float(np.dot(dt, gap))
    # scale out the largest gap so tiny distances don't underflow for large p
    scale = gap.max()
    if scale == 0:
        return 0.0
    return float(scale * np.dot(dt, (gap / scale) ** p) ** (1.0 / p))


def _cdf_gap_pieces(mu, nu):
    x = np.union1d(mu.atoms, nu.atoms)
    fu = CdfView(mu)(x)
    fv = CdfView(nu)(x)
    return np.diff(x), np.abs(fu - fv)[:-1]


def w1_via_cdf(mu: WeightedAtomMeasure1D, nu: WeightedAtomMeasure1D) -> float:
    """Integral of |F_mu - F_nu| over the line; equals W_1."""
    _check_measure(mu)
    _check_measure(nu)
    dx, gap = _cdf_gap_pieces(mu, nu)
    return float(np.dot(dx, gap))


def hminus1_distance(mu: WeightedAtomMeasure1D, nu: WeightedAtomMeasure1D) -> float:
    """Homogeneous H^{-1} seminorm of mu - nu.

    Integrating the pairing against a unit H^1 test function by parts turns the
    supremum into the L2 norm of the CDF difference, which is what is computed.
    """
    _check_measure(mu)
    _check_measure(nu)
    dx, gap = _cdf_gap_pieces(mu, nu)
    return float(math.sqrt(np.dot(dx, gap * gap)))


def moment(mu: WeightedAtomMeasure1D, k: int) -> float:
    """k-th raw moment sum_i w_i x_i^k."""
    _check_measure(mu)
    if int(k) != k or k < 1:
        raise ValueError(f"moment order must be a positive integer, got {k}")
    return float(np.dot(mu.weights, mu.atoms ** int(k)))


def brute_force_wp(mu: WeightedAtomMeasure1D, nu: WeightedAtomMeasure1D, p: float = 1.0) -> float:
    """Minimum transport cost over all permutation couplings.

    Only for uniform-weight measures with the same number of atoms (at most 8).
    Solves the coupling problem literally, so it serves as an oracle for
    :func:`wasserstein_p`.
    """
    _check_measure(mu)
    _check_measure(nu)
    n = len(mu)
    if n != len(nu):
        raise ValueError("brute force needs equal atom counts")
    if n > BRUTE_FORCE_MAX_ATOMS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_ATOMS} atoms, got {n}")
    for m in (mu, nu):
        if not np.allclose(m.weights, 1.0 / n, rtol=0, atol=1e-14):
            raise ValueError("brute force needs uniform weights")
    if not p >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {p}")
    x, y = mu.atoms, nu.atoms
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(abs(x[i] - y[j]) ** p for i, j in enumerate(perm)) / n
        best = min(best, cost)
    return best ** (1.0 / p)
