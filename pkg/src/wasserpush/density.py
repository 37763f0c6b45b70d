"""Densities of pushforward measures, histogram estimates and empirical measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .measure import WeightedAtomMeasure1D, from_samples

__all__ = [
    "PiecewisePdf",
    "HistogramDensity",
    "NearFlatError",
    "pdf_piecewise_monotone",
    "l1_pdf_distance",
    "l1_pdf_error",
    "empirical_measure",
    "histogram_estimate",
    "histogram_to_measure",
    "default_y_grid",
    "monotone_pieces",
]

FLAT_DERIVATIVE = 1e-10
BISECTION_TOL = 1e-12


class NearFlatError(ValueError):
    """|h'| vanishes at a preimage; the pushforward has no bounded density there."""


@dataclass(frozen=True, eq=False)
class PiecewisePdf:
    """Pushforward density sampled on ``y_grid``."""

    y_grid: np.ndarray
    density: np.ndarray
    pieces: tuple

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape == self.y_grid.shape and np.array_equal(y, self.y_grid):
            return self.density
        return np.interp(y, self.y_grid, self.density, left=0.0, right=0.0)

    @property
    def support(self):
        nz = np.flatnonzero(self.density > 0)
        if nz.size == 0:
            return (0.0, 0.0)
        return float(self.y_grid[nz[0]]), float(self.y_grid[nz[-1]])

    def mass(self) -> float:
        return float(trapezoid(self.density, self.y_grid))


@dataclass(frozen=True, eq=False)
class HistogramDensity:
    edges: np.ndarray
    masses: np.ndarray
    n_samples: int

    def __post_init__(self):
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError("bin masses must be nonnegative and sum to 1")

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def support(self):
        return float(self.edges[0]), float(self.edges[-1])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        i = np.searchsorted(self.edges, y, side="right") - 1
        i = np.where(y == self.edges[-1], self.masses.size - 1, i)
        inside = (i >= 0) & (i < self.masses.size)
        dens = self.masses / self.widths
        return np.where(inside, dens[np.clip(i, 0, self.masses.size - 1)], 0.0)


def _bisect_inverse(h, lo, hi, y, increasing):
    a = np.full(y.shape, lo, dtype=float)
    b = np.full(y.shape, hi, dtype=float)
    tol = BISECTION_TOL * max(1.0, hi - lo)
    while np.max(b - a) > tol:
        m = 0.5 * (a + b)
        hm = h(m)
        go_right = (hm < y) if increasing else (hm > y)
        a = np.where(go_right, m, a)
        b = np.where(go_right, b, m)
        if np.all(b - a <= tol):
            break
    return 0.5 * (a + b)


def _central_diff(h, x, lo, hi):
    step = 1e-6 * (hi - lo)
    xp = np.minimum(x + step, hi)
    xm = np.maximum(x - step, lo)
    return (h(xp) - h(xm)) / (xp - xm)


def pdf_piecewise_monotone(h, weight, pieces, y_grid, dh=None) -> PiecewisePdf:
    """Density of h_* rho on ``y_grid`` by summing r/|h'| over the preimages.

    Parameters
    ----------
    h : callable
        Vectorized 1D function, strictly monotone on each piece.
    weight : callable
        Input density r(alpha) (e.g. a :class:`DensityWeight`).
    pieces : sequence of (lo, hi)
        Intervals covering the domain on which h is monotone.
    y_grid : array_like
        Evaluation points.
    dh : callable, optional
        Exact derivative of h; central differences are used otherwise.

    Raises
    ------
    NearFlatError
        if |h'| < 1e-10 at a preimage of some grid point.
    """
    y = np.asarray(y_grid, dtype=float)
    dens = np.zeros_like(y)
    pieces = tuple((float(a), float(b)) for a, b in pieces)
    if not pieces:
        raise ValueError("need at least one monotone piece")
    for lo, hi in pieces:
        if not hi > lo:
            raise ValueError(f"empty piece [{lo}, {hi}]")
        probe = np.asarray(h(np.linspace(lo, hi, 257)), dtype=float)
        dv = np.diff(probe)
        if not (np.all(dv > 0) or np.all(dv < 0)):
            raise ValueError(f"h is not strictly monotone on piece [{lo}, {hi}]")
        increasing = dv[0] > 0
        h_lo, h_hi = float(h(np.array([lo]))[0]), float(h(np.array([hi]))[0])
        ymin, ymax = min(h_lo, h_hi), max(h_lo, h_hi)
        inside = (y >= ymin) & (y <= ymax)
        if not inside.any():
            continue
        x = _bisect_inverse(h, lo, hi, y[inside], increasing)
        deriv = dh(x) if dh is not None else _central_diff(h, x, lo, hi)
        deriv = np.abs(np.asarray(deriv, dtype=float))
        if np.any(deriv < FLAT_DERIVATIVE):
            bad = x[np.argmax(deriv < FLAT_DERIVATIVE)]
            raise NearFlatError(f"|h'| < {FLAT_DERIVATIVE:g} near alpha={bad!r} on piece [{lo}, {hi}]")
        r = np.broadcast_to(np.asarray(weight(x), dtype=float).reshape(-1), x.shape)
        dens[inside] += r / deriv
    return PiecewisePdf(y, dens, pieces)


def monotone_pieces(h, lo, hi, dh=None, resolution=4097):
    """Split [lo, hi] where h' changes sign (dense sampling plus bisection).

    Helper for callers that cannot state the pieces analytically, e.g. fitted
    polynomial surrogates.
    """
    from scipy.optimize import brentq

    x = np.linspace(lo, hi, resolution)
    d = dh(x) if dh is not None else np.gradient(h(x), x)
    d = np.asarray(d, dtype=float)
    cuts = [lo]
    sign_change = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)
    for i in sign_change:
        if dh is not None:
            c = brentq(lambda t: float(dh(np.array([t]))[0]), x[i], x[i + 1], xtol=1e-15)
        else:
            c = 0.5 * (x[i] + x[i + 1])
        if c > cuts[-1]:
            cuts.append(c)
    cuts.append(hi)
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def default_y_grid(supports, n=2000, pad=0.01):
    """``n`` equispaced points spanning the union of supports, padded by ``pad``."""
    lo = min(s[0] for s in supports)
    hi = max(s[1] for s in supports)
    span = hi - lo if hi > lo else 1.0
    return np.linspace(lo - pad * span, hi + pad * span, n)


def l1_pdf_distance(p1, p2, y_grid) -> float:
    """Trapezoid integral of |p1 - p2| over ``y_grid``."""
    y = np.asarray(y_grid, dtype=float)
    if y.ndim != 1 or y.size < 2 or np.any(np.diff(y) <= 0):
        raise ValueError("y_grid must be strictly increasing with at least 2 points")
    for p in (p1, p2):
        lo, hi = p.support
        if hi < y[0] or lo > y[-1]:
            raise ValueError("evaluation grid does not overlap a density's support")
    return float(trapezoid(np.abs(p1(y) - p2(y)), y))


def _piece_images(h, pieces):
    ends = np.array([x for piece in pieces for x in piece], dtype=float)
    return np.asarray(h(ends), dtype=float)


def l1_pdf_error(h1, pieces1, h2, pieces2, weight, dh1=None, dh2=None, panels=2000, order=16) -> float:
    """Integral of |p1 - p2| for the pushforwards of ``weight`` by h1 and h2.

    The y axis is split at the images of every piece endpoint, where either
    density may jump or blow up, and each segment gets composite Gauss-Legendre
    panels. No node lands on a breakpoint, so support mismatches of any width
    are integrated exactly up to the rule's accuracy.
    """
    breaks = np.unique(np.concatenate([_piece_images(h1, pieces1), _piece_images(h2, pieces2)]))
    span = breaks[-1] - breaks[0]
    if not span > 0:
        raise ValueError("both pushforwards are concentrated at one point")
    t, w = np.polynomial.legendre.leggauss(order)
    ys, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(np.ceil(panels * (b - a) / span)))
        edges = np.linspace(a, b, n + 1)
        half = 0.5 * np.diff(edges)[:, None]
        ys.append((0.5 * (edges[:-1] + edges[1:]))[:, None] + half * t)
        ws.append(half * w)
    y = np.concatenate([v.ravel() for v in ys])
    wt = np.concatenate([v.ravel() for v in ws])
    p1 = pdf_piecewise_monotone(h1, weight, pieces1, y, dh=dh1).density
    p2 = pdf_piecewise_monotone(h2, weight, pieces2, y, dh=dh2).density
    return float(np.dot(wt, np.abs(p1 - p2)))


def empirical_measure(samples) -> WeightedAtomMeasure1D:
    """Uniform-weight atoms on the observed samples."""
    return from_samples(samples)


def histogram_estimate(samples, L: int, range=None) -> HistogramDensity:
    """Equal-width histogram with ``L`` bins; the last bin is closed.

    ``range`` defaults to ``(min(samples), max(samples))``.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("no samples")
    if int(L) != L or L < 1:
        raise ValueError(f"bin count must be a positive integer, got {L}")
    if range is None:
        lo, hi = float(y.min()), float(y.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = map(float, range)
        if y.min() < lo or y.max() > hi:
            raise ValueError("a sample lies outside the histogram range")
    counts, edges = np.histogram(y, bins=int(L), range=(lo, hi))
    return HistogramDensity(edges, counts / y.size, int(y.size))


def histogram_to_measure(hist: HistogramDensity, atoms_per_bin: int) -> WeightedAtomMeasure1D:
    """Discretize the histogram density: equally spaced midpoints in each nonempty bin."""
    if int(atoms_per_bin) != atoms_per_bin or atoms_per_bin < 1:
        raise ValueError("atoms_per_bin must be a positive integer")
    K = int(atoms_per_bin)
    keep = hist.masses > 0
    lo = hist.edges[:-1][keep]
    width = hist.widths[keep]
    frac = (np.arange(K) + 0.5) / K
    atoms = (lo[:, None] + frac[None, :] * width[:, None]).ravel()
    weights = np.repeat(hist.masses[keep] / K, K)
    return from_samples(atoms, weights)
