"""Wasserstein distances between measures pushed forward through a response and its surrogate."""

from .measure import (
    WeightedAtomMeasure1D,
    brute_force_wp,
    from_samples,
    hminus1_distance,
    moment,
    w1_via_cdf,
    wasserstein_p,
)
from .pushforward import (
    ParameterBox,
    ParameterQuadrature,
    build_quadrature,
    jacobi_weight,
    lq_error,
    pushforward,
    uniform_weight,
)

__version__ = "0.1.0"
