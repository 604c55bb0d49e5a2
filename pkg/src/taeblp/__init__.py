"""Exact simulation and verification toolkit for the totally asymmetric
exponential bricklayers process (TAEBLP).

The package has three layers:

* exact measure algebra for the discrete-Gaussian stationary family and its
  derived distributions (``measures``),
* an event-driven continuous-time engine for single and coupled
  configurations on finite volumes, with tagged second-class particles
  (``lattice``, ``coupling``, ``convexity``, ``kernels``),
* simulation-free verification oracles and Monte Carlo experiments with
  reproducible replica orchestration (``oracle``, ``experiments``).

The ``taeblp`` command line exposes ``verify`` (oracle suite) and ``run``
(experiments producing CSV, JSON and PNG reports).
"""

__version__ = "0.1.0"

from .measures import (
    RateParams,
    StationaryMarginal,
    SizeBiasedMarginal,
    GeometricLabelLaw,
    ShockPairMeasure,
    rate_f,
    build_marginal,
    theta_of_rho,
    flux_and_speed,
    rw_rates,
)

__all__ = [
    "RateParams",
    "StationaryMarginal",
    "SizeBiasedMarginal",
    "GeometricLabelLaw",
    "ShockPairMeasure",
    "rate_f",
    "build_marginal",
    "theta_of_rho",
    "flux_and_speed",
    "rw_rates",
    "__version__",
]
