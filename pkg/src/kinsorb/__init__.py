"""Single-particle stochastic model of transport with kinetic sorption.

Submodules
----------
core      parameter containers, convention translations, state probabilities
mbd       Markov binomial occupation-count distributions and generating functions
cf        characteristic functions of the position
density   densities by Fourier inversion and by Gaussian mixtures
moments   closed-form means and variances
simulate  Monte Carlo particle tracking
pde       finite-difference solver for the concentration equations
peaks     peak counting and the Damkohler-number scan
cli       command-line front end
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DiscreteParams,
    EngineeringParams,
    InitialDistribution,
    KineticParams,
    Phase,
    StationaryInfo,
)
from .errors import (  # noqa: E402
    AccuracyError,
    DomainError,
    GridError,
    KinsorbError,
    ParameterError,
    QuadratureError,
    ResourceError,
)

__all__ = [
    "__version__",
    "DiscreteParams",
    "EngineeringParams",
    "InitialDistribution",
    "KineticParams",
    "Phase",
    "StationaryInfo",
    "AccuracyError",
    "DomainError",
    "GridError",
    "KinsorbError",
    "ParameterError",
    "QuadratureError",
    "ResourceError",
]
