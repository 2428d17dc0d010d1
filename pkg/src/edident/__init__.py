"""
Simulation and identification tools for the permanent/transitory earnings
dynamics model ``y_t = eta_1 + ... + eta_t + xi_t + a_1 xi_{t-1} + ... + a_q xi_{t-q}``
with possibly dependent contemporaneous shocks.
"""

from .cf import AnalyticCF, CFQuery, CFValue, EmpiricalCF, IllConditionedPoint, directional_derivative
from .families import CenteredGamma, Gaussian, Mixture
from .model import (
    EDModelSpec,
    LoadingMatrix,
    ShockBlock,
    SpecError,
    build_loading_matrix,
    validate_identification_preconditions,
)
from .moments import (
    empirical_covariance,
    empirical_third_cumulants,
    implied_covariance,
    implied_third_cumulants,
)
from .simulate import Panel, generate_panel

__version__ = "0.1.0"

__all__ = [
    "AnalyticCF",
    "CFQuery",
    "CFValue",
    "CenteredGamma",
    "EDModelSpec",
    "EmpiricalCF",
    "Gaussian",
    "IllConditionedPoint",
    "LoadingMatrix",
    "Mixture",
    "Panel",
    "ShockBlock",
    "SpecError",
    "build_loading_matrix",
    "directional_derivative",
    "empirical_covariance",
    "empirical_third_cumulants",
    "generate_panel",
    "implied_covariance",
    "implied_third_cumulants",
    "validate_identification_preconditions",
]
