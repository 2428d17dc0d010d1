"""Coefficient identification procedures: Gaussian equivalence, second- and third-derivative estimators."""

from .common import EstimateResult, default_u_grid, flatness_check
from .equivalence import (
    EquivalenceResult,
    GaussianParamsQ1,
    PreconditionError,
    covariance_system,
    theorem2_equivalent_model,
)
from .lemma1 import lemma1_criterion, lemma1_estimate, lemma1_moment, lemma1_moments, lemma1_points
from .theorem1 import (
    DegenerateDirection,
    ProbeSystem,
    SingularProbeSystem,
    criterion_batch,
    probe_det,
    probe_matrix,
    theorem1_criterion,
    theorem1_curves,
    theorem1_estimate,
    theorem1_probes,
)

__all__ = [
    "DegenerateDirection",
    "EquivalenceResult",
    "EstimateResult",
    "GaussianParamsQ1",
    "PreconditionError",
    "ProbeSystem",
    "SingularProbeSystem",
    "covariance_system",
    "criterion_batch",
    "default_u_grid",
    "flatness_check",
    "lemma1_criterion",
    "lemma1_estimate",
    "lemma1_moment",
    "lemma1_moments",
    "lemma1_points",
    "probe_det",
    "probe_matrix",
    "theorem1_criterion",
    "theorem1_curves",
    "theorem1_estimate",
    "theorem1_probes",
    "theorem2_equivalent_model",
]
