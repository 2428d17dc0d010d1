"""
YAML run configuration.

One schema serves every command; unknown keys anywhere are rejected. The
``model`` section mirrors :meth:`EDModelSpec.to_dict`, so a spec dumped to
YAML loads back unchanged.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .cf import EPS_CF
from .families import CenteredGamma, FamilyError, Gaussian, Mixture
from .identify.common import FLAT_TOL, NULL_FACTOR, default_u_grid
from .model import EDModelSpec, ShockBlock, SpecError


class ConfigError(ValueError):
    """Config file missing, unparsable or not matching the schema."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GaussianFactor(_Strict):
    family: Literal["gaussian"]
    var: float

    def build(self):
        return Gaussian(self.var)


class MixtureFactor(_Strict):
    family: Literal["mixture"]
    p: float
    mu: float
    sd1: float
    sd2: float

    def build(self):
        return Mixture(self.p, self.mu, self.sd1, self.sd2)


class GammaFactor(_Strict):
    family: Literal["gamma"]
    shape: float
    scale: float

    def build(self):
        return CenteredGamma(self.shape, self.scale)


FactorConfig = Annotated[Union[GaussianFactor, MixtureFactor, GammaFactor], Field(discriminator="family")]


class GaussianPairConfig(_Strict):
    kind: Literal["gaussian"]
    var_eta: float
    var_xi: float
    cov: float = 0.0

    def build(self):
        return ShockBlock.gaussian_pair(self.var_eta, self.var_xi, self.cov)


class IndependentPairConfig(_Strict):
    kind: Literal["independent"]
    eta: FactorConfig
    xi: FactorConfig

    def build(self):
        return ShockBlock.independent_pair(self.eta.build(), self.xi.build())


class FactorPairConfig(_Strict):
    """(eta, xi) = loadings @ (f1, f2) with independent factors."""

    kind: Literal["factor"]
    factors: Tuple[FactorConfig, FactorConfig]
    loadings: Tuple[Tuple[float, float], Tuple[float, float]]

    def build(self):
        return ShockBlock.factor_pair(self.factors[0].build(), self.factors[1].build(), self.loadings)


PairConfig = Annotated[
    Union[GaussianPairConfig, IndependentPairConfig, FactorPairConfig], Field(discriminator="kind")
]


class ModelConfig(_Strict):
    T: int
    q: int
    a: List[float]
    initial: Union[FactorConfig, List[FactorConfig]] = []
    pairs: Union[PairConfig, List[PairConfig]]

    def to_spec(self) -> EDModelSpec:
        init = self.initial if isinstance(self.initial, list) else [self.initial] * self.q
        pairs = self.pairs if isinstance(self.pairs, list) else [self.pairs] * self.T
        if len(init) != self.q:
            raise SpecError(f"model.initial needs q = {self.q} entries (or one shared entry), got {len(init)}")
        if len(pairs) != self.T:
            raise SpecError(f"model.pairs needs T = {self.T} entries (or one shared entry), got {len(pairs)}")
        blocks = [ShockBlock.singleton(f.build()) for f in init] + [p.build() for p in pairs]
        return EDModelSpec(self.T, self.q, tuple(self.a), tuple(blocks))


class SimulateConfig(_Strict):
    n: int = Field(ge=1)
    seed: int = 0
    keep_components: bool = False


class EstimateConfig(_Strict):
    method: Literal["lemma1", "theorem1"] = "lemma1"
    backend: Literal["empirical", "analytic"] = "empirical"
    u_grid: Optional[List[float]] = None
    u_half_width: float = Field(2.0, gt=0)
    u_points: int = Field(21, ge=3)
    search_interval: Tuple[float, float] = (-2.0, 2.0)
    search_box: Optional[List[Tuple[float, float]]] = None
    grid_step: float = Field(0.01, gt=0)
    eps_cf: float = Field(EPS_CF, gt=0)
    flat_tol: float = Field(FLAT_TOL, ge=0)
    null_replications: int = Field(3, ge=0)
    null_factor: float = Field(NULL_FACTOR, gt=0)
    part: Literal["both", "real"] = "both"
    demean: bool = False
    seed: int = 0

    @field_validator("u_grid")
    @classmethod
    def _no_zero(cls, v):
        if v is not None and (len(v) < 2 or any(x == 0 for x in v)):
            raise ValueError("u_grid needs at least two points and must exclude 0")
        return v

    def grid(self) -> np.ndarray:
        if self.u_grid is not None:
            return np.asarray(self.u_grid, dtype=float)
        return default_u_grid(self.u_half_width, self.u_points)


class EquivalenceConfig(_Strict):
    candidate_a1: Union[float, List[float]]

    def candidates(self) -> list:
        return list(self.candidate_a1) if isinstance(self.candidate_a1, list) else [self.candidate_a1]


class MonteCarloConfig(_Strict):
    procedure: Literal["lemma1", "theorem1", "theorem2-demo", "covariance-check"]
    n: int = Field(ge=3)
    replications: int = Field(ge=1)
    base_seed: int = 0
    workers: int = Field(1, ge=1)
    candidate_a1: Optional[float] = None


class RunConfig(_Strict):
    model: ModelConfig
    simulate: Optional[SimulateConfig] = None
    estimate: EstimateConfig = EstimateConfig()
    equivalence: Optional[EquivalenceConfig] = None
    montecarlo: Optional[MonteCarloConfig] = None


def parse_config(data: dict) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
        cfg.model.to_spec()
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None
    except (SpecError, FamilyError) as exc:
        raise ConfigError(f"model: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def _format(exc: ValidationError) -> str:
    lines = []
    for e in exc.errors():
        loc = ".".join(str(x) for x in e["loc"])
        lines.append(f"{loc}: {e['msg']}")
    return "invalid config:\n  " + "\n  ".join(lines)
