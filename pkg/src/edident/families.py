"""
Scalar zero-mean shock families with closed-form log characteristic functions.

Every family exposes the log-cf and its derivatives up to order 3, its exact
cumulants of order 2 and 3, and a sampler. Pairs of contemporaneous shocks are
built elsewhere as linear combinations of independent factors drawn from these
families, so that every joint log-cf stays closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from .cumulants import log_derivative_from_raw

MAX_ORDER = 3


class FamilyError(ValueError):
    """Invalid family parameters."""


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"log-cf derivative order must be in 0..{MAX_ORDER}, got {order}")


@dataclass(frozen=True)
class Gaussian:
    """Centered normal factor N(0, var)."""

    var: float
    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not np.isfinite(self.var) or self.var < 0:
            raise FamilyError(f"gaussian variance must be finite and >= 0, got {self.var}")

    @property
    def gaussian(self) -> bool:
        return True

    def cumulant(self, r: int) -> float:
        return {1: 0.0, 2: float(self.var)}.get(r, 0.0)

    def log_cf(self, x, order: int = 0):
        _check_order(order)
        x = np.asarray(x, dtype=float)
        if order == 0:
            return (-0.5 * self.var * x**2).astype(complex)
        if order == 1:
            return (-self.var * x).astype(complex)
        if order == 2:
            return np.full(x.shape, -self.var, dtype=complex)
        return np.zeros(x.shape, dtype=complex)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.sqrt(self.var) * rng.standard_normal(size)

    def to_dict(self) -> dict:
        return {"family": self.family, "var": self.var}


@dataclass(frozen=True)
class Mixture:
    """
    Two-component zero-mean normal mixture.

    With probability ``p`` the draw is N(mu, sd1**2), otherwise
    N(mu2, sd2**2) where ``mu2 = -p * mu / (1 - p)`` keeps the mean at zero.

    Notes
    -----
    When ``sd1 == sd2`` and ``p != 0.5`` the characteristic function has no
    real zeros; unequal scales can produce isolated zeros far from the origin.
    """

    p: float
    mu: float
    sd1: float
    sd2: float
    family: ClassVar[str] = "mixture"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise FamilyError(f"mixture weight p must lie in (0, 1), got {self.p}")
        if self.sd1 < 0 or self.sd2 < 0:
            raise FamilyError("mixture component sds must be >= 0")
        if not all(np.isfinite([self.mu, self.sd1, self.sd2])):
            raise FamilyError("mixture parameters must be finite")

    @property
    def mu2(self) -> float:
        return -self.p * self.mu / (1.0 - self.p)

    @property
    def gaussian(self) -> bool:
        return self.mu == 0.0 and self.sd1 == self.sd2

    def _components(self):
        return ((self.p, self.mu, self.sd1**2), (1.0 - self.p, self.mu2, self.sd2**2))

    def raw_moment(self, r: int) -> float:
        # E[X^r] for r <= 3, per component: mean, var
        total = 0.0
        for w, m, v in self._components():
            total += w * {1: m, 2: m**2 + v, 3: m**3 + 3 * m * v}[r]
        return total

    def cumulant(self, r: int) -> float:
        if r == 1:
            return 0.0
        if r == 2:
            return self.raw_moment(2)
        if r == 3:
            return self.raw_moment(3)
        raise ValueError("only cumulants of order <= 3 are provided")

    def _raw_cf_derivs(self, x, order):
        """phi^(k)(x), k = 0..order, rescaled by a common positive factor."""
        x = np.asarray(x, dtype=float)
        comps = self._components()
        expo = [1j * m * x - 0.5 * v * x**2 for _, m, v in comps]
        # common rescaling guards against underflow; quotients are unaffected
        shift = np.maximum(expo[0].real, expo[1].real)
        out = [np.zeros(x.shape, dtype=complex) for _ in range(order + 1)]
        for (w, m, v), g in zip(comps, expo):
            c = w * np.exp(g - shift)
            g1 = 1j * m - v * x
            g2 = -v
            derivs = [c, g1 * c, (g1**2 + g2) * c, (g1**3 + 3 * g1 * g2) * c]
            for k in range(order + 1):
                out[k] = out[k] + derivs[k]
        return out, shift

    def log_cf(self, x, order: int = 0):
        _check_order(order)
        raw, shift = self._raw_cf_derivs(x, order)
        if order == 0:
            return np.log(raw[0]) + shift
        return log_derivative_from_raw(raw[0], lambda block: raw[len(block)], order)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        pick = rng.random(size) < self.p
        z = rng.standard_normal(size)
        return np.where(pick, self.mu + self.sd1 * z, self.mu2 + self.sd2 * z)

    def to_dict(self) -> dict:
        return {"family": self.family, "p": self.p, "mu": self.mu, "sd1": self.sd1, "sd2": self.sd2}


@dataclass(frozen=True)
class CenteredGamma:
    """
    Gamma(shape, |scale|) shifted to mean zero; a negative ``scale`` mirrors
    the distribution so the skew points left.
    """

    shape: float
    scale: float
    family: ClassVar[str] = "gamma"

    def __post_init__(self):
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise FamilyError(f"gamma shape must be > 0, got {self.shape}")
        if not (np.isfinite(self.scale) and self.scale != 0):
            raise FamilyError(f"gamma scale must be finite and nonzero, got {self.scale}")

    @property
    def gaussian(self) -> bool:
        return False

    def cumulant(self, r: int) -> float:
        k, th = self.shape, self.scale
        return {1: 0.0, 2: k * th**2, 3: 2 * k * th**3}[r]

    def log_cf(self, x, order: int = 0):
        _check_order(order)
        x = np.asarray(x, dtype=float)
        k, th = self.shape, self.scale
        z = 1.0 - 1j * th * x
        if order == 0:
            return -k * np.log(z) - 1j * k * th * x
        if order == 1:
            return 1j * k * th / z - 1j * k * th
        if order == 2:
            return -k * th**2 / z**2
        return -2j * k * th**3 / z**3

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k, th = self.shape, self.scale
        return np.sign(th) * (rng.gamma(k, abs(th), size) - k * abs(th))

    def to_dict(self) -> dict:
        return {"family": self.family, "shape": self.shape, "scale": self.scale}


Factor = Union[Gaussian, Mixture, CenteredGamma]

FAMILIES = {cls.family: cls for cls in (Gaussian, Mixture, CenteredGamma)}


def factor_from_dict(d: dict) -> Factor:
    d = dict(d)
    name = d.pop("family", None)
    if name not in FAMILIES:
        raise FamilyError(f"unknown shock family {name!r}; expected one of {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](**d)
    except TypeError as exc:
        raise FamilyError(f"bad parameters for family {name!r}: {exc}") from None
