"""Seeded panel generation from an EDModelSpec."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import EDModelSpec

# Rows are drawn in fixed-size chunks, each from its own stream keyed by
# (seed, chunk index); any chunk can be regenerated alone.
CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Panel:
    """
    ``n x T`` panel of residual log earnings.

    ``v`` (permanent) and ``w`` (transitory) are kept only on request and then
    satisfy ``y == v + w``.
    """

    y: np.ndarray
    v: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2:
            raise ValueError(f"panel must be 2-dimensional, got shape {y.shape}")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    def demeaned(self) -> "Panel":
        """Per-column demeaning (panels are otherwise ingested as residuals)."""
        return Panel(self.y - self.y.mean(axis=0))


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def draw_factors(spec: EDModelSpec, n: int, seed: int, start: int = 0) -> np.ndarray:
    """
    Independent factor draws for observations ``start .. start + n - 1``.

    Output has shape ``(n, n_factors)``. Results for a row do not depend on
    ``start`` or ``n``, only on ``seed`` and the row index.
    """
    factors = spec.factors
    if n == 0:
        return np.empty((0, len(factors)))
    first, last = start // CHUNK, (start + n - 1) // CHUNK
    parts = []
    for c in range(first, last + 1):
        rng = chunk_rng(seed, c)
        parts.append(np.column_stack([f.sample(rng, CHUNK) for f in factors]))
    out = np.concatenate(parts, axis=0)
    off = start - first * CHUNK
    return out[off : off + n]


def draw_shocks(spec: EDModelSpec, n: int, seed: int, start: int = 0) -> np.ndarray:
    """Stacked shock vectors ``theta`` as rows, shape ``(n, q + 2T)``."""
    return draw_factors(spec, n, seed, start) @ spec.factor_map.T


def components_from_shocks(spec: EDModelSpec, theta: np.ndarray):
    """
    Apply the random-walk and MA(q) recursions row by row.

    Returns ``(v, w)``; deliberately avoids the loading matrix so it can be
    used to cross-check it.
    """
    theta = np.atleast_2d(theta)
    n = theta.shape[0]
    T, q, a = spec.T, spec.q, spec.a
    v = np.zeros((n, T))
    w = np.zeros((n, T))
    perm = np.zeros(n)
    for t in range(1, T + 1):
        perm = perm + theta[:, spec.eta_col(t)]
        v[:, t - 1] = perm
        trans = theta[:, spec.xi_col(t)].copy()
        for k in range(1, q + 1):
            trans += a[k - 1] * theta[:, spec.xi_col(t - k)]
        w[:, t - 1] = trans
    return v, w


def generate_panel(
    spec: EDModelSpec, n: int, seed: int, keep_components: bool = False, start: int = 0
) -> Panel:
    """
    Simulate ``n`` observations of the model.

    Parameters
    ----------
    spec : EDModelSpec
    n : int
        Cross-section size, ``>= 1``.
    seed : int
        Base seed. Identical ``(spec, n, seed)`` give bit-identical panels.
    keep_components : bool
        Also return the permanent and transitory components.
    start : int
        Index of the first observation; lets callers generate disjoint row
        ranges independently and concatenate them.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    theta = draw_shocks(spec, n, seed, start)
    # y always comes from the recursions so that it does not depend on
    # keep_components; the loading-matrix path is kept as an independent check
    v, w = components_from_shocks(spec, theta)
    return Panel(v + w, v, w) if keep_components else Panel(v + w)
