"""
Second-derivative identification when eta_1 and xi_1 are independent.

Only xi_1 and eta_1 load on both y_1 and y_{q+1}, so the mixed second
derivative of log phi_Y in (s_1, s_{q+1}) is
``a_q psi''_xi1(s_1 + sum_k a_k s_{k+1}) + psi''_eta1(sum_t s_t)``. At the
point with ``s_1 = c u``, ``s_{j+1} = -u``, ``s_{q+2} = (1 - c) u`` the eta_1
argument vanishes and the xi_1 argument is ``(c - a_j) u``, so

    Cov(y_1, y_{q+1}) + d2/ds_1 ds_{q+1} log phi_Y = a_q (Var xi_1 + psi''_xi1((c - a_j) u)),

which vanishes for every u exactly when ``c = a_j`` (xi_1 nongaussian).
"""

from __future__ import annotations

import numpy as np

from ..cf import CFEngine, IllConditionedPoint
from .common import (
    EstimateResult,
    FLAT_TOL,
    NULL_FACTOR,
    check_u_grid,
    default_u_grid,
    flatness_check,
    grid,
    refine_1d,
)
from .equivalence import PreconditionError


def lemma1_points(candidate: float, j: int, u, q: int, T: int) -> np.ndarray:
    """Evaluation points, one row per entry of ``u``."""
    if q < 1:
        raise PreconditionError("need q >= 1")
    if not 1 <= j <= q:
        raise PreconditionError(f"coefficient index j must be in 1..{q}, got {j}")
    if q + 2 > T:
        raise PreconditionError(f"the evaluation point needs coordinate q + 2 = {q + 2} <= T = {T}")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    S = np.zeros((u.size, T))
    S[:, 0] = candidate * u
    S[:, j] = -u
    S[:, q + 1] = (1.0 - candidate) * u
    return S


def _directions(q: int, T: int):
    eye = np.eye(T)
    return eye[0], eye[q]


def lemma1_moments(engine: CFEngine, candidate: float, j: int, u, q: int, T: int, strict: bool = True) -> np.ndarray:
    """Complex moment values at each ``u`` (NaN at ill-conditioned points unless ``strict``)."""
    if engine.T != T:
        raise ValueError(f"engine has T={engine.T}, expected {T}")
    d1, dq = _directions(q, T)
    cov = -engine.derivatives(np.zeros(T), (d1, dq))[0][0]
    vals, _ = engine.derivatives(lemma1_points(candidate, j, u, q, T), (d1, dq), strict=strict)
    return cov + vals


def lemma1_moment(engine: CFEngine, a_candidate_j: float, j: int, u: float, q: int, T: int) -> float:
    """
    Real part of ``Cov(y_1, y_{q+1}) + d2/ds_1 ds_{q+1} log phi_Y(s)`` at the
    candidate-dependent point; zero for all ``u`` at the true ``a_j``.

    The covariance is taken as minus the same engine's mixed derivative at
    the origin, so the two terms share one estimator.
    """
    return float(lemma1_moments(engine, a_candidate_j, j, u, q, T)[0].real)


def lemma1_criterion(engine: CFEngine, candidate: float, j: int, u_grid, q: int, T: int) -> float:
    """``sum_u |m(u)|^2``; uses both parts of the complex moment."""
    m = lemma1_moments(engine, candidate, j, check_u_grid(u_grid), q, T)
    return float(np.sum(np.abs(m) ** 2))


def lemma1_estimate(
    engine: CFEngine,
    q: int,
    T: int,
    u_grid=None,
    search_interval=(-2.0, 2.0),
    grid_step: float = 0.01,
    xatol: float = 1e-10,
    flat_tol: float = FLAT_TOL,
    null_replications: int = 3,
    null_factor: float = NULL_FACTOR,
    seed: int = 0,
) -> EstimateResult:
    """
    Estimate a_1..a_q one at a time by minimising ``lemma1_criterion`` over
    ``search_interval``: grid scan, then bounded refinement around the best
    grid point.

    A criterion curve that does not separate candidates (see
    :func:`flatness_check`) marks the result unidentified and that
    coefficient's estimate is NaN; the arbitrary argmin is kept in
    ``diagnostics`` only.
    """
    u = check_u_grid(default_u_grid() if u_grid is None else u_grid)
    lo, hi = map(float, search_interval)
    cands = grid(lo, hi, grid_step)
    a_hat = np.empty(q)
    curves, diag = {}, {"u_grid": u, "search_interval": [lo, hi], "per_j": {}}
    identified = True

    def crit(eng, c, j):
        return _total(np.abs(lemma1_moments(eng, c, j, u, q, T, strict=False)) ** 2)

    for j in range(1, q + 1):
        values = _scan(engine, cands, j, u, q, T)
        if not np.any(np.isfinite(values)):
            raise IllConditionedPoint(lemma1_points(cands[0], j, u, q, T)[-1], 0.0, getattr(engine, "eps_cf", 0.0))
        k = int(np.argmin(values))
        x, fx = refine_1d(lambda c: crit(engine, c, j), cands[max(k - 1, 0)], cands[min(k + 1, cands.size - 1)], xatol)
        if fx > values[k]:
            x, fx = float(cands[k]), float(values[k])
        flat = flatness_check(
            engine,
            values,
            lambda eng: _scan(eng, cands, j, u, q, T),
            flat_tol=flat_tol,
            null_replications=null_replications,
            null_factor=null_factor,
            seed=seed + 1000 * j,
        )
        identified &= not flat["flat"]
        flat["scan_argmin"] = x
        flat["ill_conditioned_candidates"] = int(np.sum(~np.isfinite(values)))
        a_hat[j - 1] = np.nan if flat["flat"] else x
        curves[j] = {"candidate": np.append(cands, x), "criterion": np.append(values, fx)}
        diag["per_j"][j] = flat
    return EstimateResult("lemma1", a_hat, curves, bool(identified), diag)


def _scan(engine, cands, j, u, q, T) -> np.ndarray:
    """Criterion at every candidate, batching all (candidate, u) points in one call."""
    pts = np.concatenate([lemma1_points(c, j, u, q, T) for c in cands])
    d1, dq = _directions(q, T)
    cov = -engine.derivatives(np.zeros(T), (d1, dq))[0][0]
    vals, _ = engine.derivatives(pts, (d1, dq), strict=False)
    m = (cov + vals).reshape(cands.size, u.size)
    return _total(np.abs(m) ** 2, axis=1)


def _total(sq, axis=None):
    """Sum of squares; a candidate touching an ill-conditioned point scores inf."""
    out = np.sum(sq, axis=axis)
    return np.where(np.isnan(out), np.inf, out) if axis is not None else (float(out) if np.isfinite(out) else np.inf)
