"""Shared pieces of the coefficient estimators: results, grids, flatness checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..cf import AnalyticCF, CFEngine, EmpiricalCF

FLAT_TOL = 1e-12
NULL_FACTOR = 3.0


def default_u_grid(half_width: float = 2.0, points: int = 21) -> np.ndarray:
    """Symmetric grid on [-half_width, half_width] with the origin dropped."""
    u = np.linspace(-half_width, half_width, points)
    return u[np.abs(u) > 1e-12]


def check_u_grid(u_grid) -> np.ndarray:
    u = np.asarray(u_grid, dtype=float).reshape(-1)
    if u.size < 2:
        raise ValueError("u_grid needs at least two points")
    if np.any(u == 0):
        raise ValueError("u_grid must exclude 0")
    return u


@dataclass
class EstimateResult:
    """
    Output of a coefficient estimator.

    ``criterion_curve`` maps a coefficient index ``j`` (per-coefficient methods, one curve
    per coefficient) or ``"joint"`` (joint search) to a dict with
    ``candidate`` (array, one row per evaluated candidate) and ``criterion``.
    ``a_hat`` is always one of the evaluated candidates.
    """

    method: str
    a_hat: np.ndarray
    criterion_curve: dict
    identified: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        curves = {}
        for key, c in self.criterion_curve.items():
            curves[str(key)] = {
                "candidate": np.asarray(c["candidate"]).tolist(),
                "criterion": np.asarray(c["criterion"]).tolist(),
            }
        return {
            "method": self.method,
            "a_hat": np.asarray(self.a_hat).tolist(),
            "identified": self.identified,
            "criterion_curve": curves,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    return obj


def depth(values) -> float:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return float(v.max() - v.min()) if v.size else 0.0


def robust_depth(values) -> float:
    """Median minus minimum of the finite values; insensitive to blow-ups near singular candidates."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return float(np.median(v) - v.min()) if v.size else 0.0


def gaussian_surrogate(engine: EmpiricalCF, seed: int) -> EmpiricalCF:
    """Gaussian panel with the same size and sample covariance as ``engine``'s data."""
    rng = np.random.default_rng(seed)
    C = np.cov(engine.y, rowvar=False).reshape(engine.T, engine.T)
    z = rng.multivariate_normal(np.zeros(engine.T), C, size=engine.n, method="eigh")
    return EmpiricalCF(z, eps_cf=engine.eps_cf, max_block=engine.max_block)


def flatness_check(
    engine: CFEngine,
    values,
    scan: Callable[[CFEngine], np.ndarray],
    flat_tol: float = FLAT_TOL,
    null_replications: int = 3,
    null_factor: float = NULL_FACTOR,
    seed: int = 0,
) -> dict:
    """
    Decide whether a criterion curve separates candidates at all.

    A curve whose range is within ``flat_tol`` is flat (the only test on
    the analytic backend). On data, the median-minus-minimum depth of the
    curve is compared with the depths that Gaussian surrogate panels of the
    same size and covariance produce under the same scan
    (``scan(engine) -> values``). Second moments alone cannot identify the
    coefficients, so a data curve no deeper than ``null_factor`` times the
    deepest surrogate curve is reported as unidentified.
    """
    d = depth(values)
    out = {"depth": d, "flat_tol": flat_tol}
    if d <= flat_tol:
        out.update(flat=True, reason="criterion range within numerical floor")
        return out
    if isinstance(engine, AnalyticCF) or null_replications <= 0:
        out["flat"] = False
        return out
    rd = robust_depth(values)
    null = [robust_depth(scan(gaussian_surrogate(engine, seed + r))) for r in range(null_replications)]
    out.update(robust_depth=rd, null_depths=null, null_factor=null_factor, flat=bool(rd <= null_factor * max(null)))
    if out["flat"]:
        out["reason"] = "criterion range not larger than under Gaussian surrogates"
    return out


def refine_1d(fun: Callable[[float], float], lo: float, hi: float, xatol: float = 1e-10):
    """Bounded scalar minimisation; returns (x, f(x))."""
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(res.x), float(res.fun)


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)
