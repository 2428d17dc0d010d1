"""
Third-derivative identification with dependent contemporaneous shocks.

For a candidate coefficient vector ``c`` and coefficient index ``j`` the
procedure evaluates third directional derivatives ("probes") of log phi_Y at
points where the eta_1 argument of the (eta_1, xi_1) block vanishes and its
xi_1 argument equals ``(c_j - a_j) u``:

* probes 1-3 at ``s*(u)``: ``s_1 = c_j u``, ``s_{j+1} = -u``,
  ``s_{q+3} = (1 - c_j) u``, along (e2, e2, e1), (e_{q+2}, e1, e1),
  (e_{q+2}, e_{q+2}, e1);
* probe 4 (j = 1) and probe 5 (j > 1) along (e2, v, v) with
  ``v = -c_q e2 + e_{q+2} + (c_q - 1) e_{q+3}``; probe 4 at
  ``s_1 = c_1 u``, ``s_2 = -u``, ``s_{q+2} = u / c_q``,
  ``s_{q+3} = -c_1 u + (c_q - 1) u / c_q``, probe 5 at ``s*(u)``.

At the truth the four used probes equal fixed combinations of the block's
third partials at the origin, collected by the matrix ``M(c_1)`` (rows
(1, 1+2c, c^2+2c, c^2), (1, 2, 1, 0), (1, 1, 0, 0), (0, 0, 1, c)). Solving
``M x = probes`` recovers the partials; the last one, ``D_j(u)``, is constant
in u at the truth. Away from the truth it moves with u unless xi_1 is normal,
so the spread of ``D_j`` over a u grid is the identification criterion.

The direction ``v`` is the candidate-only limit of the two substitution
directions used in the identification argument (which also depend on the
unknown a_q); the probe-4/5 value is divided by ``(c_q c_1)^2`` so that the
recovered vector equals the true partials at the truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ..cf import CFEngine
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

DET_TOL = 1e-8
DIR_TOL = 1e-8


class SingularProbeSystem(ArithmeticError):
    """det M(c_1) is numerically zero (c_1 near 0 or 1)."""


class DegenerateDirection(ArithmeticError):
    """A substitution direction degenerates (c_q near 0 or 1, or c_1 near 0)."""


def probe_matrix(a1: float) -> np.ndarray:
    return np.array(
        [
            [1.0, 1 + 2 * a1, a1**2 + 2 * a1, a1**2],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, a1],
        ]
    )


def probe_det(a1: float) -> float:
    """Closed form of det M(a1)."""
    return a1**2 * (1 - a1)


@dataclass
class ProbeSystem:
    """
    Probe values and recovered partials for one candidate and index ``j``.

    Arrays are indexed by the u grid first. ``probes[:, k]`` holds probe
    ``k + 1``; the probe not used for this ``j`` (5 when j = 1, else 4) is NaN.
    ``recovered`` columns are the third partials of the (eta_1, xi_1) log-cf
    in the order d1^3, d1^2 d2, d1 d2^2, d2^3 (1 = eta, 2 = xi).
    """

    candidate: np.ndarray
    j: int
    u_grid: np.ndarray
    M: np.ndarray
    probes: np.ndarray
    C: np.ndarray
    recovered: np.ndarray
    reliability: np.ndarray = field(default=None)

    @property
    def D(self) -> np.ndarray:
        return self.recovered[:, 3]


def _validate(cand, q, T):
    c = np.atleast_1d(np.asarray(cand, dtype=float))
    if q < 1:
        raise PreconditionError("need q >= 1")
    if c.shape[-1] != q:
        raise PreconditionError(f"candidate must have {q} entries, got {c.shape[-1]}")
    if q + 3 > T:
        raise PreconditionError(f"probes need q + 3 <= T, got q={q}, T={T}")
    return c


def _check_candidate(c):
    if abs(probe_det(c[0])) < DET_TOL:
        raise SingularProbeSystem(f"det M({c[0]:g}) = {probe_det(c[0]):.3g} is numerically zero")
    cq = c[-1]
    if abs(cq) < DIR_TOL or abs(1 - cq) < DIR_TOL:
        raise DegenerateDirection(f"candidate a_q = {cq:g} makes the substitution directions degenerate")
    if abs(c[0]) < DIR_TOL:
        raise DegenerateDirection("candidate a_1 = 0 annihilates the xi_1 loading of the v direction")


def _points(cands, j, u, q, T):
    """Star points and probe-4 points, shape (K, nu, T) each."""
    K, nu = cands.shape[0], u.size
    cj = cands[:, j - 1][:, None]
    c1 = cands[:, 0][:, None]
    cq = cands[:, -1][:, None]
    star = np.zeros((K, nu, T))
    star[:, :, 0] = cj * u
    star[:, :, j] -= u
    star[:, :, q + 2] = (1 - cj) * u
    p4 = np.zeros((K, nu, T))
    p4[:, :, 0] = c1 * u
    p4[:, :, 1] = -u
    p4[:, :, q + 1] = u / cq
    p4[:, :, q + 2] = -c1 * u + (cq - 1) * u / cq
    return star, p4


def _recover(engine: CFEngine, cands, j, u, q, T, strict=True):
    """Batched probes for K candidates: returns probes (K, nu, 5), C, X (K, nu, 4), modulus."""
    K, nu = cands.shape[0], u.size
    eye = np.eye(T)
    e1, e2, eq2 = eye[0], eye[1], eye[q + 1]
    cq = cands[:, -1]
    v = -cq[:, None] * e2 + eq2 + (cq - 1)[:, None] * eye[q + 2]  # (K, T)
    v = np.repeat(v, nu, axis=0)
    star, p4 = _points(cands, j, u, q, T)
    star = star.reshape(K * nu, T)
    probes = np.full((K * nu, 5), np.nan + 0j)
    mods = []
    for k, dirs in enumerate([(e2, e2, e1), (eq2, e1, e1), (eq2, eq2, e1)]):
        probes[:, k], m = engine.derivatives(star, dirs, strict=strict)
        mods.append(m)
    if j == 1:
        probes[:, 3], m = engine.derivatives(p4.reshape(K * nu, T), (e2, v, v), strict=strict)
    else:
        probes[:, 4], m = engine.derivatives(star, (e2, v, v), strict=strict)
    mods.append(m)
    probes = probes.reshape(K, nu, 5)
    norm = (cands[:, -1] * cands[:, 0]) ** 2
    last = probes[:, :, 3] if j == 1 else probes[:, :, 4]
    C = np.stack([probes[:, :, 0], probes[:, :, 1], probes[:, :, 2], last / norm[:, None]], axis=-1)
    M = np.stack([probe_matrix(c) for c in cands[:, 0]])  # (K, 4, 4)
    X = np.linalg.solve(M[:, None, :, :], np.nan_to_num(C, nan=0.0)[..., None])[..., 0]
    X[np.isnan(C).any(axis=-1)] = np.nan
    modulus = np.min(np.stack(mods), axis=0).reshape(K, nu)
    return probes, C, X, modulus


def theorem1_probes(engine: CFEngine, a_candidate, j: int, u, q: int, T: int) -> ProbeSystem:
    """
    Probe values, system matrix and recovered partials at each ``u``.

    Raises
    ------
    SingularProbeSystem
        ``|det M(c_1)| < 1e-8``.
    DegenerateDirection
        ``c_q`` near 0 or 1, or ``c_1`` near 0.
    """
    c = _validate(a_candidate, q, T)
    if not 1 <= j <= q:
        raise PreconditionError(f"coefficient index j must be in 1..{q}, got {j}")
    _check_candidate(c)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    probes, C, X, mod = _recover(engine, c[None, :], j, u, q, T)
    return ProbeSystem(c, j, u, probe_matrix(c[0]), probes[0], C[0], X[0], mod[0])


def _spread(D, part):
    if part == "real":
        D = D.real
    return np.mean(np.abs(D - D.mean(axis=-1, keepdims=True)) ** 2, axis=-1)


def theorem1_curves(engine: CFEngine, a_candidate, u_grid, q: int, T: int) -> dict:
    """``{j: D_j(u)}`` over the u grid for one candidate."""
    c = _validate(a_candidate, q, T)
    _check_candidate(c)
    u = check_u_grid(u_grid)
    return {j: _recover(engine, c[None, :], j, u, q, T)[2][0, :, 3] for j in range(1, q + 1)}


def theorem1_criterion(engine: CFEngine, a_candidate, u_grid, q: int, T: int, part: str = "both") -> float:
    """
    Sum over j of the spread of ``D_j(u)`` over the u grid.

    ``part="both"`` uses the complex spread ``mean |D - mean D|^2`` (real and
    imaginary parts); ``part="real"`` uses real parts only. Nonnegative and
    zero at the truth on the analytic backend.
    """
    curves = theorem1_curves(engine, a_candidate, u_grid, q, T)
    return float(sum(_spread(D, part) for D in curves.values()))


def criterion_batch(engine: CFEngine, cands, u_grid, q: int, T: int, part: str = "both") -> np.ndarray:
    """
    Criterion for each row of ``cands``. Infeasible candidates, and
    candidates whose probes hit an ill-conditioned cf point, give ``inf``.
    """
    cands = _validate(np.atleast_2d(cands), q, T)
    u = check_u_grid(u_grid)
    ok = np.array([_feasible(c) for c in cands])
    out = np.full(cands.shape[0], np.inf)
    if ok.any():
        total = 0.0
        for j in range(1, q + 1):
            X = _recover(engine, cands[ok], j, u, q, T, strict=False)[2]
            total = total + _spread(X[:, :, 3], part)
        out[ok] = np.where(np.isnan(total), np.inf, total)
    return out


def _feasible(c) -> bool:
    try:
        _check_candidate(c)
    except ArithmeticError:
        return False
    return True


def theorem1_estimate(
    engine: CFEngine,
    q: int,
    T: int,
    u_grid=None,
    search_box=None,
    grid_step: float = 0.01,
    xatol: float = 1e-9,
    part: str = "both",
    flat_tol: float = FLAT_TOL,
    null_replications: int = 3,
    null_factor: float = NULL_FACTOR,
    max_sweeps: int = 20,
    seed: int = 0,
) -> EstimateResult:
    """
    Minimise :func:`theorem1_criterion` over a candidate box.

    For q <= 2 the full grid over ``search_box`` is scanned and kept as the
    criterion surface; for larger q each coordinate is scanned in turn
    (three passes). The
    best grid point is then refined by coordinate descent (bounded 1-d
    searches within one grid step). Infeasible candidates (singular system or
    degenerate directions) are skipped and counted.

    ``search_box`` is a sequence of ``(lo, hi)`` pairs, one per coefficient
    (or a single pair used for all); default ``(-2, 2)``.
    """
    u = check_u_grid(default_u_grid() if u_grid is None else u_grid)
    box = _box(search_box, q)
    axes = [grid(lo, hi, grid_step) for lo, hi in box]
    diag = {"u_grid": u, "search_box": box, "grid_step": grid_step, "part": part}

    def crit(eng, cs):
        return criterion_batch(eng, cs, u, q, T, part)

    if q <= 2:
        cands = np.array(list(product(*axes)))

        def scan(eng):
            return crit(eng, cands)

        values = scan(engine)
    else:
        cands, values = _coordinate_scan(lambda cs: crit(engine, cs), axes)

        def scan(eng):
            return crit(eng, cands)

    diag["infeasible"] = int(np.sum(~np.isfinite(values)))
    if not np.any(np.isfinite(values)):
        raise SingularProbeSystem("no feasible candidate in the search box")
    k = int(np.nanargmin(values))
    x, fx = cands[k].copy(), float(values[k])
    extra_c, extra_v = [], []
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(q):
            lo, hi = max(box[i][0], x[i] - grid_step), min(box[i][1], x[i] + grid_step)

            def f1(t, i=i):
                z = x.copy()
                z[i] = t
                return float(crit(engine, z[None])[0])

            t, ft = refine_1d(f1, lo, hi, xatol)
            if ft < fx:
                moved = max(moved, abs(t - x[i]))
                x[i], fx = t, ft
                extra_c.append(x.copy())
                extra_v.append(fx)
        if moved <= xatol:
            break
    flat = flatness_check(engine, values, scan, flat_tol, null_replications, null_factor, seed=seed)
    flat["scan_argmin"] = x.copy()
    diag.update(flat)
    all_c = np.vstack([cands] + ([np.array(extra_c)] if extra_c else []))
    all_v = np.concatenate([values, np.array(extra_v)])
    a_hat = np.full(q, np.nan) if flat["flat"] else x
    return EstimateResult(
        "theorem1", a_hat, {"joint": {"candidate": all_c, "criterion": all_v}}, not flat["flat"], diag
    )


def _box(search_box, q):
    if search_box is None:
        return [(-2.0, 2.0)] * q
    sb = np.asarray(search_box, dtype=float)
    if sb.shape == (2,):
        return [tuple(sb)] * q
    if sb.shape != (q, 2):
        raise ValueError(f"search_box must be (lo, hi) or {q} such pairs")
    return [tuple(r) for r in sb]


def _coordinate_scan(crit, axes, passes: int = 3):
    """
    Repeated per-coordinate grid scans, starting from the grid point nearest
    the box centre that avoids the singular values 0 and 1.
    """
    x = np.empty(len(axes))
    for i, ax in enumerate(axes):
        ok = ax[(np.abs(ax) > 1e-6) & (np.abs(ax - 1) > 1e-6)]
        ok = ok if ok.size else ax
        x[i] = ok[np.argmin(np.abs(ok - 0.5 * (ax[0] + ax[-1])))]
    seen_c, seen_v = [], []
    for _ in range(passes):
        for i, ax in enumerate(axes):
            cs = np.repeat(x[None], ax.size, axis=0)
            cs[:, i] = ax
            vals = crit(cs)
            seen_c.append(cs)
            seen_v.append(vals)
            if np.any(np.isfinite(vals)):
                x = cs[int(np.nanargmin(vals))]
    return np.vstack(seen_c), np.concatenate(seen_v)
