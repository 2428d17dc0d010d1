"""
Observationally equivalent Gaussian models for q = 1.

With jointly normal shocks the panel distribution is pinned down by its
covariance, which is linear in the shock variances and covariances once the
MA coefficient is fixed. For a nonzero candidate coefficient the linear
system has full row rank (except at 1 when T >= 3), so a tilde
parameterization reproducing the true covariance exists; it is a valid model
whenever its shock blocks stay positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import EDModelSpec, ShockBlock
from ..moments import implied_covariance
from ..families import Gaussian

PD_TOL = 1e-12


class PreconditionError(ValueError):
    """An identification routine was called outside its assumptions."""


@dataclass(frozen=True, eq=False)
class GaussianParamsQ1:
    """
    Second-moment parameters of the q = 1 model.

    ``var_eta``, ``var_xi``, ``cov`` hold one entry per period t = 1..T.
    """

    a1: float
    var_xi0: float
    var_eta: np.ndarray
    var_xi: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        for name in ("var_eta", "var_xi", "cov"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.var_eta.size == self.var_xi.size == self.cov.size >= 1):
            raise ValueError("var_eta, var_xi and cov must have the same length T >= 1")

    q = 1

    @property
    def T(self) -> int:
        return self.var_eta.size

    @property
    def a(self) -> tuple:
        return (float(self.a1),)

    @classmethod
    def from_spec(cls, spec: EDModelSpec) -> "GaussianParamsQ1":
        """Second moments of a q = 1 spec (any shock families)."""
        if spec.q != 1:
            raise PreconditionError(f"need q = 1, got q = {spec.q}")
        S = [spec.pair(t).second_moment for t in range(1, spec.T + 1)]
        return cls(
            spec.a[0],
            float(spec.blocks[0].second_moment[0, 0]),
            [s[0, 0] for s in S],
            [s[1, 1] for s in S],
            [s[0, 1] for s in S],
        )

    @classmethod
    def from_vector(cls, a1: float, p) -> "GaussianParamsQ1":
        p = np.asarray(p, dtype=float)
        blocks = p[1:].reshape(-1, 3)
        return cls(a1, p[0], blocks[:, 0], blocks[:, 2], blocks[:, 1])

    def to_vector(self) -> np.ndarray:
        """Unknowns in the order (var_xi0, then per t: var_eta_t, cov_t, var_xi_t)."""
        per_t = np.column_stack([self.var_eta, self.cov, self.var_xi]).reshape(-1)
        return np.concatenate([[self.var_xi0], per_t])

    def block_matrices(self) -> list:
        return [np.array([[e, c], [c, x]]) for e, c, x in zip(self.var_eta, self.cov, self.var_xi)]

    def shock_covariance(self) -> np.ndarray:
        S = np.zeros((1 + 2 * self.T,) * 2)
        S[0, 0] = self.var_xi0
        for t, B in enumerate(self.block_matrices()):
            S[1 + 2 * t : 3 + 2 * t, 1 + 2 * t : 3 + 2 * t] = B
        return S

    def failing_blocks(self) -> list:
        """Indices of non positive-definite blocks; 0 is xi_0, t >= 1 the pairs."""
        bad = [] if self.var_xi0 > PD_TOL else [0]
        for t, B in enumerate(self.block_matrices(), start=1):
            if np.linalg.eigvalsh(B).min() <= PD_TOL:
                bad.append(t)
        return bad

    def to_spec(self) -> EDModelSpec:
        """Gaussian model with these moments; blocks must be positive semidefinite."""
        blocks = [ShockBlock.singleton(Gaussian(self.var_xi0))]
        for B in self.block_matrices():
            blocks.append(ShockBlock.gaussian_pair(B[0, 0], B[1, 1], B[0, 1]))
        return EDModelSpec(self.T, 1, self.a, tuple(blocks))

    def to_dict(self) -> dict:
        return {
            "a1": float(self.a1),
            "var_xi0": float(self.var_xi0),
            "var_eta": self.var_eta.tolist(),
            "var_xi": self.var_xi.tolist(),
            "cov": self.cov.tolist(),
        }


@dataclass
class EquivalenceResult:
    truth: GaussianParamsQ1
    tilde: GaussianParamsQ1
    residual: float
    pd_ok: bool
    failing_blocks: list = field(default_factory=list)
    rank: int = 0
    n_equations: int = 0

    @property
    def solved(self) -> bool:
        """The candidate system had full row rank (fails only at a1 = 1 for T >= 3)."""
        return self.rank == self.n_equations

    def to_dict(self) -> dict:
        return {
            "truth": self.truth.to_dict(),
            "tilde": self.tilde.to_dict(),
            "residual": self.residual,
            "pd_ok": self.pd_ok,
            "failing_blocks": list(self.failing_blocks),
            "solved": self.solved,
            "rank": self.rank,
            "n_equations": self.n_equations,
        }


def covariance_system(a1: float, T: int):
    """
    Linear map from the unknowns (see :meth:`GaussianParamsQ1.to_vector`) to
    the distinct second moments of y for coefficient ``a1``.

    Rows are Var(y_t), Cov(y_t, y_{t+1}) and Cov(y_t, y_{t+j}) for j >= 2
    (the latter does not depend on j), for t = 1..T.

    Returns
    -------
    M : ndarray, shape (n_rows, 1 + 3T)
    rows : list of (t, lag) with lag 2 standing for every j >= 2
    """

    def eta(t):
        return 1 + 3 * (t - 1)

    def cov(t):
        return 2 + 3 * (t - 1)

    def xi(t):
        return 0 if t == 0 else 3 + 3 * (t - 1)

    rows, labels = [], []
    for t in range(1, T + 1):
        for lag in (0, 1, 2):
            if t + lag > T:
                continue
            r = np.zeros(1 + 3 * T)
            r[[eta(s) for s in range(1, t + 1)]] = 1.0
            if lag == 0:
                r[xi(t - 1)] += a1**2
                r[xi(t)] += 1.0
                if t > 1:
                    r[cov(t - 1)] += 2 * a1
                r[cov(t)] += 2.0
            elif lag == 1:
                r[xi(t)] += a1
                if t > 1:
                    r[cov(t - 1)] += a1
                r[cov(t)] += 1 + a1
            else:
                if t > 1:
                    r[cov(t - 1)] += a1
                r[cov(t)] += 1.0
            rows.append(r)
            labels.append((t, lag))
    return np.array(rows), labels


def theorem2_equivalent_model(truth: GaussianParamsQ1, candidate_a1: float, T: int = None) -> EquivalenceResult:
    """
    Gaussian parameterization with MA coefficient ``candidate_a1`` whose
    implied covariance equals the truth's.

    Among all solutions of the (underdetermined, full row rank) covariance
    system the one closest to the true shock moments in Euclidean norm is
    returned. The reported residual is recomputed from the implied
    covariance of the tilde model. Blocks that are not positive definite are
    listed in ``failing_blocks`` rather than raised: small coefficient changes
    are guaranteed to stay valid, large ones are not.
    """
    if T is not None and T != truth.T:
        raise PreconditionError(f"T={T} does not match the truth parameters (T={truth.T})")
    if abs(candidate_a1) <= PD_TOL:
        raise PreconditionError("candidate a1 must be nonzero")
    if truth.failing_blocks():
        raise PreconditionError(f"truth shock blocks {truth.failing_blocks()} are not positive definite")
    target_M, labels = covariance_system(truth.a1, truth.T)
    p = truth.to_vector()
    observed = target_M @ p
    M, _ = covariance_system(candidate_a1, truth.T)
    rank = int(np.linalg.matrix_rank(M))
    delta, *_ = np.linalg.lstsq(M, observed - M @ p, rcond=None)
    tilde = GaussianParamsQ1.from_vector(candidate_a1, p + delta)
    residual = float(np.max(np.abs(implied_covariance(tilde).C - implied_covariance(truth).C)))
    bad = tilde.failing_blocks()
    return EquivalenceResult(truth, tilde, residual, not bad, bad, rank, len(labels))
