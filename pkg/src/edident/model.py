"""
Earnings-dynamics model: permanent random walk plus MA(q) transitory part,

    y_t = eta_1 + ... + eta_t + xi_t + a_1 xi_{t-1} + ... + a_q xi_{t-q},

with mutually independent shock blocks xi_{1-q}, ..., xi_0, (eta_1, xi_1),
..., (eta_T, xi_T). Within a pair the two shocks may be arbitrarily dependent.

The stacked shock vector ``theta`` is always ordered as the initial
transitory shocks followed by the (eta_t, xi_t) pairs in time order, so the
loading matrix, the shock covariance and the cumulant tensors share one
column convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .families import Factor, Gaussian

ZERO_TOL = 1e-12


class SpecError(ValueError):
    """Invalid model specification."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShockBlock:
    """
    One independent block of the shock vector.

    A block of dimension ``dim`` (1 for a lone initial transitory shock, 2 for
    an (eta_t, xi_t) pair) is ``loadings @ f`` where ``f`` holds independent
    scalar factors. Pair components are ordered (eta, xi).
    """

    kind: Literal["singleton", "pair"]
    family: str
    factors: tuple
    loadings: np.ndarray

    def __post_init__(self):
        dim = 1 if self.kind == "singleton" else 2
        if self.kind not in ("singleton", "pair"):
            raise SpecError(f"unknown block kind {self.kind!r}")
        B = _frozen(self.loadings)
        if B.shape != (dim, len(self.factors)):
            raise SpecError(
                f"{self.kind} block loadings must have shape ({dim}, {len(self.factors)}), got {B.shape}"
            )
        if not np.all(np.isfinite(B)):
            raise SpecError("block loadings must be finite")
        object.__setattr__(self, "loadings", B)
        object.__setattr__(self, "factors", tuple(self.factors))

    # constructors -----------------------------------------------------------

    @classmethod
    def singleton(cls, factor: Factor) -> "ShockBlock":
        return cls("singleton", factor.family, (factor,), [[1.0]])

    @classmethod
    def independent_pair(cls, eta: Factor, xi: Factor) -> "ShockBlock":
        return cls("pair", "independent", (eta, xi), np.eye(2))

    @classmethod
    def factor_pair(cls, f1: Factor, f2: Factor, loadings) -> "ShockBlock":
        """(eta, xi) = loadings @ (f1, f2) with independent factors f1, f2."""
        return cls("pair", "factor", (f1, f2), loadings)

    @classmethod
    def gaussian_pair(cls, var_eta: float, var_xi: float, cov: float = 0.0) -> "ShockBlock":
        S = np.array([[var_eta, cov], [cov, var_xi]], dtype=float)
        w = np.linalg.eigvalsh(S)
        if not np.all(np.isfinite(S)) or w.min() < -ZERO_TOL * max(1.0, abs(w).max()):
            raise SpecError(f"gaussian pair covariance is not positive semidefinite: {S.tolist()}")
        # Cholesky-style square root that tolerates singular blocks
        if var_eta > 0:
            l11 = np.sqrt(var_eta)
            l21 = cov / l11
            l22 = np.sqrt(max(var_xi - l21**2, 0.0))
            B = np.array([[l11, 0.0], [l21, l22]])
        else:
            vals, vecs = np.linalg.eigh(S)
            B = vecs * np.sqrt(np.clip(vals, 0.0, None))
        return cls("pair", "gaussian", (Gaussian(1.0), Gaussian(1.0)), B)

    # moments ----------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.loadings.shape[0]

    @property
    def second_moment(self) -> np.ndarray:
        k2 = np.array([f.cumulant(2) for f in self.factors])
        return (self.loadings * k2) @ self.loadings.T

    @property
    def third_cumulant(self) -> np.ndarray:
        k3 = np.array([f.cumulant(3) for f in self.factors])
        B = self.loadings
        return np.einsum("k,ik,jk,lk->ijl", k3, B, B, B)

    def component_gaussian(self, i: int) -> bool:
        """Whether component ``i`` of the block is (possibly degenerate) normal."""
        return all(
            f.gaussian or abs(self.loadings[i, k]) == 0.0 for k, f in enumerate(self.factors)
        )

    @property
    def gaussian(self) -> bool:
        return all(f.gaussian or not np.any(self.loadings[:, k]) for k, f in enumerate(self.factors))

    @property
    def independent_components(self) -> bool:
        """For pairs: eta and xi are independent."""
        if self.kind == "singleton":
            return True
        B = self.loadings
        gauss_cross = 0.0
        for k, f in enumerate(self.factors):
            if f.cumulant(2) == 0.0 and f.gaussian:
                continue
            both = B[0, k] != 0.0 and B[1, k] != 0.0
            if f.gaussian:
                gauss_cross += B[0, k] * B[1, k] * f.cumulant(2)
            elif both:
                return False
        return abs(gauss_cross) <= ZERO_TOL

    # characteristic function -------------------------------------------------

    def log_cf(self, x, directions: Sequence = ()) -> np.ndarray:
        """
        Joint log-cf of the block at ``x`` (shape ``(..., dim)``), differentiated
        along each vector in ``directions``. Directions have shape ``(dim,)``
        or broadcast against ``x``.
        """
        x = np.asarray(x, dtype=float)
        order = len(directions)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for k, f in enumerate(self.factors):
            b = self.loadings[:, k]
            coef = 1.0
            for d in directions:
                coef = coef * (np.asarray(d, dtype=float) @ b)
            if order > 0 and not np.any(coef):
                continue
            out = out + coef * f.log_cf(x @ b, order)
        return out

    def to_dict(self) -> dict:
        if self.kind == "singleton":
            return self.factors[0].to_dict()
        if self.family == "gaussian":
            S = self.second_moment
            return {"kind": "gaussian", "var_eta": S[0, 0], "var_xi": S[1, 1], "cov": S[0, 1]}
        if self.family == "independent":
            return {"kind": "independent", "eta": self.factors[0].to_dict(), "xi": self.factors[1].to_dict()}
        return {
            "kind": "factor",
            "factors": [f.to_dict() for f in self.factors],
            "loadings": self.loadings.tolist(),
        }


@dataclass(frozen=True, eq=False)
class EDModelSpec:
    """
    Coefficients, horizon and full shock distribution of the model.

    ``blocks`` holds the ``q`` singleton blocks for xi_{1-q}, ..., xi_0
    followed by the ``T`` pair blocks (eta_t, xi_t). ``a`` excludes the
    unit contemporaneous loading.
    """

    T: int
    q: int
    a: tuple
    blocks: tuple
    _factor_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T, q = self.T, self.q
        if int(T) != T or T < 1:
            raise SpecError(f"T must be a positive integer, got {T}")
        if int(q) != q or q < 0 or q >= T:
            raise SpecError(f"q must satisfy 0 <= q < T, got q={q}, T={T}")
        a = tuple(float(x) for x in self.a)
        if len(a) != q:
            raise SpecError(f"expected {q} MA coefficients, got {len(a)}")
        if not all(np.isfinite(a)):
            raise SpecError("MA coefficients must be finite")
        blocks = tuple(self.blocks)
        if len(blocks) != q + T:
            raise SpecError(f"expected q + T = {q + T} shock blocks, got {len(blocks)}")
        for i, b in enumerate(blocks):
            want = "singleton" if i < q else "pair"
            if b.kind != want:
                raise SpecError(f"block {i} must be a {want} block, got {b.kind}")
        object.__setattr__(self, "T", int(T))
        object.__setattr__(self, "q", int(q))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "blocks", blocks)

        # theta = F @ f with f the stacked independent factors
        n_f = sum(len(b.factors) for b in blocks)
        F = np.zeros((q + 2 * T, n_f))
        row = col = 0
        for b in blocks:
            F[row : row + b.dim, col : col + len(b.factors)] = b.loadings
            row += b.dim
            col += len(b.factors)
        object.__setattr__(self, "_factor_map", _frozen(F))

    @classmethod
    def uniform(cls, T: int, a: Sequence[float], initial: Factor, pair: ShockBlock) -> "EDModelSpec":
        """Same initial-shock family for every xi_{1-q..0} and the same pair every period."""
        q = len(a)
        return cls(T, q, tuple(a), (ShockBlock.singleton(initial),) * q + (pair,) * T)

    @property
    def coefficients(self) -> np.ndarray:
        """(a_0, a_1, ..., a_q) with a_0 = 1."""
        return np.array((1.0,) + self.a)

    @property
    def n_shocks(self) -> int:
        return self.q + 2 * self.T

    @property
    def factors(self) -> list:
        return [f for b in self.blocks for f in b.factors]

    @property
    def factor_map(self) -> np.ndarray:
        return self._factor_map

    def pair(self, t: int) -> ShockBlock:
        """The (eta_t, xi_t) block, ``t`` in 1..T."""
        return self.blocks[self.q + t - 1]

    def eta_col(self, t: int) -> int:
        return self.q + 2 * (t - 1)

    def xi_col(self, t: int) -> int:
        """Column of xi_t in theta, ``t`` in 1-q..T."""
        return t + self.q - 1 if t <= 0 else self.q + 2 * (t - 1) + 1

    def shock_labels(self) -> list:
        return shock_labels(self.T, self.q)

    def shock_covariance(self) -> np.ndarray:
        F = self.factor_map
        k2 = np.array([f.cumulant(2) for f in self.factors])
        return (F * k2) @ F.T

    @property
    def gaussian(self) -> bool:
        return all(b.gaussian for b in self.blocks)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "q": self.q,
            "a": list(self.a),
            "initial": [b.to_dict() for b in self.blocks[: self.q]],
            "pairs": [b.to_dict() for b in self.blocks[self.q :]],
        }


@dataclass(frozen=True, eq=False)
class LoadingMatrix:
    """``y = A @ theta``; ``A`` is T x (q + 2T)."""

    A: np.ndarray
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "labels", tuple(self.labels))


def shock_labels(T: int, q: int) -> list:
    labels = [f"xi[{t}]" for t in range(1 - q, 1)]
    for t in range(1, T + 1):
        labels += [f"eta[{t}]", f"xi[{t}]"]
    return labels


def loading_matrix(T: int, q: int, a: Sequence[float]) -> np.ndarray:
    """Raw ``T x (q + 2T)`` loading matrix for horizon ``T`` and MA coefficients ``a``."""
    c = (1.0,) + tuple(a)
    A = np.zeros((T, q + 2 * T))
    for t in range(1, T + 1):
        for tau in range(t - q, t + 1):
            col = tau + q - 1 if tau <= 0 else q + 2 * (tau - 1) + 1
            A[t - 1, col] = c[t - tau]
        for tau in range(1, t + 1):
            A[t - 1, q + 2 * (tau - 1)] = 1.0
    return A


def build_loading_matrix(spec: EDModelSpec) -> LoadingMatrix:
    """
    Loading matrix of the observables on the stacked shocks.

    Row t carries ``a_{t-tau}`` in the xi_tau column when ``0 <= t - tau <= q``
    and a one in every eta_tau column with ``tau <= t``.
    """
    return LoadingMatrix(loading_matrix(spec.T, spec.q, spec.a), shock_labels(spec.T, spec.q))


def factor_loadings(spec: EDModelSpec) -> np.ndarray:
    """``y = L @ f`` with independent factors ``f``; ``L`` is T x n_factors."""
    return build_loading_matrix(spec).A @ spec.factor_map


# identification preconditions -------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class IdentificationReport:
    """Which assumptions of an identification result hold for a spec."""

    theorem: str
    checks: list
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "ok": self.ok,
            "checks": [vars(c) for c in self.checks],
            "notes": list(self.notes),
        }


def _excl(name, val, banned):
    bad = [b for b in banned if abs(val - b) <= ZERO_TOL]
    return Check(f"{name} not in {set(banned)}", not bad, f"{name}={val:g}")


def validate_identification_preconditions(spec: EDModelSpec, theorem: str) -> IdentificationReport:
    """
    Report which assumptions of an identification result hold.

    Parameters
    ----------
    theorem : {"T1", "T2", "L1"}
        ``T1``: third-derivative identification under dependent pairs;
        ``T2``: Gaussian non-identification for q = 1;
        ``L1``: second-derivative identification with independent (eta_1, xi_1).
    """
    T, q, a = spec.T, spec.q, spec.a
    checks, notes = [], []
    xi1_nongauss = not spec.pair(1).component_gaussian(1)
    if theorem == "T1":
        checks.append(Check("q >= 1", q >= 1, f"q={q}"))
        checks.append(Check("q + 3 <= T", q + 3 <= T, f"q={q}, T={T}"))
        if q >= 1:
            checks.append(_excl("a_1", a[0], (0.0, 1.0)))
            checks.append(_excl("a_q", a[-1], (0.0, 1.0)))
            for j in range(2, q):
                if any(abs(a[j - 1] - b) <= ZERO_TOL for b in (0.0, 1.0)):
                    notes.append(f"interior coefficient a_{j}={a[j - 1]:g} lies in {{0, 1}}; identification is not guaranteed there")
        checks.append(Check("xi_1 nongaussian", xi1_nongauss))
        if q >= 2 and not all(b.gaussian for b in spec.blocks[1:q]):
            notes.append(
                "initial shocks xi_{2-q}..xi_0 are nongaussian; they enter the (e2, e2, e1) and "
                "(e2, v, v) probes, so the flatness criterion is not exactly zero at the truth"
            )
    elif theorem == "T2":
        checks.append(Check("q == 1", q == 1, f"q={q}"))
        if q == 1:
            checks.append(Check("a_1 != 0", abs(a[0]) > ZERO_TOL, f"a_1={a[0]:g}"))
        checks.append(Check("shocks jointly normal", spec.gaussian))
        pd = all(np.linalg.eigvalsh(b.second_moment).min() > ZERO_TOL for b in spec.blocks)
        checks.append(Check("shock covariance positive definite", pd))
    elif theorem == "L1":
        checks.append(Check("q >= 1", q >= 1, f"q={q}"))
        checks.append(Check("q + 1 <= T", q + 1 <= T, f"q={q}, T={T}"))
        if q >= 1:
            checks.append(Check("a_q != 0", abs(a[-1]) > ZERO_TOL, f"a_q={a[-1]:g}"))
        checks.append(Check("xi_1 nongaussian", xi1_nongauss))
        checks.append(Check("eta_1 and xi_1 independent", spec.pair(1).independent_components))
        if q + 2 > T:
            notes.append(
                f"the moment's evaluation point uses coordinate q + 2 = {q + 2} > T; "
                "lemma1_moment needs T >= q + 2"
            )
    else:
        raise ValueError(f"theorem must be one of 'T1', 'T2', 'L1', got {theorem!r}")
    return IdentificationReport(theorem, checks, notes)
