"""Model-implied and sample second moments and third cumulants of y."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EDModelSpec, build_loading_matrix, loading_matrix
from .simulate import Panel


@dataclass(frozen=True, eq=False)
class CovarianceStructure:
    """Symmetric T x T covariance of the observables."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"covariance must be square, got {C.shape}")
        object.__setattr__(self, "C", C)

    @property
    def T(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class ThirdCumulantTensor:
    """Fully symmetric T x T x T tensor of joint third cumulants."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 3 or len(set(K.shape)) != 1:
            raise ValueError(f"third cumulant tensor must be T x T x T, got {K.shape}")
        object.__setattr__(self, "K", K)

    @property
    def T(self) -> int:
        return self.K.shape[0]

    def flat(self) -> np.ndarray:
        """r-major flattening: index ``(r, s, t)`` maps to ``r*T*T + s*T + t``."""
        return self.K.reshape(-1)


def _panel_array(panel) -> np.ndarray:
    return panel.y if isinstance(panel, Panel) else np.asarray(panel, dtype=float)


def implied_covariance(spec) -> CovarianceStructure:
    """
    ``A Sigma_theta A'`` with block-diagonal shock covariance.

    Accepts an :class:`EDModelSpec` or any object with ``T``, ``q``, ``a``
    and ``shock_covariance()`` (e.g. Gaussian parameter sets that need not be
    positive definite).
    """
    A = loading_matrix(spec.T, spec.q, spec.a)
    C = A @ spec.shock_covariance() @ A.T
    return CovarianceStructure(0.5 * (C + C.T))


def implied_third_cumulants(spec: EDModelSpec) -> ThirdCumulantTensor:
    """
    Third cumulants of ``y = A theta`` by multilinearity over independent blocks:
    ``K_rst = sum_blocks sum_{p,q,m} A[r,p] A[s,q] A[t,m] kappa3(block)_pqm``.
    """
    A = build_loading_matrix(spec).A
    K = np.zeros((spec.T,) * 3)
    col = 0
    for b in spec.blocks:
        Ab = A[:, col : col + b.dim]
        K += np.einsum("pqm,rp,sq,tm->rst", b.third_cumulant, Ab, Ab, Ab)
        col += b.dim
    return ThirdCumulantTensor(K)


def empirical_covariance(panel) -> CovarianceStructure:
    """Unbiased sample covariance."""
    y = _panel_array(panel)
    if y.shape[0] < 2:
        raise ValueError(f"need n >= 2 observations for a covariance, got {y.shape[0]}")
    return CovarianceStructure(np.cov(y, rowvar=False, ddof=1).reshape(y.shape[1], y.shape[1]))


def empirical_third_cumulants(panel) -> ThirdCumulantTensor:
    """
    Joint third-order k-statistics,
    ``k_rst = n / ((n-1)(n-2)) * sum_i d_ir d_is d_it`` with ``d`` the
    column-demeaned panel. Unbiased for the third cumulants.
    """
    y = _panel_array(panel)
    n = y.shape[0]
    if n < 3:
        raise ValueError(f"need n >= 3 observations for third cumulants, got {n}")
    d = y - y.mean(axis=0)
    K = np.einsum("ir,is,it->rst", d, d, d, optimize=True)
    return ThirdCumulantTensor(K * n / ((n - 1) * (n - 2)))


def third_cumulant_se(panel) -> np.ndarray:
    """
    Plug-in standard errors of the third-cumulant estimates, from the sample
    variance of the per-observation products (first-order; ignores the
    demeaning correction, which is O(1/n)).
    """
    y = _panel_array(panel)
    n = y.shape[0]
    d = y - y.mean(axis=0)
    T = y.shape[1]
    se = np.empty((T, T, T))
    for r in range(T):
        for s in range(T):
            prod = d[:, r] * d[:, s]
            for t in range(T):
                # influence of the third cumulant: d_r d_s d_t - mixed second-moment terms
                infl = (
                    prod * d[:, t]
                    - d[:, r] * np.mean(d[:, s] * d[:, t])
                    - d[:, s] * np.mean(d[:, r] * d[:, t])
                    - d[:, t] * np.mean(prod)
                )
                se[r, s, t] = infl.std(ddof=1) / np.sqrt(n)
    return se


def theorem2_covariance_formulas(a1: float, var_xi0: float, var_eta, var_xi, cov_eta_xi) -> np.ndarray:
    """
    Covariance of y for q = 1 written out term by term, period by period
    (variance, first-order and higher-order autocovariances), independently
    of the loading matrix.

    ``var_eta``, ``var_xi``, ``cov_eta_xi`` are length-T sequences for
    t = 1..T.
    """
    var_eta = np.asarray(var_eta, dtype=float)
    var_xi = np.asarray(var_xi, dtype=float)
    cov = np.asarray(cov_eta_xi, dtype=float)
    T = var_eta.size
    C = np.zeros((T, T))
    for t in range(1, T + 1):
        perm = sum(var_eta[:t])
        prev_cov = cov[t - 2] if t > 1 else 0.0
        prev_var = var_xi[t - 2] if t > 1 else var_xi0
        C[t - 1, t - 1] = perm + a1**2 * prev_var + var_xi[t - 1] + 2 * a1 * prev_cov + 2 * cov[t - 1]
        if t + 1 <= T:
            C[t - 1, t] = C[t, t - 1] = perm + a1 * var_xi[t - 1] + a1 * prev_cov + (1 + a1) * cov[t - 1]
        for j in range(2, T - t + 1):
            C[t - 1, t - 1 + j] = C[t - 1 + j, t - 1] = perm + a1 * prev_cov + cov[t - 1]
    return C
