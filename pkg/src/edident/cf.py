"""
Log characteristic function of the observed panel vector and its
directional derivatives up to order 3.

Two backends share one interface:

* :class:`AnalyticCF` evaluates the model log-cf exactly as a sum of block
  log-cfs composed with the linear maps read off the loading matrix.
* :class:`EmpiricalCF` evaluates the sample analogue built from
  ``phi_hat(s) = mean(exp(i s.y))``. Raw derivatives are exact sample means
  of ``prod_j (i d_j.y) exp(i s.y)``; log-derivatives follow from the shared
  partition expansion in :mod:`edident.cumulants`.

No numerical differentiation is involved anywhere.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cumulants import log_derivative_from_raw
from .model import EDModelSpec, build_loading_matrix
from .simulate import Panel

EPS_CF = 1e-3
MAX_ORDER = 3


class IllConditionedPoint(ArithmeticError):
    """|phi_hat(s)| is too small for the log-cf to be trusted."""

    def __init__(self, s, modulus, eps):
        self.s = np.asarray(s, dtype=float)
        self.modulus = float(modulus)
        self.eps = eps
        super().__init__(
            f"|phi_hat(s)| = {self.modulus:.3g} <= eps_cf = {eps:g} at s = {np.round(self.s, 6).tolist()}"
        )


@dataclass(frozen=True)
class CFQuery:
    """
    A point ``s`` and up to three derivative directions, each of length T.

    Build partial-derivative queries with :meth:`partial`.
    """

    s: np.ndarray
    directions: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 1:
            raise ValueError("query point must be a vector")
        dirs = tuple(np.asarray(d, dtype=float) for d in self.directions)
        if len(dirs) > MAX_ORDER:
            raise ValueError(f"derivative order {len(dirs)} exceeds {MAX_ORDER}")
        for d in dirs:
            if d.shape != s.shape:
                raise ValueError(f"direction length {d.shape} does not match point length {s.shape}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def partial(cls, s, index: Sequence[int] = ()) -> "CFQuery":
        """Partial derivative along 1-based coordinates, e.g. ``(1, 1)``."""
        s = np.asarray(s, dtype=float)
        eye = np.eye(s.size)
        for i in index:
            if not 1 <= i <= s.size:
                raise ValueError(f"index {i} outside 1..{s.size}")
        return cls(s, tuple(eye[i - 1] for i in index))

    @property
    def order(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class CFValue:
    value: complex
    order: int
    backend: str
    reliability: float


class CFEngine(abc.ABC):
    """Common interface of the analytic and empirical backends."""

    backend: str = ""
    T: int

    @abc.abstractmethod
    def derivatives(self, points, directions: Sequence = (), strict: bool = True):
        """
        Batched directional derivatives of log phi_Y.

        Parameters
        ----------
        points : array_like, shape (m, T) or (T,)
        directions : sequence of array_like
            Up to three directions; each of shape ``(T,)`` or ``(m, T)``.

        Returns
        -------
        values : complex ndarray, shape (m,)
        modulus : ndarray, shape (m,)
            ``|phi(s)|`` at each point.

        With ``strict`` (default) an ill-conditioned point raises
        :class:`IllConditionedPoint`; otherwise its value is NaN.
        """

    def evaluate(self, query: CFQuery) -> CFValue:
        if query.s.size != self.T:
            raise ValueError(f"query has length {query.s.size}, engine expects T={self.T}")
        vals, mod = self.derivatives(query.s[None, :], query.directions)
        return CFValue(complex(vals[0]), query.order, self.backend, float(mod[0]))

    def hessian(self, s) -> np.ndarray:
        """Matrix of second partials at ``s``."""
        eye = np.eye(self.T)
        H = np.empty((self.T, self.T), dtype=complex)
        for a in range(self.T):
            for b in range(a, self.T):
                H[a, b] = H[b, a] = self.derivatives(np.asarray(s, float)[None], (eye[a], eye[b]))[0][0]
        return H

    def third_tensor(self, s) -> np.ndarray:
        """Tensor of third partials at ``s``."""
        eye = np.eye(self.T)
        K = np.empty((self.T,) * 3, dtype=complex)
        pt = np.asarray(s, float)[None]
        for a in range(self.T):
            for b in range(a, self.T):
                for c in range(b, self.T):
                    v = self.derivatives(pt, (eye[a], eye[b], eye[c]))[0][0]
                    for idx in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
                        K[idx] = v
        return K


def _prepare(points, directions, T):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != T:
        raise ValueError(f"points must have length T={T}, got {pts.shape[-1]}")
    if len(directions) > MAX_ORDER:
        raise ValueError(f"derivative order {len(directions)} exceeds {MAX_ORDER}")
    dirs = []
    for d in directions:
        d = np.asarray(d, dtype=float)
        if d.shape[-1] != T:
            raise ValueError(f"directions must have length T={T}, got {d.shape[-1]}")
        dirs.append(np.broadcast_to(d, pts.shape))
    return pts, dirs


class AnalyticCF(CFEngine):
    """Exact model log-cf of ``y = A theta`` under independent shock blocks."""

    backend = "analytic"

    def __init__(self, spec: EDModelSpec):
        self.spec = spec
        self.T = spec.T
        A = build_loading_matrix(spec).A
        self._maps = []
        col = 0
        for b in spec.blocks:
            self._maps.append((b, A[:, col : col + b.dim]))
            col += b.dim

    def derivatives(self, points, directions: Sequence = (), strict: bool = True):
        pts, dirs = _prepare(points, directions, self.T)
        order = len(dirs)
        total = np.zeros(pts.shape[0], dtype=complex)
        logphi = np.zeros(pts.shape[0])
        for block, Ab in self._maps:
            x = pts @ Ab
            base = block.log_cf(x)
            logphi += base.real
            total += block.log_cf(x, [d @ Ab for d in dirs]) if order else base
        return total, np.exp(logphi)


class EmpiricalCF(CFEngine):
    """
    Sample log-cf of a panel.

    Parameters
    ----------
    panel : Panel or ndarray
    eps_cf : float
        Minimum ``|phi_hat(s)|`` before log-derivatives are trusted.
    max_block : int
        Bound on ``n * points`` held in memory at once.
    """

    backend = "empirical"

    def __init__(self, panel, eps_cf: float = EPS_CF, max_block: int = 2_000_000):
        y = panel.y if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
        if y.ndim != 2 or y.shape[0] < 1:
            raise ValueError("empirical backend needs a non-empty n x T panel")
        self.y = y
        self.n, self.T = y.shape
        self.eps_cf = eps_cf
        self.max_block = max_block

    def raw_moments(self, points, directions: Sequence = ()):
        """
        ``phi_hat`` and its raw mixed derivatives at each point.

        Returns a dict keyed by tuples of direction slots, ``()`` holding
        ``phi_hat`` itself. Directions shared by all points are folded into
        an observation weight so each moment is a matrix-vector product.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        _prepare(pts, directions, self.T)
        dirs = [np.asarray(d, dtype=float) for d in directions]
        shared = [d.ndim == 1 for d in dirs]
        vec = {i: self.y @ d for i, d in enumerate(dirs) if shared[i]}
        k = len(dirs)
        subsets = [()]
        for i in range(k):
            subsets += [s + (i,) for s in subsets]
        out = {s: np.empty(pts.shape[0], dtype=complex) for s in subsets}
        step = max(1, self.max_block // self.n)
        for lo in range(0, pts.shape[0], step):
            sl = slice(lo, lo + step)
            X = self.y @ pts[sl].T
            cos, sin = np.cos(X), np.sin(X)
            mat = {i: self.y @ np.broadcast_to(d, pts.shape)[sl].T for i, d in enumerate(dirs) if not shared[i]}
            for s in subsets:
                w = np.ones(self.n)
                for i in s:
                    if shared[i]:
                        w = w * vec[i]
                c, si = cos, sin
                for i in s:
                    if not shared[i]:
                        c, si = c * mat[i], si * mat[i]
                out[s][sl] = (1j ** len(s)) * (w @ c + 1j * (w @ si)) / self.n
        return out

    def derivatives(self, points, directions: Sequence = (), strict: bool = True):
        pts, _ = _prepare(points, directions, self.T)
        raw = self.raw_moments(pts, directions)
        f = raw[()]
        mod = np.abs(f)
        bad = (mod <= self.eps_cf) & np.any(pts != 0, axis=1)
        if strict and np.any(bad):
            i = int(np.argmax(bad))
            raise IllConditionedPoint(pts[i], mod[i], self.eps_cf)
        with np.errstate(all="ignore"):
            vals = np.log(f) if len(directions) == 0 else log_derivative_from_raw(f, lambda b: raw[tuple(b)], len(directions))
        vals[bad] = np.nan
        return vals, mod

    def conditioning(self, points) -> np.ndarray:
        """``|phi_hat(s)|`` at each point."""
        return np.abs(self.raw_moments(points)[()])


def analytic_log_cf(spec: EDModelSpec, query: CFQuery) -> CFValue:
    return AnalyticCF(spec).evaluate(query)


def empirical_log_cf(panel: Panel, query: CFQuery, eps_cf: float = EPS_CF) -> CFValue:
    return EmpiricalCF(panel, eps_cf).evaluate(query)


def directional_derivative(engine: CFEngine, point, directions: Sequence) -> CFValue:
    """Derivative of log phi_Y at ``point`` along up to three directions."""
    dirs = [np.asarray(d, dtype=float) for d in directions]
    for d in dirs:
        if not np.any(d):
            raise ValueError("directions must be nonzero")
    return engine.evaluate(CFQuery(np.asarray(point, dtype=float), tuple(dirs)))
