"""Moment-to-cumulant (log-derivative) expansions shared by the cf backends."""

from __future__ import annotations

from functools import lru_cache
from math import factorial
from typing import Callable, Sequence

import numpy as np


@lru_cache(maxsize=None)
def set_partitions(k: int) -> tuple:
    """All set partitions of ``range(k)`` as tuples of sorted tuples."""
    if k == 0:
        return ((),)
    out = []
    for part in set_partitions(k - 1):
        # put element k-1 in its own block, or into each existing block
        out.append(part + ((k - 1,),))
        for i in range(len(part)):
            new = list(part)
            new[i] = part[i] + (k - 1,)
            out.append(tuple(new))
    return tuple(out)


def log_derivative_from_raw(
    f: np.ndarray,
    raw: Callable[[Sequence[int]], np.ndarray],
    order: int,
) -> np.ndarray:
    """
    Mixed derivative of ``log f`` from the mixed derivatives of ``f``.

    Parameters
    ----------
    f : ndarray
        Value of the function (nonzero).
    raw : callable
        ``raw(block)`` returns the derivative of ``f`` along the directions
        whose slot indices are listed in ``block``.
    order : int
        Number of directions, ``>= 1``.

    Notes
    -----
    Uses the partition form of Faa di Bruno's formula for the logarithm,
    ``d_1..d_k log f = sum_pi (-1)^(|pi|-1) (|pi|-1)! prod_{B in pi} f_B / f``.
    For ``order=3`` this is ``f_abc/f - (f_ab f_c + f_ac f_b + f_bc f_a)/f^2
    + 2 f_a f_b f_c / f^3``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    ratios = {}
    total = 0
    for part in set_partitions(order):
        term = (-1) ** (len(part) - 1) * factorial(len(part) - 1)
        prod = 1
        for block in part:
            if block not in ratios:
                ratios[block] = raw(block) / f
            prod = prod * ratios[block]
        total = total + term * prod
    return total
