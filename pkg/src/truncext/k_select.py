"""Data-driven choice of the sample fraction ``k``.

Median-deviation heuristic: for each candidate ``k`` the criterion is

    (1/k) * sum_{i=2}^{k} i**beta * |g(i) - median(g(2), ..., g(k))|

and the minimiser over ``[max(3, 0.02 n), 0.25 n]`` is returned.  Fractions
where the estimator is degenerate are left out of the sums and are never
selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateEstimateError, InputError, TruncextError
from .sample import TruncatedSample
from .tail_estimation import gamma1_trace

DEFAULT_BETA = 0.3


class SelectionError(TruncextError):
    """No admissible ``k`` in the search window."""


@dataclass(frozen=True)
class KSelection:
    k_star: int
    k_min: int
    k_max: int
    criterion_values: list[tuple[int, float]] = field(repr=False)


def search_window(n: int) -> tuple[int, int]:
    return max(3, int(math.floor(0.02 * n))), int(math.floor(0.25 * n))


def _evaluate(trace, k_max: int) -> np.ndarray:
    """Trace values for ``k = 1..k_max`` (index ``k-1``), NaN where degenerate."""
    if callable(trace):
        out = np.full(k_max, np.nan)
        for k in range(2, k_max + 1):
            try:
                v = trace(k)
            except DegenerateEstimateError:
                continue
            out[k - 1] = v if v is not None and np.isfinite(v) else np.nan
        return out
    arr = np.asarray(trace, dtype=np.float64)
    if arr.size < k_max:
        raise InputError(f"trace has {arr.size} values, need {k_max}")
    out = arr[:k_max].copy()
    out[~np.isfinite(out)] = np.nan
    return out


def reiss_thomas_k(estimator_trace: Callable[[int], float] | Sequence[float], n: int,
                   beta: float = DEFAULT_BETA) -> KSelection:
    """Pick ``k`` from an estimator trace.

    Parameters
    ----------
    estimator_trace : callable or array
        Either ``k -> estimate`` (raising :class:`DegenerateEstimateError` or
        returning NaN where undefined) or an array whose entry ``k-1`` holds the
        estimate at ``k``.
    n : int
        Sample size; fixes the search window.
    beta : float
        Weight exponent in ``[0, 0.5]``.
    """
    if n < 20:
        raise InputError(f"need n >= 20, got {n}")
    if not 0 <= beta <= 0.5:
        raise InputError("beta must lie in [0, 0.5]")
    k_min, k_max = search_window(n)
    g = _evaluate(estimator_trace, k_max)[1:]       # i = 2..k_max
    idx = np.arange(2, k_max + 1)
    valid = np.isfinite(g)
    weights = idx.astype(np.float64) ** beta
    scores: list[tuple[int, float]] = []
    best_k, best = None, math.inf
    for k in range(k_min, k_max + 1):
        if not valid[k - 2]:
            continue
        m = valid[:k - 1]
        vals = g[:k - 1][m]
        med = np.median(vals)
        score = float(np.sum(weights[:k - 1][m] * np.abs(vals - med)) / k)
        scores.append((k, score))
        if score <= best:
            best_k, best = k, score
    if best_k is None:
        raise SelectionError(f"estimator degenerate for every k in [{k_min}, {k_max}]")
    return KSelection(best_k, k_min, k_max, scores)


def select_k(sample: TruncatedSample, beta: float = DEFAULT_BETA) -> KSelection:
    """Apply :func:`reiss_thomas_k` to the tail-index trace of ``sample``."""
    _, k_max = search_window(sample.n)
    if sample.n < 20:
        raise InputError(f"need n >= 20, got {sample.n}")
    _, _, g1 = gamma1_trace(sample, k_max)
    return reiss_thomas_k(g1, sample.n, beta)
