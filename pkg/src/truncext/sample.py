"""Observed pairs under random right truncation.

A :class:`TruncatedSample` holds the pairs ``(x_i, y_i)`` that survived the
observation filter ``x <= y`` together with sorted views of each margin.
Counting queries (empirical tails, the overlap function ``C_n``) are answered
by binary search on the sorted views.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import InputError

Margin = Literal["X", "Y"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TruncatedSample:
    """Immutable sample of observed ``(x, y)`` pairs with ``x <= y``.

    Use :meth:`from_pairs` or :meth:`from_arrays` rather than the raw
    constructor; both validate the observability constraint.
    """

    x: np.ndarray
    y: np.ndarray
    x_sorted: np.ndarray = field(repr=False)
    y_sorted: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, x: Sequence[float], y: Sequence[float]) -> "TruncatedSample":
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise InputError(f"margins differ in length: {x.size} vs {y.size}")
        bad = ~(np.isfinite(x) & np.isfinite(y)) | (x <= 0) | (x > y)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InputError(f"invalid pair at index {i}: ({x[i]!r}, {y[i]!r}); "
                             "need finite 0 < x <= y")
        return cls(_frozen(x), _frozen(y),
                   _frozen(np.sort(x, kind="stable")),
                   _frozen(np.sort(y, kind="stable")))

    @classmethod
    def from_pairs(cls, raw: Iterable[tuple[float, float]]) -> "TruncatedSample":
        """Build a sample from an iterable of pairs, reporting the first bad index."""
        xs, ys = [], []
        for i, pair in enumerate(raw):
            try:
                a, b = (float(v) for v in pair)
            except (TypeError, ValueError) as exc:
                raise InputError(f"pair at index {i} is not two numbers: {pair!r}") from exc
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InputError(f"non-finite value in pair at index {i}: ({a}, {b})")
            if a <= 0:
                raise InputError(f"x must be positive, pair at index {i}: ({a}, {b})")
            if a > b:
                raise InputError(f"x > y violates truncation, pair at index {i}: ({a}, {b})")
            xs.append(a)
            ys.append(b)
        if not xs:
            raise InputError("empty sample")
        return cls.from_arrays(xs, ys)

    @classmethod
    def empty(cls) -> "TruncatedSample":
        e = _frozen(np.empty(0))
        return cls(e, e, e, e)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def pairs(self) -> np.ndarray:
        """The pairs as an ``(n, 2)`` array."""
        return np.column_stack([self.x, self.y])

    def __len__(self) -> int:
        return self.n

    def sorted_margin(self, margin: Margin) -> np.ndarray:
        if margin == "X":
            return self.x_sorted
        if margin == "Y":
            return self.y_sorted
        raise InputError(f"margin must be 'X' or 'Y', got {margin!r}")

    def scaled(self, c: float) -> "TruncatedSample":
        """Copy with both margins multiplied by ``c > 0``."""
        if not c > 0:
            raise InputError("scale factor must be positive")
        return TruncatedSample.from_arrays(self.x * c, self.y * c)

    # Rank structure used by the tail copula; ranks count from the top (1 = largest)
    # and break ties by original index.
    @cached_property
    def x_rank_desc(self) -> np.ndarray:
        return _desc_ranks(self.x)

    @cached_property
    def y_rank_desc(self) -> np.ndarray:
        return _desc_ranks(self.y)

    @cached_property
    def has_x_ties(self) -> bool:
        return bool(self.n > 1 and np.any(np.diff(self.x_sorted) == 0))

    @cached_property
    def _nc_at_x_sorted(self) -> np.ndarray:
        # n * C_n(X_{i:n}) for every order statistic, as integers.
        xs = self.x_sorted
        le_x = np.searchsorted(self.x_sorted, xs, side="right")
        lt_y = np.searchsorted(self.y_sorted, xs, side="left")
        return le_x - lt_y


def _desc_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(-v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(1, v.size + 1)
    ranks.setflags(write=False)
    return ranks


def order_stat(sample: TruncatedSample, margin: Margin, i: int) -> float:
    """The ``i``-th smallest value (1-based) of the requested margin."""
    v = sample.sorted_margin(margin)
    if not 1 <= i <= v.size:
        raise InputError(f"order statistic index {i} outside [1, {v.size}]")
    return float(v[i - 1])


def count_le(sample: TruncatedSample, margin: Margin, x: float) -> int:
    return int(np.searchsorted(sample.sorted_margin(margin), x, side="right"))


def count_ge(sample: TruncatedSample, margin: Margin, x: float) -> int:
    v = sample.sorted_margin(margin)
    return int(v.size - np.searchsorted(v, x, side="left"))


def empirical_tail(sample: TruncatedSample, margin: Margin, x: float,
                   inclusive: bool = False) -> float:
    """Empirical survival ``1 - F_n(x)`` (or ``1 - G_n(x)`` for ``margin='Y'``).

    With ``inclusive=True`` the fraction of values ``>= x`` is returned instead,
    i.e. the left limit of the survival function at ``x``.
    """
    n = sample.n
    if n == 0:
        raise InputError("empty sample")
    if inclusive:
        return count_ge(sample, margin, x) / n
    return (n - count_le(sample, margin, x)) / n


def c_n_count(sample: TruncatedSample, x: float) -> int:
    """Number of pairs with ``x_i <= x <= y_i``."""
    # Pairs with y_i < x also have x_i < x, so they are removed from #{x_i <= x}.
    return count_le(sample, "X", x) - int(np.searchsorted(sample.y_sorted, x, side="left"))


def c_n(sample: TruncatedSample, x: float) -> float:
    """Overlap function ``C_n(x) = n^{-1} #{i : x_i <= x <= y_i}``."""
    if sample.n == 0:
        raise InputError("empty sample")
    return c_n_count(sample, x) / sample.n


def read_csv(path: str | Path) -> TruncatedSample:
    """Read a ``x,y`` CSV file (header required) into a sample.

    Errors carry the 1-based line number of the offending row.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["x", "y"]:
        raise InputError(f"{path}:1: expected header 'x,y', got {','.join(rows[0])!r}")
    xs, ys = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            a, b = float(row[0]), float(row[1])
        except ValueError:
            raise InputError(f"{path}:{lineno}: not a decimal pair: {','.join(row)!r}") from None
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0 or a > b:
            raise InputError(f"{path}:{lineno}: need finite 0 < x <= y, got ({a}, {b})")
        xs.append(a)
        ys.append(b)
    if not xs:
        raise InputError(f"{path}: no data rows")
    return TruncatedSample.from_arrays(xs, ys)


def write_csv(sample: TruncatedSample, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for a, b in zip(sample.x, sample.y):
            w.writerow([repr(float(a)), repr(float(b))])
