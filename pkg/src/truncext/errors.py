"""Exception types shared across the package."""

from __future__ import annotations


class TruncextError(Exception):
    """Base class for all package errors."""


class InputError(TruncextError, ValueError):
    """Invalid data or parameters supplied by the caller."""


class DegenerateEstimateError(TruncextError):
    """The estimator has no finite value at the requested sample fraction.

    Raised when the Hill estimate of the truncation margin does not exceed
    the Hill estimate of the truncated margin, so the tail-index ratio has a
    pole or flips sign.  Both Hill values are attached so callers can decide
    whether to retry with a different ``k``.
    """

    def __init__(self, message: str, k: int | None = None,
                 gamma_hat: float | None = None, gamma2_hat: float | None = None):
        super().__init__(message)
        self.k = k
        self.gamma_hat = gamma_hat
        self.gamma2_hat = gamma2_hat


class NegativeVarianceError(TruncextError):
    """A plug-in asymptotic variance came out negative."""


class InfiniteMeanError(TruncextError):
    """The (estimated) tail index is at least one, so the premium is infinite."""


class QuadratureError(TruncextError):
    """Numerical integration failed to reach the requested tolerance."""
