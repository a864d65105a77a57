"""Burr truncation model, sampler and numerical reference quantities.

Both the truncated variable and the truncation variable follow a Burr law
sharing the shape ``delta``::

    survival(x) = (1 + x**(1/delta)) ** (-delta/g)

with tail index ``g = gamma1`` for the truncated variable and ``g = gamma2``
for the truncation variable.  A pair is observed only when ``x <= y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import InfiniteMeanError, InputError, QuadratureError
from .sample import TruncatedSample

RngSeed = int | np.random.SeedSequence | np.random.Generator

QUAD_RTOL = 1e-8
# integrand cut-off relative to its peak for the log-substituted tail integrals
_TAIL_CUTOFF = 1e-16


def _check_pos(name: str, v: float) -> None:
    if not (np.isfinite(v) and v > 0):
        raise InputError(f"{name} must be a positive finite number, got {v!r}")


def burr_survival(x, delta: float, g: float):
    """Burr survival ``(1 + x^(1/delta))^(-delta/g)``; accepts scalars or arrays."""
    _check_pos("delta", delta)
    _check_pos("g", g)
    xa = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xa)) or np.any(xa < 0):
        raise InputError("x must be finite and nonnegative")
    out = np.exp(-(delta / g) * np.log1p(xa ** (1.0 / delta)))
    return float(out) if out.ndim == 0 else out


def burr_density(x, delta: float, g: float):
    xa = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = (1.0 / g) * xa ** (1.0 / delta - 1.0) \
            * np.exp(-(delta / g + 1.0) * np.log1p(xa ** (1.0 / delta)))
    return float(out) if out.ndim == 0 else out


def burr_quantile(u, delta: float, g: float):
    """Inverse of the Burr distribution function: ``((1-u)^(-g/delta) - 1)^delta``."""
    _check_pos("delta", delta)
    _check_pos("g", g)
    ua = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(ua)) or np.any(ua < 0) or np.any(ua >= 1):
        raise InputError("u must lie in [0, 1)")
    out = np.expm1(-(g / delta) * np.log1p(-ua)) ** delta
    return float(out) if out.ndim == 0 else out


def pareto_survival(x, gamma1: float):
    """Exact Pareto tail ``x^(-1/gamma1)`` on ``x >= 1``."""
    xa = np.asarray(x, dtype=np.float64)
    out = np.where(xa >= 1, np.maximum(xa, 1.0) ** (-1.0 / gamma1), 1.0)
    return float(out) if out.ndim == 0 else out


def pareto_premium(gamma1: float, u: float) -> float:
    """Closed-form layer premium for the exact Pareto tail, ``u >= 1``."""
    if gamma1 >= 1:
        raise InfiniteMeanError(f"gamma1={gamma1} >= 1: infinite mean")
    return gamma1 / (1.0 - gamma1) * u ** (1.0 - 1.0 / gamma1)


def _quad(f, a, b, **kw) -> float:
    res = integrate.quad(f, a, b, full_output=1, **kw)
    val, err = res[0], res[1]
    if len(res) > 3 or not np.isfinite(val):
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: "
                              f"{res[3] if len(res) > 3 else 'non-finite value'}")
    return val


def tail_integral(f: Callable[[float], float], lower: float, decay: float,
                  rtol: float = QUAD_RTOL) -> float:
    """``int_lower^inf f(x) dx`` for an integrand decaying like ``x^(-decay-1)``.

    The range beyond ``max(lower, 1)`` is mapped through ``x = x0 * e^s`` so the
    integrand decays exponentially in ``s``; it is cut where it falls below
    ``1e-16`` of its starting size.
    """
    if decay <= 0:
        raise InputError("integrand must decay faster than 1/x")
    total = 0.0
    x0 = lower
    if x0 < 1.0:
        total += _quad(f, x0, 1.0, epsrel=rtol, epsabs=0.0, limit=200)
        x0 = 1.0
    s_max = math.log(1.0 / _TAIL_CUTOFF) / decay
    total += _quad(lambda s: f(x0 * math.exp(s)) * x0 * math.exp(s), 0.0, s_max,
                   epsrel=rtol, epsabs=0.0, limit=500)
    return total


def true_premium(gamma1: float, survival: Callable[[float], float], u: float) -> float:
    """Layer premium ``int_u^inf survival(x) dx`` by adaptive quadrature.

    ``gamma1`` is the tail index of ``survival``; it fixes the truncation point
    of the integration range and must be below one.
    """
    _check_pos("u", u)
    if gamma1 >= 1:
        raise InfiniteMeanError(f"gamma1={gamma1} >= 1: the layer premium is infinite")
    return tail_integral(lambda x: float(survival(x)), u, 1.0 / gamma1 - 1.0)


@dataclass(frozen=True)
class BurrTruncationModel:
    gamma1: float
    gamma2: float
    delta: float = 1.0

    def __post_init__(self):
        _check_pos("gamma1", self.gamma1)
        _check_pos("gamma2", self.gamma2)
        _check_pos("delta", self.delta)

    @property
    def p(self) -> float:
        """Probability that a pair is observed."""
        return self.gamma2 / (self.gamma1 + self.gamma2)

    @property
    def gamma(self) -> float:
        """Tail index of the observed truncated variable."""
        return self.gamma1 * self.gamma2 / (self.gamma1 + self.gamma2)

    @property
    def tau(self) -> float:
        # The observed X margin is exactly Burr(gamma, delta), whose quantile
        # function has second-order parameter -gamma/delta.
        return -self.gamma / self.delta

    @property
    def tau2(self) -> float:
        return -self.gamma2 / self.delta

    @property
    def tau1(self) -> float:
        return -self.gamma1 / self.delta

    @property
    def supports_premium(self) -> bool:
        return self.gamma1 < self.gamma2 and self.gamma1 < 1

    # Underlying (unobserved) laws.
    def survival_x(self, x):
        return burr_survival(x, self.delta, self.gamma1)

    def survival_y(self, y):
        return burr_survival(y, self.delta, self.gamma2)

    def density_x(self, x):
        return burr_density(x, self.delta, self.gamma1)

    def quantile_x(self, u):
        return burr_quantile(u, self.delta, self.gamma1)

    def quantile_y(self, u):
        return burr_quantile(u, self.delta, self.gamma2)

    # Laws of the observed data, by quadrature over the underlying ones.
    def observed_survival_x(self, x: float) -> float:
        """``P(X > x)`` for observed data, ``p^-1 int_x^inf Gbar dF``."""
        f = lambda z: self.survival_y(z) * self.density_x(z)
        return tail_integral(f, x, 1.0 / self.gamma) / self.p

    def overlap(self, x) -> float:
        """``C(x) = P(X <= x <= Y)`` for observed data."""
        return (1.0 - self.survival_x(x)) * self.survival_y(x) / self.p

    def cumulative_hazard(self, x: float) -> float:
        """``Lambda(x) = int_x^inf dF(z) / C(z)`` by quadrature."""
        def f(z):
            c = self.overlap(z)
            if c <= 0:
                return 0.0
            return self.survival_y(z) * self.density_x(z) / self.p / c
        return tail_integral(f, x, 1.0 / self.gamma1)

    def observed_quantile_x(self, t: float) -> float:
        """``U(t)``: the level exceeded by observed X with probability ``1/t``."""
        if not t > 1:
            raise InputError("t must exceed 1")
        target = math.log(1.0 / t)
        g = lambda lx: math.log(self.observed_survival_x(math.exp(lx))) - target
        lo, hi = -5.0, 5.0
        while g(hi) > 0:
            hi *= 2
        while g(lo) < 0:
            lo *= 2
        return math.exp(optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-13))

    def premium(self, u: float) -> float:
        return true_premium(self.gamma1, self.survival_x, u)


def model_from_p(p: float, gamma1: float, delta: float = 1.0) -> BurrTruncationModel:
    """Model whose observation probability ``gamma2/(gamma1+gamma2)`` equals ``p``."""
    if not (0 < p < 1):
        raise InputError(f"p must lie in (0, 1), got {p!r}")
    return BurrTruncationModel(gamma1, p * gamma1 / (1.0 - p), delta)


def as_rng(seed: RngSeed):
    if isinstance(seed, np.random.Generator) or hasattr(seed, "uniform"):
        return seed
    return np.random.default_rng(seed)


def sample_truncated_pairs(model: BurrTruncationModel, N: int, seed: RngSeed) -> TruncatedSample:
    """Draw ``N`` underlying pairs by inverse transform and keep those with ``x <= y``."""
    if int(N) != N or N < 1:
        raise InputError(f"N must be a positive integer, got {N!r}")
    rng = as_rng(seed)
    tiny = np.finfo(np.float64).tiny
    u = rng.uniform(tiny, 1.0, int(N))
    v = rng.uniform(tiny, 1.0, int(N))
    x = burr_quantile(np.asarray(u), model.delta, model.gamma1)
    y = burr_quantile(np.asarray(v), model.delta, model.gamma2)
    keep = np.atleast_1d(x <= y)
    if not keep.any():
        return TruncatedSample.empty()
    return TruncatedSample.from_arrays(np.atleast_1d(x)[keep], np.atleast_1d(y)[keep])


def lemma2_limit_check(model: BurrTruncationModel, t: float) -> float:
    """``t * Lambda(U(t)) * C(U(t))``, which tends to ``gamma1/gamma`` as ``t`` grows."""
    if not model.gamma1 < model.gamma2:
        raise InputError("the limit requires gamma1 < gamma2")
    x = model.observed_quantile_x(t)
    return t * model.cumulative_hazard(x) * model.overlap(x)
