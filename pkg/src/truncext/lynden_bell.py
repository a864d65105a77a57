"""Lynden-Bell product-limit estimator, tail extrapolation and layer premium.

The underlying distribution function of the truncated variable is estimated by

    F_n(x) = prod_{X_i > x} (1 - 1/(n C_n(X_i)))

where ``n C_n(z)`` counts the pairs with ``x_i <= z <= y_i``.  Every factor is a
ratio of integers, so the product is formed exactly after cancelling common
factors and rounded once.  With ties in X the exponential form
``exp(-Lambda_n(x))`` is used instead.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InfiniteMeanError, InputError, NegativeVarianceError
from .model import RngSeed, as_rng
from .sample import TruncatedSample
from .tail_estimation import (
    DEFAULT_MC_POINTS, ConfidenceInterval, EmpiricalTailCopula, MonteCarloValue,
    _antithetic_uniforms, _pair_mean, asymptotic_variance, delta_functional,
    truncated_tail_index,
)


@dataclass(frozen=True)
class PremiumEstimate:
    u: float
    k: int
    pi_hat: float
    lb_survival_at_pivot: float
    ci: ConfidenceInterval | None = None
    mass_exhausted: bool = False
    gamma1_hat: float = math.nan
    sigma_star2: float = math.nan

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in ("u", "k", "pi_hat", "lb_survival_at_pivot",
                                           "mass_exhausted", "gamma1_hat", "sigma_star2")}
        d["ci"] = None if self.ci is None else {"lcb": self.ci.lcb, "ucb": self.ci.ucb,
                                                "level": self.ci.level}
        return d


def _counts_above(sample: TruncatedSample, x: float) -> np.ndarray:
    """``n C_n(X_i)`` for every observation ``X_i > x``."""
    j = int(np.searchsorted(sample.x_sorted, x, side="right"))
    return sample._nc_at_x_sorted[j:]


def _exact_product(counts: np.ndarray) -> float:
    # prod (m-1)/m over integer counts, cancelled and divided once
    if counts.size == 0:
        return 1.0
    if np.any(counts == 1):
        return 0.0
    net = Counter((counts - 1).tolist())
    net.subtract(counts.tolist())
    num = math.prod(v ** e for v, e in net.items() if e > 0)
    den = math.prod(v ** -e for v, e in net.items() if e < 0)
    return num / den


def lambda_n(sample: TruncatedSample, x: float) -> float:
    """Empirical cumulative hazard ``sum_{X_i > x} 1/(n C_n(X_i))``."""
    return math.fsum(1.0 / _counts_above(sample, x))


def lynden_bell_cdf(sample: TruncatedSample, x: float) -> float:
    """Lynden-Bell estimate of the underlying distribution function at ``x``."""
    if sample.n == 0:
        raise InputError("empty sample")
    if sample.has_x_ties:
        return math.exp(-lambda_n(sample, x))
    return _exact_product(_counts_above(sample, x))


def lynden_bell_survival(sample: TruncatedSample, x: float) -> float:
    """``1 - F_n(x)``; see :func:`lynden_bell_cdf`."""
    return 1.0 - lynden_bell_cdf(sample, x)


def mass_exhausted(sample: TruncatedSample, x: float) -> bool:
    """True when a factor above ``x`` has ``n C_n = 1``, which zeroes the product."""
    return bool(np.any(_counts_above(sample, x) == 1))


def _pivot(sample: TruncatedSample, k: int) -> float:
    n = sample.n
    if int(k) != k or not 1 <= k < n:
        raise InputError(f"k={k} outside [1, n-1] for n={n}")
    return float(sample.x_sorted[n - int(k) - 1])


def weissman_tail(sample: TruncatedSample, k: int, gamma1_hat: float, x: float) -> float:
    """Tail probability beyond ``x >= X_{n-k:n}`` by power-law extrapolation."""
    if not gamma1_hat > 0:
        raise InputError("gamma1_hat must be positive")
    pivot = _pivot(sample, k)
    if not x >= pivot:
        raise InputError(f"x={x} below the pivot X_(n-k)={pivot}; extrapolation only")
    return (x / pivot) ** (-1.0 / gamma1_hat) * lynden_bell_survival(sample, pivot)


def premium_estimate(sample: TruncatedSample, k: int, u: float,
                     gamma1_hat: float | None = None) -> PremiumEstimate:
    """Excess-of-loss premium ``int_u^inf (1 - F(x)) dx`` from the extrapolated tail.

    ``gamma1_hat`` defaults to the truncated-data estimate at ``k``.  The
    retention ``u`` must not lie below the pivot ``X_{n-k:n}``.
    """
    if gamma1_hat is None:
        gamma1_hat = truncated_tail_index(sample, k).gamma1_hat
    if not gamma1_hat > 0:
        raise InputError("gamma1_hat must be positive")
    if gamma1_hat >= 1:
        raise InfiniteMeanError(f"gamma1_hat={gamma1_hat:.4g} >= 1: infinite-mean estimate, "
                                "premium undefined")
    if not (math.isfinite(u) and u > 0):
        raise InputError("retention u must be positive and finite")
    pivot = _pivot(sample, k)
    if u < pivot:
        raise InputError(f"retention u={u} below the pivot X_(n-k)={pivot}; "
                         "the estimator only extrapolates")
    surv = lynden_bell_survival(sample, pivot)
    # the pivot enters last so that scaling the data by a power of two is exact
    pi = gamma1_hat / (1.0 - gamma1_hat) * (u / pivot) ** (1.0 - 1.0 / gamma1_hat) * surv * pivot
    return PremiumEstimate(float(u), int(k), pi, surv, None, mass_exhausted(sample, pivot),
                           float(gamma1_hat))


def theorem2_variance(gamma1: float, gamma2: float) -> float:
    """Limiting variance ``gamma2^2/(gamma2^2 - gamma1^2)`` of the normalised
    Lynden-Bell tail at an intermediate order statistic."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise InputError("tail indices must be positive")
    if not gamma1 < gamma2:
        raise InputError("requires gamma1 < gamma2")
    return gamma2 ** 2 / (gamma2 ** 2 - gamma1 ** 2)


def _power_law_draw(u: np.ndarray, a: float) -> np.ndarray:
    # inverse cdf of the density (1-a) s^(-a) on (0, 1)
    return u ** (1.0 / (1.0 - a))


def delta_star(gamma1: float, gamma2: float, R, mc_points: int = DEFAULT_MC_POINTS,
               seed: RngSeed = 0) -> MonteCarloValue:
    """Cross-covariance functional entering the premium variance.

    ``c/(g g2) + c2/g1 (R(1,1) - int R(1,t)/t dt)
    + c2/(g1+g2) (int R(s,1) s^(-a-1) ds - int int R(s,t) t^-1 s^(-a-1) ds dt)``
    with ``a = g/g2``.  The singular weight is importance sampled from the
    density ``(1-a) s^-a``; the double integral is split along the diagonal
    so that every Monte Carlo integrand is bounded.
    """
    if mc_points < 2:
        raise InputError("mc_points must be at least 2")
    if not (0 < gamma1 < gamma2):
        raise InputError("requires 0 < gamma1 < gamma2")
    g = gamma1 * gamma2 / (gamma1 + gamma2)
    c, c2 = gamma1 ** 2 / g, gamma1 ** 2 / gamma2
    a = g / gamma2
    q = 1.0 - a
    rng = as_rng(seed)
    u = _antithetic_uniforms(rng, mc_points, 5)
    ones = np.ones(u.shape[:2])
    t1 = u[..., 0]
    s2 = _power_law_draw(u[..., 1], a)
    s3, w3 = _power_law_draw(u[..., 2], a), u[..., 3]
    t4, w4 = _power_law_draw(u[..., 2], a), _power_law_draw(u[..., 4], a)
    ev = lambda s, t: np.asarray(R(s, t), dtype=np.float64)
    r11 = float(ev(np.ones(1), np.ones(1))[0])
    i1 = ev(ones, t1) / t1
    i2 = ev(s2, ones) / s2 / q
    # region t < s: t = s w ;  region s < t: s = t w
    i3 = ev(s3, s3 * w3) / (s3 * w3) / q
    i4 = ev(t4 * w4, t4) / (t4 * w4) / (q * q)
    h = -c2 / gamma1 * i1 + c2 / (gamma1 + gamma2) * (i2 - i3 - i4)
    est = _pair_mean(h)
    return MonteCarloValue(c / (g * gamma2) + c2 / gamma1 * r11 + est.value, est.stderr)


def zeta(gamma1: float, a: float) -> float:
    if not (0 < gamma1 < 1):
        raise InputError("requires 0 < gamma1 < 1")
    if not a > 0:
        raise InputError("a must be positive")
    return ((1.0 - gamma1) * math.log(a) + gamma1) / (gamma1 * (1.0 - gamma1) ** 2)


def theorem3_sigma_star(gamma1: float, gamma2: float, a: float, R,
                        mc_points: int = DEFAULT_MC_POINTS,
                        seed: RngSeed = 0) -> MonteCarloValue:
    """Asymptotic variance ``sigma*^2`` of the normalised premium estimator.

    Returns the value with a standard error propagated from the two
    independent Monte Carlo integrals.
    """
    if not (0 < gamma1 < 1 and gamma1 < gamma2):
        raise InputError("requires 0 < gamma1 < 1 and gamma1 < gamma2")
    z = zeta(gamma1, a)
    g = gamma1 * gamma2 / (gamma1 + gamma2)
    c, c2 = gamma1 ** 2 / g, gamma1 ** 2 / gamma2
    rng = as_rng(seed)
    d = delta_functional(R, mc_points, rng)
    ds = delta_star(gamma1, gamma2, R, mc_points, rng)
    sigma2 = asymptotic_variance(c, c2, d.value)
    middle = gamma1 ** 2 * gamma2 ** 2 / ((gamma2 ** 2 - gamma1 ** 2) * (1.0 - gamma1) ** 2)
    w = 2.0 * g * gamma1 * z / (1.0 - gamma1)
    value = z * z * sigma2 + middle + w * ds.value
    se = math.hypot(2.0 * z * z * c * c2 * d.stderr, w * ds.stderr)
    if not math.isfinite(value):
        raise InputError("non-finite Monte Carlo estimate")
    return MonteCarloValue(value, se)


def premium_confidence_interval(sample: TruncatedSample, k: int, u: float,
                                level: float = 0.95, mc_points: int = DEFAULT_MC_POINTS,
                                seed: RngSeed = 0,
                                bias: tuple[float, float] | None = None) -> PremiumEstimate:
    """Premium estimate with an asymptotic confidence interval.

    Plug-ins: the truncated-data estimates of ``gamma1`` and ``gamma2`` at ``k``,
    ``a = u/X_{n-k:n}``, the empirical tail copula, and
    ``X_{n-k:n} * (1 - F_n(X_{n-k:n}))`` for the normalising quantile and tail.
    The asymptotic bias is taken as zero unless ``bias = (lambda_star, tau1)``
    is given.
    """
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    est = truncated_tail_index(sample, k)
    g1, g2 = est.gamma1_hat, est.gamma2_hat
    pe = premium_estimate(sample, k, u, g1)
    if not g1 < g2:
        raise InputError(f"the interval requires gamma1_hat < gamma2_hat, got {g1:.4g}, {g2:.4g}")
    pivot = _pivot(sample, k)
    a = u / pivot
    s = theorem3_sigma_star(g1, g2, a, EmpiricalTailCopula(sample, k), mc_points, seed)
    if not s.value >= 0:
        raise NegativeVarianceError(f"plug-in premium variance {s.value:.6g} < 0 at k={k}")
    mu = 0.0
    if bias is not None:
        lam_star, tau1 = bias
        mu = lam_star / ((g1 - 1.0 - tau1) * (g1 - 1.0))
    scale = a ** (1.0 - 1.0 / g1) * pivot * pe.lb_survival_at_pivot / math.sqrt(k)
    zq = float(norm.ppf(0.5 + level / 2.0))
    centre = pe.pi_hat - mu * scale
    half = zq * math.sqrt(s.value) * scale
    ci = ConfidenceInterval(centre - half, centre + half, level)
    return PremiumEstimate(pe.u, pe.k, pe.pi_hat, pe.lb_survival_at_pivot, ci,
                           pe.mass_exhausted, g1, s.value)
