"""Tail-index estimation for randomly right-truncated data.

The estimator combines the Hill estimates of the observed truncated margin
(index ``gamma``) and of the truncation margin (index ``gamma2``) taken over
the same number ``k`` of top order statistics::

    gamma1_hat = gamma_hat * gamma2_hat / (gamma2_hat - gamma_hat)

Confidence intervals follow from its Gaussian limit, with plug-in estimates
for the asymptotic bias (second-order parameters) and variance (tail copula
of the observed pairs).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import norm

from .errors import DegenerateEstimateError, InputError, NegativeVarianceError
from .model import RngSeed, as_rng
from .sample import TruncatedSample

TAU_MIN, TAU_MAX = -10.0, -0.01
TAU_K_EXPONENT = 0.975
TAU_MIN_N = 10
DEFAULT_MC_POINTS = 100_000


@dataclass(frozen=True)
class TailIndexEstimate:
    k: int
    gamma_hat: float
    gamma2_hat: float
    gamma1_hat: float


class ConfidenceInterval(NamedTuple):
    lcb: float
    ucb: float
    level: float

    @property
    def length(self) -> float:
        return self.ucb - self.lcb

    def contains(self, value: float) -> bool:
        return self.lcb <= value <= self.ucb


class MonteCarloValue(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class InferenceReport:
    estimate: TailIndexEstimate
    tau_hat: float
    tau2_hat: float
    lambda_hat: float
    lambda2_hat: float
    c_hat: float
    c2_hat: float
    delta_hat: float
    delta_stderr: float
    mu_hat: float
    sigma2_hat: float
    ci: ConfidenceInterval

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = {"lcb": self.ci.lcb, "ucb": self.ci.ucb, "level": self.ci.level}
        return d


def _validate_sorted(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InputError("expected a one-dimensional array of order statistics")
    if v.size > 1 and np.any(np.diff(v) < 0):
        raise InputError("values must be sorted ascending")
    return v


def hill(sorted_values, k: int) -> float:
    """Hill estimator ``k^-1 sum_{i<=k} log(V_{n-i+1:n} / V_{n-k:n})``."""
    v = _validate_sorted(sorted_values)
    n = v.size
    if int(k) != k or not 1 <= k < n:
        raise InputError(f"k={k} must be an integer in [1, {n - 1}]")
    k = int(k)
    pivot = v[n - k - 1]
    if not pivot > 0:
        raise InputError(f"pivot order statistic must be positive, got {pivot}")
    return float(np.sum(np.log(v[n - k:] / pivot)) / k)


def _log_ratio_sums(v: np.ndarray, k: int) -> float:
    n = v.size
    return float(np.sum(np.log(v[n - k:] / v[n - k - 1])))


def truncated_tail_index(sample: TruncatedSample, k: int) -> TailIndexEstimate:
    """Single-fraction estimate of the tail index of the truncated variable.

    Raises
    ------
    DegenerateEstimateError
        If ``gamma2_hat <= gamma_hat`` at this ``k``.
    """
    n = sample.n
    if int(k) != k or not 1 < k < n:
        raise InputError(f"k={k} must be an integer with 1 < k < n={n}")
    k = int(k)
    xs, ys = sample.x_sorted, sample.y_sorted
    if not (xs[n - k - 1] > 0 and ys[n - k - 1] > 0):
        raise InputError("pivot order statistics must be positive")
    sx = _log_ratio_sums(xs, k)
    sy = _log_ratio_sums(ys, k)
    xtop, ytop = xs[n - k:], ys[n - k:]
    den = float(np.sum(np.log(xs[n - k - 1] * ytop / (ys[n - k - 1] * xtop))))
    gamma_hat, gamma2_hat = sx / k, sy / k
    if not den > 0:
        raise DegenerateEstimateError(
            f"degenerate configuration at k={k}: gamma2_hat={gamma2_hat:.6g} "
            f"<= gamma_hat={gamma_hat:.6g}", k, gamma_hat, gamma2_hat)
    return TailIndexEstimate(k, gamma_hat, gamma2_hat, sx * sy / (k * den))


def _trace_sums(sorted_values: np.ndarray, k_max: int) -> np.ndarray:
    # S(k) = sum_{i<=k} log(V_{n-i+1}/V_{n-k}) for k = 1..k_max, from logs
    # normalised by the maximum (invariant under exact rescaling).
    desc = sorted_values[::-1]
    logs = np.log(desc[:k_max + 1] / desc[0])
    k = np.arange(1, k_max + 1)
    return np.cumsum(logs[:k_max]) - k * logs[1:k_max + 1]


def gamma1_trace(sample: TruncatedSample, k_max: int | None = None):
    """Estimates for every ``k = 1..k_max`` at once.

    Returns ``(gamma_hat, gamma2_hat, gamma1_hat)`` arrays indexed by ``k - 1``;
    ``gamma1_hat`` is NaN wherever the estimator is degenerate (and at ``k = 1``).
    """
    n = sample.n
    k_max = n - 1 if k_max is None else min(int(k_max), n - 1)
    if k_max < 1:
        raise InputError("sample too small for a trace")
    sx = _trace_sums(sample.x_sorted, k_max)
    sy = _trace_sums(sample.y_sorted, k_max)
    k = np.arange(1, k_max + 1)
    den = sy - sx
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = np.where(den > 0, sx * sy / (k * den), np.nan)
    g1[0] = np.nan
    return sx / k, sy / k, g1


def _copula_index(k: int, s, clamp: bool) -> np.ndarray:
    m = np.floor(k * np.asarray(s, dtype=np.float64)).astype(np.int64)
    if clamp:
        m = np.maximum(m, 1)
    return m


def tail_copula_hat(sample: TruncatedSample, k: int, s: float, t: float,
                    clamp: bool = True) -> float:
    """Empirical tail copula ``k^-1 #{i : X_i among top [ks], Y_i among top [kt]}``.

    With ``clamp`` (the default) an index ``[ks] = 0`` is raised to 1, i.e. the
    threshold sits at the sample maximum.  Without it such arguments give 0,
    which keeps the estimate bounded by ``min(s, t)``.
    """
    n = sample.n
    if not (s > 0 and t > 0):
        raise InputError("s and t must be positive")
    a = int(_copula_index(k, s, clamp))
    b = int(_copula_index(k, t, clamp))
    if a > n - 1 or b > n - 1:
        raise InputError(f"[ks]={a}, [kt]={b} must not exceed n-1={n - 1}")
    if a == 0 or b == 0:
        return 0.0
    return int(np.count_nonzero((sample.x_rank_desc <= a) & (sample.y_rank_desc <= b))) / k


class EmpiricalTailCopula:
    """Vectorised empirical tail copula on ``(0, 1]^2`` via a cumulative count table."""

    def __init__(self, sample: TruncatedSample, k: int, clamp: bool = False):
        if not 1 <= k < sample.n:
            raise InputError(f"k={k} outside [1, n-1]")
        self.k = int(k)
        self.clamp = clamp
        rx, ry = sample.x_rank_desc, sample.y_rank_desc
        top = (rx <= k) & (ry <= k)
        table = np.zeros((k + 1, k + 1), dtype=np.int64)
        np.add.at(table, (rx[top], ry[top]), 1)
        self.table = table.cumsum(axis=0).cumsum(axis=1)

    def __call__(self, s, t):
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if np.any(s <= 0) or np.any(t <= 0) or np.any(s > 1) or np.any(t > 1):
            raise InputError("arguments must lie in (0, 1]")
        a = _copula_index(self.k, s, self.clamp)
        b = _copula_index(self.k, t, self.clamp)
        return self.table[a, b] / self.k


def _open_uniform(rng, size):
    tiny = np.finfo(np.float64).tiny
    return rng.uniform(tiny, 1.0, size)


def _antithetic_uniforms(rng, n_points: int, dim: int) -> np.ndarray:
    half = (n_points + 1) // 2
    u = _open_uniform(rng, (half, dim))
    # 1 - u can round to 0 only when u < 2**-54; nudge those into the open interval
    w = np.maximum(1.0 - u, np.finfo(np.float64).tiny)
    return np.stack([u, w])


def _pair_mean(h: np.ndarray) -> MonteCarloValue:
    # h has shape (2, half): antithetic partners share a column
    pm = h.mean(axis=0)
    se = float(pm.std(ddof=1) / math.sqrt(pm.size)) if pm.size > 1 else float("nan")
    return MonteCarloValue(float(pm.mean()), se)


def _check_admissible(R, s, t, vals) -> None:
    bound = np.minimum(s, t)
    if np.any(vals < -1e-12) or np.any(vals > bound + 1e-12):
        raise InputError("R must satisfy 0 <= R(s,t) <= min(s,t)")


def delta_functional(R: Callable, mc_points: int = DEFAULT_MC_POINTS,
                     seed: RngSeed = 0) -> MonteCarloValue:
    """Monte Carlo value of ``int int R(s,t)/(st) - int (R(s,1) - R(1,s)) ds + R(1,1)``.

    ``R`` must accept numpy arrays.  The double integral is rewritten over the
    two triangles ``t = s*w`` and ``s = t*w`` so that the integrand is bounded by 2
    for any admissible ``R``; antithetic pairs of uniforms are used throughout.
    """
    if mc_points < 2:
        raise InputError("mc_points must be at least 2")
    rng = as_rng(seed)
    u = _antithetic_uniforms(rng, mc_points, 2)
    s, w = u[..., 0], u[..., 1]
    sw = s * w
    r_lo = np.asarray(R(s, sw), dtype=np.float64)
    r_hi = np.asarray(R(sw, s), dtype=np.float64)
    _check_admissible(R, s, sw, r_lo)
    _check_admissible(R, sw, s, r_hi)
    ones = np.ones_like(s)
    diff = np.asarray(R(s, ones), dtype=np.float64) - np.asarray(R(ones, s), dtype=np.float64)
    r11 = float(np.asarray(R(np.ones(1), np.ones(1)), dtype=np.float64)[0])
    h = (r_lo + r_hi) / sw - diff
    est = _pair_mean(h)
    return MonteCarloValue(est.value + r11, est.stderr)


def second_order_tau_hat(sorted_values, k: int | None = None) -> float:
    """Second-order parameter estimate from log-excess moment ratios.

    Uses the ratio statistic with tuning exponent 0 at ``k = floor(n^0.975)``
    (capped at ``n - 1``); the result is clamped to ``[-10, -0.01]``.
    """
    v = _validate_sorted(sorted_values)
    n = v.size
    if n < TAU_MIN_N:
        raise InputError(f"need at least {TAU_MIN_N} observations, got {n}")
    if k is None:
        k = min(int(math.floor(n ** TAU_K_EXPONENT)), n - 1)
    if not 3 <= k <= n - 1:
        raise InputError(f"k={k} outside [3, {n - 1}]")
    pivot = v[n - k - 1]
    if not pivot > 0:
        raise InputError("values must be positive")
    z = np.log(v[n - k:] / pivot)
    m1, m2, m3 = z.mean(), (z ** 2).mean(), (z ** 3).mean()
    if not (m1 > 0 and m2 > 0 and m3 > 0):
        raise InputError("degenerate sample: top values are all equal")
    num = math.log(m1) - 0.5 * math.log(m2 / 2.0)
    den = 0.5 * math.log(m2 / 2.0) - math.log(m3 / 6.0) / 3.0
    if den == 0 or not math.isfinite(num / den):
        return TAU_MIN
    T = num / den
    if T == 3:
        return TAU_MIN
    rho = -abs(3.0 * (T - 1.0) / (T - 3.0))
    return float(min(max(rho, TAU_MIN), TAU_MAX))


def lambda_hat(sorted_values, k: int, gamma_est: float, tau_est: float) -> float:
    """Plug-in estimate of ``sqrt(k) A(n/k)`` from the order statistics at ``n-k`` and ``n-2k``."""
    v = _validate_sorted(sorted_values)
    n = v.size
    if int(k) != k or k < 1 or 2 * k >= n:
        raise InputError(f"k={k} requires 1 <= k and 2k < n={n}")
    if not tau_est < 0:
        raise InputError("tau_est must be negative")
    k = int(k)
    x_k, x_2k = v[n - k - 1], v[n - 2 * k - 1]
    a = 2.0 ** (-gamma_est)
    return math.sqrt(k) * tau_est * (x_2k - a * x_k) / (a * (2.0 ** (-tau_est) - 1.0) * x_k)


def bias_mean(c: float, c2: float, gamma: float, gamma2: float, lam: float,
              lam2: float, tau: float, tau2: float) -> float:
    """Asymptotic mean of ``sqrt(k)(gamma1_hat - gamma1)``.

    The Hill bias of the truncated margin enters with weight ``c/gamma`` and that
    of the truncation margin with weight ``-c2/gamma2``.
    """
    return c * lam / (gamma * (1.0 - tau)) - c2 * lam2 / (gamma2 * (1.0 - tau2))


def asymptotic_variance(c: float, c2: float, delta: float) -> float:
    return 2.0 * c * c + 2.0 * c2 * c2 - 2.0 * c * c2 * delta


def interval(gamma1_hat: float, k: int, mu: float, sigma: float,
             level: float) -> ConfidenceInterval:
    """Bounds for ``gamma1`` from ``sqrt(k)(gamma1_hat - gamma1) ~ N(mu, sigma^2)``."""
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    z = float(norm.ppf(0.5 + level / 2.0))
    centre = gamma1_hat - mu / math.sqrt(k)
    half = sigma * z / math.sqrt(k)
    return ConfidenceInterval(centre - half, centre + half, level)


def confidence_interval(sample: TruncatedSample, k: int, level: float = 0.95,
                        mc_points: int = DEFAULT_MC_POINTS, seed: RngSeed = 0,
                        tau_fixed: float | None = None,
                        tau2_fixed: float | None = None) -> InferenceReport:
    """Point estimate, plug-in bias and variance, and a confidence interval at ``k``.

    ``tau_fixed`` / ``tau2_fixed`` replace the data-driven second-order
    parameter estimates.

    Raises
    ------
    DegenerateEstimateError
        If the estimator is degenerate at ``k``.
    NegativeVarianceError
        If the plug-in variance is negative.
    """
    n = sample.n
    if 2 * k >= n:
        raise InputError(f"k={k} requires 2k < n={n}")
    est = truncated_tail_index(sample, k)
    g1, g, g2 = est.gamma1_hat, est.gamma_hat, est.gamma2_hat
    c, c2 = g1 * g1 / g, g1 * g1 / g2
    tau = second_order_tau_hat(sample.x_sorted) if tau_fixed is None else float(tau_fixed)
    tau2 = second_order_tau_hat(sample.y_sorted) if tau2_fixed is None else float(tau2_fixed)
    lam = lambda_hat(sample.x_sorted, k, g, tau)
    lam2 = lambda_hat(sample.y_sorted, k, g2, tau2)
    delta = delta_functional(EmpiricalTailCopula(sample, k), mc_points, seed)
    mu = bias_mean(c, c2, g, g2, lam, lam2, tau, tau2)
    sigma2 = asymptotic_variance(c, c2, delta.value)
    if not sigma2 >= 0:
        raise NegativeVarianceError(
            f"plug-in variance {sigma2:.6g} < 0 at k={k} (delta_hat={delta.value:.4g})")
    ci = interval(g1, k, mu, math.sqrt(sigma2), level)
    return InferenceReport(est, tau, tau2, lam, lam2, c, c2, delta.value, delta.stderr,
                           mu, sigma2, ci)
