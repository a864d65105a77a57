"""Acceptance gate.

Each criterion is a test that records one PASS/FAIL line; the lines are printed
in the terminal summary (see ``conftest.py``).  Run directly with
``python tests/test_acceptance.py`` to print them without pytest.
"""

from __future__ import annotations

import math
import sys

import numpy as np
import pytest

from truncext.errors import TruncextError
from truncext.k_select import select_k
from truncext.lynden_bell import lynden_bell_cdf, lynden_bell_survival, premium_estimate
from truncext.model import (BurrTruncationModel, lemma2_limit_check, model_from_p,
                            pareto_survival, sample_truncated_pairs, true_premium)
from truncext.sample import TruncatedSample, count_le
from truncext.study import StudyConfig, run_ci_study, run_point_study
from truncext.tail_estimation import EmpiricalTailCopula, delta_functional, truncated_tail_index

SEED = 20240601
RESULTS: list[str] = []

# (p, N) -> {gamma1: (k, gamma1_hat, bias, rmse)}
TABLE1 = {
    (0.7, 500): {0.6: (15, 0.515, -0.084, 0.299), 0.8: (15, 0.673, -0.127, 0.356)},
    (0.7, 1000): {0.6: (35, 0.555, -0.044, 0.264), 0.8: (32, 0.704, -0.095, 0.307)},
    (0.7, 1500): {0.6: (50, 0.554, -0.046, 0.212), 0.8: (51, 0.751, -0.049, 0.259)},
    (0.8, 500): {0.6: (18, 0.521, -0.079, 0.233), 0.8: (18, 0.723, -0.077, 0.351)},
    (0.8, 1000): {0.6: (43, 0.566, -0.034, 0.181), 0.8: (40, 0.713, -0.087, 0.273)},
    (0.8, 1500): {0.6: (64, 0.566, -0.033, 0.145), 0.8: (64, 0.752, -0.048, 0.203)},
    (0.9, 500): {0.6: (22, 0.547, -0.053, 0.186), 0.8: (20, 0.702, -0.098, 0.295)},
    (0.9, 1000): {0.6: (45, 0.558, -0.042, 0.148), 0.8: (49, 0.747, -0.053, 0.189)},
    (0.9, 1500): {0.6: (76, 0.577, -0.023, 0.118), 0.8: (77, 0.755, -0.045, 0.151)},
}

# (p, N) -> {gamma1: (lcb, ucb, covpr, length)}
TABLE2 = {
    (0.7, 500): {0.6: (0.226, 0.993, 0.94, 0.767), 0.8: (0.294, 1.199, 0.92, 0.905)},
    (0.7, 1000): {0.6: (0.319, 0.851, 0.94, 0.532), 0.8: (0.428, 1.099, 0.91, 0.671)},
    (0.7, 1500): {0.6: (0.396, 0.801, 0.90, 0.405), 0.8: (0.516, 1.043, 0.89, 0.527)},
    (0.8, 500): {0.6: (0.242, 0.880, 0.93, 0.638), 0.8: (0.313, 1.158, 0.93, 0.845)},
    (0.8, 1000): {0.6: (0.376, 0.790, 0.92, 0.414), 0.8: (0.497, 1.041, 0.92, 0.544)},
    (0.8, 1500): {0.6: (0.436, 0.759, 0.91, 0.323), 0.8: (0.576, 1.003, 0.91, 0.427)},
    (0.9, 500): {0.6: (0.317, 0.820, 0.90, 0.503), 0.8: (0.438, 1.085, 0.92, 0.647)},
    (0.9, 1000): {0.6: (0.408, 0.750, 0.91, 0.342), 0.8: (0.540, 0.998, 0.90, 0.458)},
    (0.9, 1500): {0.6: (0.445, 0.727, 0.90, 0.282), 0.8: (0.591, 0.965, 0.90, 0.374)},
}


def _record(name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _cells(rows):
    return {(r.p, r.gamma1, r.N): r for r in rows}


def check_table1() -> bool:
    rows = _cells(run_point_study(StudyConfig(seed=SEED), workers=1))
    bad = []
    for (p, N), by_g in TABLE1.items():
        for g1, (_, _, bias, rmse) in by_g.items():
            r = rows[(p, g1, N)]
            if not (abs(r.bias - bias) <= 0.06 and abs(r.rmse - rmse) <= 0.08):
                bad.append(f"({p},{g1},{N}) bias {r.bias:+.3f} vs {bias:+.3f}, "
                           f"rmse {r.rmse:.3f} vs {rmse:.3f}")
    detail = f"{18 - len(bad)}/18 cells within |dbias|<=0.06, |drmse|<=0.08"
    if bad:
        detail += "; first misses: " + "; ".join(bad[:3])
    return _record("1 Table-1 reproduction", not bad, detail)


def check_table2() -> bool:
    rows = _cells(run_ci_study(StudyConfig(seed=SEED), workers=1))
    bad = []
    for (p, N), by_g in TABLE2.items():
        for g1, (_, _, cov, length) in by_g.items():
            r = rows[(p, g1, N)]
            if not (abs(r.coverage - cov) <= 0.06 and abs(r.mean_length - length) <= 0.12):
                bad.append(f"({p},{g1},{N}) covpr {r.coverage:.2f} vs {cov:.2f}, "
                           f"length {r.mean_length:.3f} vs {length:.3f}")
    detail = f"{18 - len(bad)}/18 cells within |dcov|<=0.06, |dlength|<=0.12"
    if bad:
        detail += "; first misses: " + "; ".join(bad[:3])
    return _record("2 Table-2 reproduction", not bad, detail)


def check_small_oracles() -> bool:
    hand = TruncatedSample.from_pairs([(1, 1), (2, 3), (4, 9), (8, 27)])
    l2, l3 = math.log(2), math.log(3)
    e1 = abs(truncated_tail_index(hand, 2).gamma1_hat - 1.5 * l2 * l3 / (l3 - l2))
    d0 = delta_functional(lambda s, t: np.zeros_like(s), 100_000, SEED)
    dm = delta_functional(np.minimum, 100_000, SEED)
    rng = np.random.default_rng(SEED)
    x = rng.pareto(1.0, 500) + 1
    s = TruncatedSample.from_arrays(x, np.full(500, 2 * x.max()))
    ecdf_ok = all(lynden_bell_cdf(s, q) == count_le(s, "X", q) / s.n
                  for q in np.concatenate([x, [0.5, 3 * x.max()]]))
    ok = e1 <= 1e-10 and d0.value == 0.0 and abs(dm.value - 3) <= 3 * dm.stderr and ecdf_ok
    return _record("3 exact small-instance oracles", ok,
                   f"hand-sample error {e1:.1e}; delta(0)={d0.value}; "
                   f"delta(min)={dm.value} (se {dm.stderr:.1e}); Lynden-Bell==ECDF {ecdf_ok}")


def check_theorem2() -> bool:
    m = BurrTruncationModel(0.6, 1.4)
    vals = []
    for r in range(300):
        s = sample_truncated_pairs(m, 5000, np.random.SeedSequence(SEED, spawn_key=(r,)))
        k = int(s.n ** 0.6)
        piv = s.x_sorted[s.n - k - 1]
        vals.append(math.sqrt(k) * (lynden_bell_survival(s, piv) / m.survival_x(piv) - 1))
    v = float(np.var(vals, ddof=1))
    return _record("4 Theorem-2 variance", abs(v / 1.225 - 1) <= 0.2,
                   f"sample variance {v:.4f} vs 1.225 (tolerance 20%)")


def check_lemma2() -> bool:
    m = BurrTruncationModel(0.6, 1.4, 1.0)
    v = lemma2_limit_check(m, 1e6)
    target = m.gamma1 / m.gamma
    return _record("5 Lemma-2 limit", abs(v / target - 1) <= 0.05,
                   f"t=1e6 value {v:.5f} vs {target:.5f}")


def check_premium() -> bool:
    q = true_premium(0.6, lambda x: pareto_survival(x, 0.6), 10.0)
    e_pareto = abs(q - 1.5 * 10 ** (-2 / 3))
    m = model_from_p(0.9, 0.6)
    N = 20_000
    u = m.quantile_x(1 - 5 / N)
    P = m.premium(u)
    errs = []
    for r in range(50):
        s = sample_truncated_pairs(m, N, np.random.SeedSequence(SEED, spawn_key=(r,)))
        try:
            errs.append(abs(premium_estimate(s, select_k(s).k_star, u).pi_hat / P - 1))
        except TruncextError:
            errs.append(math.inf)
    med = float(np.median(errs))
    return _record("6 premium sanity", e_pareto <= 1e-6 and med < 0.35,
                   f"Pareto quadrature error {e_pareto:.1e}; "
                   f"median relative error {med:.3f} (need < 0.35)")


def check_invariance() -> bool:
    notes = []
    m = model_from_p(0.9, 0.6)
    for r in range(10):
        s = sample_truncated_pairs(m, 1500, np.random.SeedSequence(SEED, spawn_key=(r,)))
        k = select_k(s).k_star
        g1 = truncated_tail_index(s, k).gamma1_hat
        u = 4 * s.x_sorted[s.n - k - 1]
        pi = premium_estimate(s, k, u).pi_hat if g1 < 1 else None
        for e in (-9, -1, 3, 17):
            c = 2.0 ** e
            sc = s.scaled(c)
            kc = select_k(sc).k_star
            if kc != k or truncated_tail_index(sc, k).gamma1_hat != g1:
                notes.append(f"scale 2^{e} changed k* or gamma1_hat")
            if pi is not None and premium_estimate(sc, k, u * c).pi_hat != c * pi:
                notes.append(f"premium not homogeneous at 2^{e}")
        d = delta_functional(EmpiricalTailCopula(s, k), 20_000, r)
        if abs(d.value) > 4:
            notes.append(f"|delta_hat|={abs(d.value):.3f}")
    cfg = StudyConfig(p_values=(0.8,), gamma1_values=(0.6,), N_values=(500,), replicates=16,
                      mc_points=5000, seed=SEED)
    if run_ci_study(cfg, workers=1) != run_ci_study(cfg, workers=3):
        notes.append("study output depends on worker count")
    return _record("7 invariance suite", not notes,
                   "scale invariance, premium homogeneity (powers of two), |delta_hat|<=4, "
                   "worker determinism" + ("" if not notes else " -- " + "; ".join(notes[:3])))


CHECKS = [check_table1, check_table2, check_small_oracles, check_theorem2, check_lemma2,
          check_premium, check_invariance]


@pytest.mark.acceptance
@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__ for c in CHECKS])
def test_criterion(check):
    assert check(), RESULTS[-1]


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
