"""Monte Carlo study harness for the truncated tail-index estimator.

Each ``(p, gamma1, N)`` cell draws ``replicates`` independent truncated Burr
samples.  Replicate ``r`` of a cell always uses the stream derived from
``(seed, cell key, r)``, so results do not depend on the number of worker
processes or on which other cells are run.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateEstimateError, InputError, NegativeVarianceError, TruncextError
from .k_select import DEFAULT_BETA, select_k
from .model import model_from_p, sample_truncated_pairs
from .sample import TruncatedSample
from .tail_estimation import (DEFAULT_MC_POINTS, InferenceReport, confidence_interval,
                              truncated_tail_index)

MAX_K_RETRIES = 10


@dataclass(frozen=True)
class StudyConfig:
    p_values: tuple[float, ...] = (0.7, 0.8, 0.9)
    gamma1_values: tuple[float, ...] = (0.6, 0.8)
    N_values: tuple[int, ...] = (500, 1000, 1500)
    replicates: int = 200
    delta: float = 1.0
    level: float = 0.95
    seed: int = 20240601
    beta: float = DEFAULT_BETA
    mc_points: int = DEFAULT_MC_POINTS
    tau_fixed: float | None = None
    tau2_fixed: float | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise InputError("replicates must be positive")
        for p in self.p_values:
            if not 0 < p < 1:
                raise InputError(f"p={p} outside (0, 1)")
        for g in self.gamma1_values:
            if not g > 0:
                raise InputError(f"gamma1={g} must be positive")
        for N in self.N_values:
            if int(N) != N or N < 1:
                raise InputError(f"N={N} must be a positive integer")
        if not 0 < self.level < 1:
            raise InputError("level must lie in (0, 1)")

    def cells(self) -> list[tuple[float, float, int]]:
        return [(p, g, int(N)) for p in self.p_values for g in self.gamma1_values
                for N in self.N_values]


@dataclass(frozen=True)
class SimulationRow:
    p: float
    gamma1: float
    N: int
    mean_n: float
    mean_k: float
    mean_gamma1_hat: float
    bias: float
    rmse: float
    mean_lcb: float
    mean_ucb: float
    coverage: float
    mean_length: float
    n_valid: int
    incomplete: bool


ROW_FIELDS = [f.name for f in fields(SimulationRow)]


@dataclass(frozen=True)
class ReplicateResult:
    rep: int
    n: int
    k: int
    gamma1_hat: float
    lcb: float = math.nan
    ucb: float = math.nan
    ok: bool = True
    note: str = ""


def cell_key(p: float, gamma1: float, N: int, delta: float) -> int:
    """Stable 32-bit identifier of a study cell."""
    text = f"{float(p)!r}|{float(gamma1)!r}|{int(N)}|{float(delta)!r}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "little")


def replicate_seeds(seed: int, key: int, rep: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent streams for the sample draw and for the Monte Carlo integration."""
    return (np.random.SeedSequence(seed, spawn_key=(key, rep, 0)),
            np.random.SeedSequence(seed, spawn_key=(key, rep, 1)))


def ci_with_retries(sample: TruncatedSample, k: int, level: float, mc_points: int, seed,
                    tau_fixed=None, tau2_fixed=None,
                    max_retries: int = MAX_K_RETRIES) -> InferenceReport:
    """Run :func:`confidence_interval` at ``k``, stepping down one fraction at a
    time on degenerate or negative-variance failures."""
    last: TruncextError | None = None
    for kk in range(k, max(k - max_retries, 1) - 1, -1):
        if kk < 2:
            break
        try:
            return confidence_interval(sample, kk, level, mc_points, seed,
                                       tau_fixed=tau_fixed, tau2_fixed=tau2_fixed)
        except (DegenerateEstimateError, NegativeVarianceError) as exc:
            last = exc
    raise last if last is not None else DegenerateEstimateError(f"no admissible k at or below {k}")


def _run_one(args) -> ReplicateResult:
    cfg, p, gamma1, N, rep, with_ci = args
    model = model_from_p(p, gamma1, cfg.delta)
    s_seed, mc_seed = replicate_seeds(cfg.seed, cell_key(p, gamma1, N, cfg.delta), rep)
    sample = sample_truncated_pairs(model, N, s_seed)
    n = sample.n
    try:
        k = select_k(sample, cfg.beta).k_star
        if not with_ci:
            return ReplicateResult(rep, n, k, truncated_tail_index(sample, k).gamma1_hat)
        report = ci_with_retries(sample, k, cfg.level, cfg.mc_points, mc_seed,
                                 cfg.tau_fixed, cfg.tau2_fixed)
    except TruncextError as exc:
        return ReplicateResult(rep, n, 0, math.nan, ok=False, note=type(exc).__name__)
    return ReplicateResult(rep, n, report.estimate.k, report.estimate.gamma1_hat,
                           report.ci.lcb, report.ci.ucb)


def aggregate(p: float, gamma1: float, N: int, results: Sequence[ReplicateResult],
              with_ci: bool) -> SimulationRow:
    """Reduce replicate results (in replicate order) to a table row."""
    good = [r for r in results if r.ok]
    nan = math.nan
    if not good:
        return SimulationRow(p, gamma1, N, nan, nan, nan, nan, nan, nan, nan, nan, nan, 0, True)
    est = np.array([r.gamma1_hat for r in good])
    mean_est = float(est.mean())
    row = dict(
        mean_n=float(np.mean([r.n for r in results])),
        mean_k=float(np.mean([r.k for r in good])),
        mean_gamma1_hat=mean_est,
        bias=mean_est - gamma1,
        rmse=float(math.sqrt(np.mean((est - gamma1) ** 2))),
        mean_lcb=nan, mean_ucb=nan, coverage=nan, mean_length=nan,
    )
    if with_ci:
        lcb = np.array([r.lcb for r in good])
        ucb = np.array([r.ucb for r in good])
        row.update(mean_lcb=float(lcb.mean()), mean_ucb=float(ucb.mean()),
                   coverage=float(np.mean((lcb <= gamma1) & (gamma1 <= ucb))),
                   mean_length=float(np.mean(ucb - lcb)))
    incomplete = 2 * (len(results) - len(good)) > len(results)
    return SimulationRow(p, gamma1, N, n_valid=len(good), incomplete=incomplete, **row)


def _run(config: StudyConfig, with_ci: bool, workers: int | None,
         dump_dir: str | Path | None) -> list[SimulationRow]:
    cells = config.cells()
    units = [(config, p, g, N, r, with_ci) for (p, g, N) in cells
             for r in range(config.replicates)]
    workers = workers or 1
    if workers == 1:
        results = [_run_one(u) for u in units]
    else:
        chunk = max(1, len(units) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, units, chunksize=chunk))
    rows = []
    R = config.replicates
    for i, (p, g, N) in enumerate(cells):
        cell_results = results[i * R:(i + 1) * R]
        rows.append(aggregate(p, g, N, cell_results, with_ci))
        if dump_dir is not None:
            dump_replicates(cell_results, Path(dump_dir) / f"cell_p{p}_g{g}_N{N}.csv")
    return rows


def run_point_study(config: StudyConfig, workers: int | None = 1,
                    dump_dir: str | Path | None = None) -> list[SimulationRow]:
    """Bias and rmse of the tail-index estimate for every cell of ``config``."""
    return _run(config, False, workers, dump_dir)


def run_ci_study(config: StudyConfig, workers: int | None = 1,
                 dump_dir: str | Path | None = None) -> list[SimulationRow]:
    """As :func:`run_point_study`, plus confidence-interval coverage and length."""
    return _run(config, True, workers, dump_dir)


def dump_replicates(results: Iterable[ReplicateResult], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [f.name for f in fields(ReplicateResult)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in results:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in asdict(r).values()])


def load_replicates(path: str | Path) -> list[ReplicateResult]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append(ReplicateResult(int(rec["rep"]), int(rec["n"]), int(rec["k"]),
                                       float(rec["gamma1_hat"]), float(rec["lcb"]),
                                       float(rec["ucb"]), rec["ok"] == "True", rec["note"]))
    return out


def format_rows(rows: Sequence[SimulationRow], fmt: str = "md", with_ci: bool = True) -> str:
    if fmt == "json":
        return json.dumps([asdict(r) for r in rows], indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in ROW_FIELDS])
        return buf.getvalue()
    if fmt != "md":
        raise InputError(f"unknown format {fmt!r}")
    if with_ci:
        head = ["p", "gamma1", "N", "lcb-ucb", "covpr", "length"]
        body = [[f"{r.p:.2f}", f"{r.gamma1:.2f}", str(r.N),
                 f"{r.mean_lcb:.3f}-{r.mean_ucb:.3f}", f"{r.coverage:.2f}",
                 f"{r.mean_length:.3f}"] for r in rows]
    else:
        head = ["p", "gamma1", "N", "n", "k", "gamma1_hat", "bias", "rmse"]
        body = [[f"{r.p:.2f}", f"{r.gamma1:.2f}", str(r.N), f"{r.mean_n:.0f}",
                 f"{r.mean_k:.0f}", f"{r.mean_gamma1_hat:.3f}", f"{r.bias:.3f}",
                 f"{r.rmse:.3f}"] for r in rows]
    for r, line in zip(rows, body):
        if r.incomplete:
            line[-1] += " (incomplete)"
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    lines += ["| " + " | ".join(b) + " |" for b in body]
    return "\n".join(lines) + "\n"


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
