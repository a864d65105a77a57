"""Command-line interface: ``truncext simulate|estimate|premium``.

Exit codes: 0 success, 2 input error, 3 degenerate estimation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

from .errors import (DegenerateEstimateError, InfiniteMeanError, InputError,
                     NegativeVarianceError, TruncextError)
from .k_select import DEFAULT_BETA, SelectionError, select_k
from .lynden_bell import premium_confidence_interval, premium_estimate
from .sample import TruncatedSample, read_csv
from .study import (MAX_K_RETRIES, StudyConfig, default_workers, format_rows,
                    run_ci_study, run_point_study)
from .tail_estimation import DEFAULT_MC_POINTS, confidence_interval, truncated_tail_index

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


def _k_spec(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k must be 'auto' or an integer, got {text!r}")
    if k < 2:
        raise argparse.ArgumentTypeError("--k must be at least 2")
    return k


def _resolve_k(sample: TruncatedSample, k: int | None, beta: float) -> int:
    if k is None:
        return select_k(sample, beta).k_star
    if k >= sample.n:
        raise InputError(f"k={k} must be below the sample size n={sample.n}")
    return k


def estimate_report(sample: TruncatedSample, k: int, level: float = 0.95,
                    mc_points: int = DEFAULT_MC_POINTS, seed: int = 0) -> dict:
    """Tail-index estimate and interval at ``k``, stepping down on degenerate ``k``.

    When the sample is too small for the interval the point estimate is still
    reported and ``ci_error`` explains why.
    """
    last: TruncextError | None = None
    for kk in range(k, max(k - MAX_K_RETRIES, 2) - 1, -1):
        try:
            est = truncated_tail_index(sample, kk)
        except DegenerateEstimateError as exc:
            last = exc
            continue
        try:
            report = confidence_interval(sample, kk, level, mc_points, seed)
        except (DegenerateEstimateError, NegativeVarianceError) as exc:
            last = exc
            continue
        except InputError as exc:
            return {"n": sample.n, "k_requested": k, "estimate": vars(est), "ci": None,
                    "ci_error": str(exc)}
        return {"n": sample.n, "k_requested": k, **report.to_dict()}
    raise last if last is not None else DegenerateEstimateError(f"no admissible k at or below {k}")


def premium_report(sample: TruncatedSample, k: int, u: float, level: float = 0.95,
                   mc_points: int = DEFAULT_MC_POINTS, seed: int = 0) -> dict:
    pe = premium_estimate(sample, k, u)
    out = {"n": sample.n, **pe.to_dict()}
    try:
        ci = premium_confidence_interval(sample, k, u, level, mc_points, seed)
    except (InputError, NegativeVarianceError) as exc:
        out["ci_error"] = str(exc)
    else:
        out.update(ci.to_dict())
    return out


def _table(d: dict, keys: Sequence[str]) -> str:
    lines = []
    for key in keys:
        v = d.get(key)
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{key:>22}  {v}")
    return "\n".join(lines)


def _cmd_simulate(args) -> int:
    cfg = StudyConfig(
        p_values=tuple(args.p), gamma1_values=tuple(args.gamma1), N_values=tuple(args.N),
        replicates=args.replicates, delta=args.delta, level=args.level, seed=args.seed,
        beta=args.rt_beta, mc_points=args.mc_points, tau_fixed=args.tau_fixed,
        tau2_fixed=args.tau2_fixed)
    run = run_ci_study if args.kind == "ci" else run_point_study
    rows = run(cfg, workers=args.workers, dump_dir=args.dump_replicates)
    sys.stdout.write(format_rows(rows, args.format, with_ci=args.kind == "ci"))
    return EXIT_OK


def _cmd_estimate(args) -> int:
    sample = read_csv(args.input)
    k = _resolve_k(sample, args.k, args.rt_beta)
    rep = estimate_report(sample, k, args.level, args.mc_points, args.seed)
    print(json.dumps(rep, indent=2))
    flat = {"n": rep["n"], "k": rep["estimate"]["k"], **rep["estimate"]}
    if rep.get("ci"):
        flat.update(lcb=rep["ci"]["lcb"], ucb=rep["ci"]["ucb"], level=rep["ci"]["level"])
    print(_table(flat, ["n", "k", "gamma_hat", "gamma2_hat", "gamma1_hat", "lcb", "ucb", "level"]),
          file=sys.stderr)
    if rep.get("ci_error"):
        print(f"no interval: {rep['ci_error']}", file=sys.stderr)
    return EXIT_OK


def _cmd_premium(args) -> int:
    sample = read_csv(args.input)
    k = _resolve_k(sample, args.k, args.rt_beta)
    rep = premium_report(sample, k, args.retention, args.level, args.mc_points, args.seed)
    print(json.dumps(rep, indent=2))
    flat = dict(rep)
    if rep.get("ci"):
        flat.update(lcb=rep["ci"]["lcb"], ucb=rep["ci"]["ucb"])
    print(_table(flat, ["n", "k", "u", "gamma1_hat", "pi_hat", "lb_survival_at_pivot",
                        "lcb", "ucb"]), file=sys.stderr)
    if rep.get("mass_exhausted"):
        print("warning: Lynden-Bell mass exhausted above the pivot", file=sys.stderr)
    if rep.get("ci_error"):
        print(f"no interval: {rep['ci_error']}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="truncext",
                                 description="Tail-index estimation for right-truncated data.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mc-points", type=int, default=DEFAULT_MC_POINTS)
        p.add_argument("--rt-beta", type=float, default=DEFAULT_BETA)

    sim = sub.add_parser("simulate", help="Monte Carlo study over the Burr grid")
    sim.add_argument("kind", choices=["point", "ci"])
    d = StudyConfig()
    sim.add_argument("--p", type=float, nargs="+", default=list(d.p_values))
    sim.add_argument("--gamma1", type=float, nargs="+", default=list(d.gamma1_values))
    sim.add_argument("--N", type=int, nargs="+", default=list(d.N_values))
    sim.add_argument("--replicates", type=int, default=d.replicates)
    sim.add_argument("--delta", type=float, default=d.delta)
    sim.add_argument("--format", choices=["md", "csv", "json"], default="md")
    sim.add_argument("--dump-replicates", metavar="DIR", default=None)
    sim.add_argument("--workers", type=int, default=default_workers())
    sim.add_argument("--tau-fixed", type=float, default=None)
    sim.add_argument("--tau2-fixed", type=float, default=None)
    common(sim)
    sim.set_defaults(seed=d.seed, func=_cmd_simulate)

    est = sub.add_parser("estimate", help="estimate the tail index from a CSV of x,y pairs")
    est.add_argument("--input", required=True)
    est.add_argument("--k", type=_k_spec, default=None, metavar="auto|INT")
    common(est)
    est.set_defaults(func=_cmd_estimate)

    pr = sub.add_parser("premium", help="excess-of-loss premium above a retention")
    pr.add_argument("--input", required=True)
    pr.add_argument("--retention", type=float, required=True)
    pr.add_argument("--k", type=_k_spec, default=None, metavar="auto|INT")
    common(pr)
    pr.set_defaults(func=_cmd_premium)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DegenerateEstimateError, NegativeVarianceError, InfiniteMeanError,
            SelectionError) as exc:
        print(f"truncext: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InputError as exc:
        print(f"truncext: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
