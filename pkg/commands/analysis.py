import argparse
import logging
from dataclasses import asdict

import numpy as np

from commands.utils import (RunConfig, common_parser, emit, envelope_report, load_run_model, parse_weights,
                            provenance)
from ergo import bound_report, check_weak_ergodicity, regime_bounds, sweep_epsilon
from errors import PreconditionError
from schemas import BoundRowReport, BoundsReport, ErgodicityReport, RegimeReport

logger = logging.getLogger(__name__)


def verdict_report(verdict, weights) -> ErgodicityReport:
    return ErgodicityReport(status=verdict.status, reason=verdict.reason, weights=weights.describe,
                            period=verdict.period, period_mean=verdict.period_mean,
                            alpha_min=verdict.alpha_min, alpha_max=verdict.alpha_max,
                            argmin_trace=list(verdict.argmin_trace))


def run_check(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    model = load_run_model(cfg)
    weights = parse_weights(cfg.weights)
    verdict = check_weak_ergodicity(model, weights, cfg.k_eval)
    emit(verdict_report(verdict, weights), cfg.out)


def run_bounds(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    if cfg.mode not in (None, "catastrophe", "service"):
        raise PreconditionError(f"unknown regime mode {cfg.mode!r}")
    model = load_run_model(cfg)
    weights = parse_weights(cfg.weights)
    t1 = 7.0 if cfg.t1 is None else cfg.t1
    times = np.linspace(cfg.t0, t1, cfg.points)

    report = bound_report(model, weights, times, [cfg.initial], cfg.k_eval)
    regimes = []
    if cfg.mode is not None:
        for t in times:
            if cfg.eps is None:
                bound = sweep_epsilon(model, cfg.mode, float(t), cfg.initial, workers=cfg.workers or 1)
            else:
                bound = regime_bounds(model, cfg.mode, cfg.eps, float(t), cfg.initial)
            regimes.append(RegimeReport(**asdict(bound)))

    emit(BoundsReport(
        W=report.W,
        verdict=verdict_report(report.verdict, weights),
        envelope=envelope_report(report.envelope) if report.envelope else None,
        rows=[BoundRowReport(**asdict(row)) for row in report.rows],
        regimes=regimes,
        provenance=provenance(cfg, model),
    ), cfg.out)


def register(subparsers):
    check = subparsers.add_parser("check", parents=[common_parser()],
                                  help="weak-ergodicity verdict and decay-function statistics")
    check.set_defaults(handler=run_check)

    bounds = subparsers.add_parser("bounds", parents=[common_parser()],
                                   help="distance and limiting-mean bound tables")
    bounds.add_argument("--t0", type=float)
    bounds.add_argument("--t1", "--horizon", dest="t1", type=float)
    bounds.add_argument("--points", type=int, help="number of time points")
    bounds.add_argument("--initial", type=int, help="initial state k (compared with the empty queue)")
    bounds.add_argument("--mode", choices=["catastrophe", "service"], help="add regime bounds")
    bounds.add_argument("--eps", type=float, help="regime epsilon (default: sweep a log grid)")
    bounds.add_argument("--workers", type=int)
    bounds.set_defaults(handler=run_bounds)
