import argparse
import logging

import config
from commands.utils import (RunConfig, add_horizon_arguments, common_parser, csv_provenance, emit,
                            load_run_model, prepare_output, provenance)
from errors import PreconditionError
from kfe import ProbabilityVector, integrate_forward, limiting_regime, write_trajectory_csv
from schemas import LimitReport

logger = logging.getLogger(__name__)


def run_solve(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    if cfg.t1 is None:
        raise PreconditionError("solve needs --t1")
    n = 120 if cfg.n is None else cfg.n
    if cfg.initial > n:
        raise PreconditionError("initial state above the truncation level", initial=cfg.initial, n=n)
    model = load_run_model(cfg)
    step = config.DEFAULT_STEP if cfg.step is None else cfg.step

    trajectory = integrate_forward(model, n, ProbabilityVector.point_mass(n, cfg.initial), cfg.t0, cfg.t1,
                                   h=step, record_every=args.record_every)
    out = prepare_output(cfg.out or "trajectory.csv")
    write_trajectory_csv(trajectory, out, csv_provenance(cfg, model, n=n, step=step,
                                                         max_drift=f"{trajectory.max_drift:.3g}"))
    logger.info("wrote %d rows to %s", len(trajectory), out)


def run_limit(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    model = load_run_model(cfg)
    n = 120 if cfg.n is None else cfg.n
    settle = 6.0 if cfg.settle is None else cfg.settle
    period = cfg.period or model.period
    if period is None:
        raise PreconditionError("limiting regime needs periodic rates")
    step = config.DEFAULT_STEP if cfg.step is None else cfg.step

    regime = limiting_regime(model, n, settle, period, cfg.tol, h=step, samples=cfg.samples,
                             periodicity_profile=cfg.profile)
    out = prepare_output(cfg.out or "limit.csv")
    write_trajectory_csv(regime.trajectory, out, csv_provenance(cfg, model, n=n, settle=settle,
                                                                period=period, step=step))
    emit(LimitReport(ergodicity_gap=regime.ergodicity_gap, periodicity_gap=regime.periodicity_gap,
                     profile_gap=regime.profile_gap, csv=str(out), provenance=provenance(cfg, model)))


def register(subparsers):
    solve = subparsers.add_parser("solve", parents=[common_parser()],
                                  help="integrate the truncated forward equations to CSV")
    solve.add_argument("--n", type=int, help="truncation level (default 120)")
    add_horizon_arguments(solve)
    solve.add_argument("--record-every", dest="record_every", type=int, default=config.RECORD_EVERY)
    solve.set_defaults(handler=run_solve)

    limit = subparsers.add_parser("limit", parents=[common_parser()],
                                  help="periodic limiting regime anchored at the empty queue")
    limit.add_argument("--n", type=int, help="truncation level (default 120)")
    limit.add_argument("--settle", type=float, help="settling time (default 6)")
    limit.add_argument("--period", type=float, help="regime period (default: common rate period)")
    limit.add_argument("--tol", type=float, help="witness tolerance (default 1e-5)")
    limit.add_argument("--samples", type=int, help="samples over one period (default 21)")
    limit.add_argument("--profile", action="store_true", default=None,
                       help="compare every sample with its shift by one period")
    limit.add_argument("--step", type=float)
    limit.set_defaults(handler=run_limit)
