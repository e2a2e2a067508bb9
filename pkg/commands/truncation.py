import argparse
import logging
from dataclasses import asdict

from rich.table import Table

from commands.utils import (RunConfig, common_parser, console, emit, envelope_report, load_run_model,
                            parse_weights, provenance)
from ergo import decay_envelope, regime_weights
from errors import PreconditionError
from schemas import TruncateReport, TruncationReportModel
from trunc import corollary_bounds, min_truncation_level, regime_envelope, truncation_bounds

logger = logging.getLogger(__name__)


def run_truncate(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    if cfg.criterion not in ("tv", "mean", "both"):
        raise PreconditionError(f"unknown criterion {cfg.criterion!r}")
    model = load_run_model(cfg)
    t_max = 7.0 if cfg.t1 is None else cfg.t1
    target = 1e-6 if cfg.target is None else cfg.target

    if cfg.mode is None:
        weights = parse_weights(cfg.weights)
        env = decay_envelope(model, weights, cfg.k_eval)
    else:
        if cfg.eps is None:
            raise PreconditionError("--mode needs --eps")
        weights = regime_weights(cfg.eps)
        env = regime_envelope(model, cfg.mode, cfg.eps, cfg.initial)

    n, report = min_truncation_level(model, weights, env, t_max, cfg.initial, target, cfg.criterion)
    if cfg.n is not None:
        if cfg.mode is None:
            report = truncation_bounds(model, weights, env, cfg.n, t_max, cfg.initial)
        else:
            report = corollary_bounds(model, cfg.mode, cfg.eps, cfg.n, t_max, cfg.initial, envelope=env)

    table = Table(title=f"truncation certificate ({weights.describe}, t <= {t_max:g}, e_{cfg.initial})")
    for column in ("n", "distance bound", "mean bound", "M", "a"):
        table.add_column(column, justify="right")
    table.add_row(str(report.n), f"{report.tv_bound:.4g}", f"{report.mean_bound:.4g}",
                  f"{report.M:.4g}", f"{report.a:.4g}")
    console.print(table)
    console.print(f"minimal certified level for {cfg.criterion} <= {target:g}: n = {n}")

    emit(TruncateReport(target=target, criterion=cfg.criterion, certified_level=n,
                        report=TruncationReportModel(**asdict(report)), envelope=envelope_report(env),
                        provenance=provenance(cfg, model)), cfg.out)


def register(subparsers):
    parser = subparsers.add_parser("truncate", parents=[common_parser()],
                                   help="minimal certified truncation level and its error bounds")
    parser.add_argument("--t1", "--horizon", dest="t1", type=float, help="horizon t_max (default 7)")
    parser.add_argument("--initial", type=int, help="initial state j")
    parser.add_argument("--target", type=float, help="target error (default 1e-6)")
    parser.add_argument("--criterion", choices=["tv", "mean", "both"])
    parser.add_argument("--n", type=int, help="also report the bounds at this level")
    parser.add_argument("--mode", choices=["catastrophe", "service"], help="regime weights d_k = (1+eps)^k")
    parser.add_argument("--eps", type=float)
    parser.set_defaults(handler=run_truncate)
