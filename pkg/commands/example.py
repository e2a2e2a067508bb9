"""Large-server worked example: S = 10^12, periodic rates, zeta_k = 1 + 1/k, doubling weights."""
import argparse
import logging
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
from rich.table import Table

import config
from commands.utils import RunConfig, common_parser, console, csv_provenance, emit, envelope_report, provenance
from ergo import Envelope, WeightSequence, decay_lower_bound, fit_envelope, tv_distance_bound
from errors import CertificationError
from kfe import (ProbabilityVector, assess_regime, check_regime_request, distance_trace, regime_window,
                 sample_block, write_trajectory_csv)
from qmodel import large_server_example, measure_essential_bound
from schemas import ComparisonRow, ExampleReport, RoundedRow, TruncationReportModel
from trunc import min_truncation_level, rounded_example_bounds, truncation_bounds

logger = logging.getLogger(__name__)

LEVEL = 120
HORIZON = 7.0
TARGET = 1e-6
SETTLE = 6.0
TRACE_STATE = 5
TRACE_HORIZON = 3.0
SAMPLES = 21
WITNESS_TOL = 1e-5


def _write_columns(path: Path, header: str, columns, meta: dict):
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        np.savetxt(fh, np.column_stack(columns), delimiter=",", fmt="%.17g", header=header, comments="")


def run_example(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    step = config.DEFAULT_STEP if cfg.step is None else cfg.step
    out_dir = Path(cfg.out or "example_out")
    out_dir.mkdir(parents=True, exist_ok=True)

    model = large_server_example()
    weights = WeightSequence.doubling()
    bound = measure_essential_bound(model)
    L = bound.value
    # zeta_k >= 1 and doubling weights give alpha >= mu + xi - lambda
    env = fit_envelope(decay_lower_bound(model), model.period)

    certificate = truncation_bounds(model, weights, env, LEVEL, HORIZON, 0, L=bound)
    if certificate.value("both") > TARGET:
        raise CertificationError("level 120 does not certify the example target",
                                 tv=certificate.tv_bound, mean=certificate.mean_bound)
    min_level, _ = min_truncation_level(model, weights, env, HORIZON, 0, TARGET, "both", L=bound)

    # one pass carries the regime anchor, its ergodicity witness and the traced state
    check_regime_request(model, model.period, WITNESS_TOL, SAMPLES)
    window = regime_window(SETTLE, model.period, SAMPLES, periodicity_profile=True)
    trace_times = np.linspace(0.0, TRACE_HORIZON, 7)
    starts = [ProbabilityVector.point_mass(LEVEL, k) for k in (0, LEVEL // 2, TRACE_STATE)]
    anchor, rival, traced = sample_block(model, LEVEL, starts, np.union1d(trace_times, window), h=step)
    regime = assess_regime(anchor.select(window), rival.select([SETTLE]).at(0), SAMPLES, WITNESS_TOL)
    meta = csv_provenance(cfg, model, n=LEVEL, settle=SETTLE, step=step)
    figures = [out_dir / "limit_trajectory.csv", out_dir / "empty_queue_probability.csv",
               out_dir / "limiting_mean.csv"]
    write_trajectory_csv(regime.trajectory, figures[0], meta)
    _write_columns(figures[1], "t,p0", [regime.trajectory.times, regime.trajectory.probs[:, 0]], meta)
    _write_columns(figures[2], "t,mean", [regime.trajectory.times, regime.trajectory.means], meta)

    trace = distance_trace(traced.select(trace_times), anchor.select(trace_times), weights)
    e_k = np.zeros(TRACE_STATE + 1)
    e_k[TRACE_STATE] = 1.0
    comparison = [ComparisonRow(t=row.t, measured_l1=row.l1,
                                certified_bound=tv_distance_bound(model, weights, 0.0, row.t, e_k, [1.0]),
                                closed_form_bound=2.0 ** (TRACE_STATE + 4) * math.exp(-3.0 * row.t))
                  for row in trace]

    stated = Envelope.from_constants(4.0, 3.0, "stated constants")
    rounded = []
    for n in (100, 110, min_level, LEVEL):
        exact = truncation_bounds(model, weights, stated, n, HORIZON, 0, L=5e12)
        tv, mean = rounded_example_bounds(n, HORIZON, 0)
        rounded.append(RoundedRow(n=n, exact_tv=exact.tv_bound, exact_mean=exact.mean_bound,
                                  rounded_tv=tv, rounded_mean=mean))

    table = Table(title="large-server example")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for name, value in (("W", f"{weights.W:g}"), ("log W_120", f"{weights.log_W_n(LEVEL):.6f}"),
                        ("L", f"{L:.6g} (grid step {bound.grid_step:.1e})"),
                        ("M", f"{env.M:.4f}"), ("a", f"{env.a:.4f}"),
                        ("distance bound, n=120, t=7", f"{certificate.tv_bound:.3g}"),
                        ("mean bound, n=120, t=7", f"{certificate.mean_bound:.3g}"),
                        ("minimal level for 1e-6", str(min_level)),
                        ("ergodicity witness", f"{regime.ergodicity_gap:.3g}"),
                        ("periodicity witness", f"{regime.profile_gap:.3g}")):
        table.add_row(name, value)
    console.print(table)

    comparison_table = Table(title=f"measured distance e_{TRACE_STATE} vs e_0 against its bounds")
    for column in ("t", "measured", "certified", "2^9 exp(-3t)"):
        comparison_table.add_column(column, justify="right")
    for row in comparison:
        comparison_table.add_row(f"{row.t:.2f}", f"{row.measured_l1:.3e}", f"{row.certified_bound:.3e}",
                                 f"{row.closed_form_bound:.3e}")
    console.print(comparison_table)

    report = ExampleReport(
        W=weights.W, log_W_n=weights.log_W_n(LEVEL), W_n=weights.W_n(LEVEL), L=L,
        L_grid_step=bound.grid_step,
        envelope=envelope_report(env), certified_level=LEVEL, min_level=min_level,
        certificate=TruncationReportModel(**asdict(certificate)),
        ergodicity_gap=regime.ergodicity_gap, periodicity_gap=regime.periodicity_gap,
        profile_gap=regime.profile_gap, figure_csv=[str(path) for path in figures],
        comparison=comparison, rounded=rounded, provenance=provenance(cfg, model),
    )
    emit(report, str(out_dir / "example_report.json"))
    emit(report)


def register(subparsers):
    parser = subparsers.add_parser("example", parents=[common_parser()],
                                   help="reproduce the large-server worked example")
    parser.add_argument("--step", type=float)
    parser.set_defaults(handler=run_example)
