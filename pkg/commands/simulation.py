import argparse
import logging

from commands.utils import RunConfig, common_parser, emit, eval_grid, load_run_model, provenance
from errors import PreconditionError
from mc import simulate_estimate
from schemas import EstimateValue, SimulationReport

logger = logging.getLogger(__name__)


def run_simulate(args: argparse.Namespace):
    cfg = RunConfig.from_args(args)
    if cfg.t1 is None:
        raise PreconditionError("simulate needs --t1")
    model = load_run_model(cfg)
    paths = 10_000 if cfg.paths is None else cfg.paths
    times = eval_grid(cfg.t0, cfg.t1, cfg.points)

    estimate = simulate_estimate(model, cfg.initial, times, paths, cfg.seed, cfg.workers)
    means, errors = estimate.mean
    emit(SimulationReport(
        eval_times=times.tolist(),
        k0=cfg.initial,
        paths=paths,
        seed=cfg.seed,
        mean=[EstimateValue(value=m, stderr=e) for m, e in zip(means, errors)],
        states={str(k): [EstimateValue(value=p, stderr=e) for p, e in zip(*estimate.state_probs[k])]
                for k in sorted(estimate.state_probs)},
        provenance=provenance(cfg, model, paths=paths),
    ), cfg.out)


def register(subparsers):
    parser = subparsers.add_parser("simulate", parents=[common_parser()],
                                   help="Monte Carlo estimates by thinning")
    parser.add_argument("--t0", type=float)
    parser.add_argument("--t1", "--horizon", dest="t1", type=float)
    parser.add_argument("--points", type=int, help="evaluation times on [t0, t1] (default: t1 only)")
    parser.add_argument("--initial", type=int, help="initial state k0")
    parser.add_argument("--paths", type=int, help="number of paths (default 10000)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.set_defaults(handler=run_simulate, points=1)
