import argparse
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from rich.console import Console

import config
from ergo import Envelope, WeightSequence
from errors import ConfigError, PreconditionError
from qmodel import QueueModel, large_server_example
from schemas import EnvelopeReport, Provenance, load_model, load_weight_table, model_hash

logger = logging.getLogger(__name__)

console = Console(stderr=True)


class RunConfig(BaseModel):
    """Validated command parameters; checked before any computation or output."""
    model_config = ConfigDict(extra="ignore")

    command: str
    model: Optional[str] = None
    weights: str = "doubling"
    k_eval: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=1)
    t0: float = Field(default=0.0, ge=0)
    t1: Optional[float] = Field(default=None, ge=0)
    step: Optional[float] = Field(default=None, gt=0)
    initial: int = Field(default=0, ge=0)
    target: Optional[float] = Field(default=None, gt=0)
    criterion: str = "both"
    settle: Optional[float] = Field(default=None, ge=0)
    period: Optional[float] = Field(default=None, gt=0)
    tol: float = Field(default=1e-5, ge=1e-12)
    samples: int = Field(default=21, ge=2)
    profile: bool = False
    paths: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)
    points: int = Field(default=8, ge=1)
    mode: Optional[str] = None
    eps: Optional[float] = Field(default=None, gt=0)
    out: Optional[str] = None

    @model_validator(mode="after")
    def check_interval(self):
        if self.t1 is not None and self.t1 < self.t0:
            raise ValueError("t1 must not precede t0")
        return self

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        try:
            return cls(**{key: value for key, value in vars(args).items() if value is not None})
        except ValidationError as exc:
            first = exc.errors()[0]
            loc = ".".join(str(part) for part in first["loc"]) or "arguments"
            raise PreconditionError(f"{loc}: {first['msg']}", command=args.command)

    def inputs(self) -> dict:
        inputs = self.model_dump(exclude_none=True, exclude={"command", "out"})
        inputs.setdefault("k_eval", config.K_EVAL)
        inputs["grid_points"] = config.GRID_POINTS
        return inputs


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--model", help="model JSON file (default: the large-server example)")
    parser.add_argument("--weights", help="doubling | geometric:R | custom:PATH")
    parser.add_argument("--k-eval", dest="k_eval", type=int, help="candidate states for inf_k alpha_k")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--verbose", action="store_true", default=None, help="debug logging")
    return parser


def add_horizon_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--t0", type=float)
    parser.add_argument("--t1", "--horizon", dest="t1", type=float)
    parser.add_argument("--step", type=float, help=f"RK4 step (default {config.DEFAULT_STEP:g})")
    parser.add_argument("--initial", type=int, help="initial state")


def parse_weights(spec: str) -> WeightSequence:
    kind, _, arg = spec.partition(":")
    if kind == "doubling" and not arg:
        return WeightSequence.doubling()
    if kind == "geometric":
        try:
            ratio = float(arg)
        except ValueError as exc:
            raise ConfigError(f"weights: bad geometric ratio {arg!r}", reason=str(exc))
        try:
            return WeightSequence.geometric(ratio)
        except PreconditionError as exc:
            raise ConfigError(f"weights: {exc.detail}", ratio=ratio)
    if kind == "custom" and arg:
        table = load_weight_table(arg)
        try:
            return WeightSequence.custom(table.table, table.tail_ratio)
        except PreconditionError as exc:
            raise ConfigError(f"weights: {exc.detail}", path=arg)
    raise ConfigError(f"weights: unknown weight spec {spec!r}")


def load_run_model(cfg: RunConfig) -> QueueModel:
    if cfg.model is None:
        logger.info("no --model given: using the large-server example")
        return large_server_example()
    return load_model(cfg.model)


def provenance(cfg: RunConfig, model: Optional[QueueModel] = None, **extra) -> Provenance:
    inputs = cfg.inputs()
    inputs.update(extra)
    return Provenance(tool=config.APP_NAME, version=config.VERSION, command=cfg.command,
                      model_hash=model_hash(model) if model is not None else None, inputs=inputs)


def csv_provenance(cfg: RunConfig, model: QueueModel, **extra) -> dict:
    meta = {"tool": config.APP_NAME, "version": config.VERSION, "command": cfg.command,
            "model_hash": model_hash(model)}
    meta.update(cfg.inputs())
    meta.update(extra)
    return meta


def envelope_report(env: Envelope) -> EnvelopeReport:
    return EnvelopeReport(M=env.M, log_M=env.log_M, a=env.a, strategy=env.strategy,
                          decay=env.alpha_description)


def emit(report: BaseModel, out: Optional[str] = None):
    """JSON report to the --out file when given, else to stdout."""
    text = report.model_dump_json(indent=2)
    if out:
        Path(out).write_text(text + "\n")
        logger.info("wrote %s", out)
    else:
        print(text)


def prepare_output(path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def eval_grid(t0: float, t1: float, points: int) -> np.ndarray:
    if points == 1:
        return np.array([t1])
    return np.linspace(t0, t1, points)
