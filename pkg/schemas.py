import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import CatQueueError, ConfigError, PreconditionError
from qmodel import CatastropheProfile, QueueModel, RateExpr, StepTerm, TrigTerm


class TrigTermSpec(BaseModel):
    sin: float = 0.0
    cos: float = 0.0
    freq: float = 1.0


class StepTermSpec(BaseModel):
    start: float
    end: float
    level: float


class RateSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    const: float = 0.0
    trig: List[TrigTermSpec] = []
    step: List[StepTermSpec] = []

    def to_rate(self) -> RateExpr:
        return RateExpr(const_term=self.const,
                        trig_terms=tuple(TrigTerm(t.sin, t.cos, t.freq) for t in self.trig),
                        step_terms=tuple(StepTerm(s.start, s.end, s.level) for s in self.step))

    @classmethod
    def from_rate(cls, rate: RateExpr) -> "RateSpec":
        return cls(const=rate.const_term,
                   trig=[TrigTermSpec(sin=t.sin_amp, cos=t.cos_amp, freq=t.freq) for t in rate.trig_terms],
                   step=[StepTermSpec(start=s.start, end=s.end, level=s.level) for s in rate.step_terms])


class ConstantZeta(BaseModel):
    kind: Literal["constant"] = "constant"
    c: float = 1.0


class OnePlusCOverKZeta(BaseModel):
    kind: Literal["one_plus_c_over_k"]
    c: float = 1.0


class TableZeta(BaseModel):
    kind: Literal["table_with_tail"]
    values: List[float]
    tail: float


ZetaSpec = Annotated[Union[ConstantZeta, OnePlusCOverKZeta, TableZeta], Field(discriminator="kind")]


class ModelConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    S: int
    lam: RateSpec = Field(alias="lambda")
    mu: RateSpec
    xi: RateSpec = RateSpec()
    zeta: ZetaSpec = ConstantZeta()

    @field_validator("S", mode="before")
    @classmethod
    def parse_servers(cls, value):
        # integers, integral floats and decimal strings such as "1000000000000"
        if isinstance(value, bool):
            raise ValueError("number of servers must be an integer")
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("number of servers must be an integer")
            value = int(value)
        if isinstance(value, str):
            if not value.strip().isdigit():
                raise ValueError("number of servers must be a decimal integer string")
            value = int(value.strip())
        if isinstance(value, int) and value < 1:
            raise ValueError("number of servers must be positive")
        return value

    def to_model(self) -> QueueModel:
        rates = {}
        for name, spec in (("lambda", self.lam), ("mu", self.mu), ("xi", self.xi)):
            try:
                rates[name] = spec.to_rate()
            except PreconditionError as exc:
                raise ConfigError(f"{name}: {exc.detail}", **exc.context)
        try:
            if isinstance(self.zeta, TableZeta):
                zeta = CatastropheProfile.table_with_tail(self.zeta.values, self.zeta.tail)
            else:
                zeta = CatastropheProfile(kind=self.zeta.kind, c=self.zeta.c)
        except PreconditionError as exc:
            raise ConfigError(f"zeta: {exc.detail}", **exc.context)
        return QueueModel(self.S, rates["lambda"], rates["mu"], rates["xi"], zeta)

    @classmethod
    def from_model(cls, model: QueueModel) -> "ModelConfig":
        zeta = model.zeta
        if zeta.kind == "table_with_tail":
            zeta_spec = TableZeta(kind="table_with_tail", values=list(zeta.values), tail=zeta.tail)
        elif zeta.kind == "one_plus_c_over_k":
            zeta_spec = OnePlusCOverKZeta(kind="one_plus_c_over_k", c=zeta.c)
        else:
            zeta_spec = ConstantZeta(c=zeta.c)
        return cls(S=model.servers, lam=RateSpec.from_rate(model.lam), mu=RateSpec.from_rate(model.mu),
                   xi=RateSpec.from_rate(model.xi), zeta=zeta_spec)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True), sort_keys=True, separators=(",", ":"))


class WeightTableConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: List[float]
    tail_ratio: float


def _config_error(exc: ValidationError, path) -> ConfigError:
    first = exc.errors()[0]
    loc = ".".join(str(part) for part in first["loc"]) or "<root>"
    return ConfigError(f"{loc}: {first['msg']}", path=str(path), errors=len(exc.errors()))


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", path=str(path))


def load_model(path) -> QueueModel:
    try:
        config = ModelConfig.model_validate_json(_read(path))
    except ValidationError as exc:
        raise _config_error(exc, path)
    return config.to_model()


def load_weight_table(path) -> WeightTableConfig:
    try:
        return WeightTableConfig.model_validate_json(_read(path))
    except ValidationError as exc:
        raise _config_error(exc, path)


def model_hash(model: QueueModel) -> str:
    return hashlib.sha256(ModelConfig.from_model(model).canonical_json().encode()).hexdigest()


# ── reports ──────────────────────────────────────────────────────────────────

class Provenance(BaseModel):
    tool: str
    version: str
    command: str
    model_hash: Optional[str] = None
    inputs: Dict[str, Any] = {}


class EstimateValue(BaseModel):
    value: float
    stderr: float


class ErgodicityReport(BaseModel):
    status: Literal["yes", "no", "undetermined"]
    reason: str
    weights: str
    period: Optional[float] = None
    period_mean: Optional[float] = None
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    argmin_trace: List[Tuple[float, int]] = []


class EnvelopeReport(BaseModel):
    M: float
    log_M: float
    a: float
    strategy: str
    decay: str


class BoundRowReport(BaseModel):
    t: float
    initial_k: int
    tv_bound: float
    mean_bound: Optional[float] = None


class RegimeReport(BaseModel):
    mode: str
    eps: float
    t: float
    k: int
    tv_bound: float
    mean_bound: float
    exponent: float
    W: float
    log_norm_certified: bool


class BoundsReport(BaseModel):
    W: float
    verdict: ErgodicityReport
    envelope: Optional[EnvelopeReport] = None
    rows: List[BoundRowReport]
    regimes: List[RegimeReport] = []
    provenance: Provenance


class TruncationReportModel(BaseModel):
    n: int
    t: float
    j: int
    tv_bound: float
    mean_bound: float
    L: float
    M: float
    a: float
    log_W_n: float
    d1: float
    d_j1: float
    weights: str
    L_grid_step: Optional[float] = None


class TruncateReport(BaseModel):
    target: float
    criterion: str
    certified_level: int
    report: TruncationReportModel
    envelope: EnvelopeReport
    provenance: Provenance


class LimitReport(BaseModel):
    ergodicity_gap: float
    periodicity_gap: float
    profile_gap: Optional[float] = None
    csv: Optional[str] = None
    provenance: Provenance


class SimulationReport(BaseModel):
    eval_times: List[float]
    k0: int
    paths: int
    seed: int
    mean: List[EstimateValue]
    states: Dict[str, List[EstimateValue]]
    provenance: Provenance


class ComparisonRow(BaseModel):
    t: float
    measured_l1: float
    certified_bound: float
    closed_form_bound: float


class RoundedRow(BaseModel):
    n: int
    exact_tv: float
    exact_mean: float
    rounded_tv: float
    rounded_mean: float


class ExampleReport(BaseModel):
    W: float
    log_W_n: float
    W_n: float
    L: float
    L_grid_step: float
    envelope: EnvelopeReport
    certified_level: int
    min_level: int
    certificate: TruncationReportModel
    ergodicity_gap: float
    periodicity_gap: float
    profile_gap: Optional[float] = None
    figure_csv: List[str]
    comparison: List[ComparisonRow]
    rounded: List[RoundedRow]
    provenance: Provenance


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


class ErrorReport(BaseModel):
    error: str
    detail: str
    exit_code: int
    context: Dict[str, Any] = {}

    @classmethod
    def from_exception(cls, exc: CatQueueError) -> "ErrorReport":
        return cls(error=type(exc).__name__, detail=exc.detail, exit_code=exc.exit_code,
                   context={key: _plain(value) for key, value in exc.context.items()})
