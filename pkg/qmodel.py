"""Rate expressions, the M_t|M_t|S queue with catastrophes, and its finite generators.

Matrices follow the transposed-intensity convention: column j holds the
outflows of state j, so the forward equation reads dp/dt = A(t) p.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from typing import Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np

import config
from errors import PreconditionError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise PreconditionError(f"{name} must be finite", value=value)
    return value


@dataclass(frozen=True)
class TrigTerm:
    sin_amp: float = 0.0
    cos_amp: float = 0.0
    freq: float = 1.0

    def __post_init__(self):
        _finite("sin amplitude", self.sin_amp)
        _finite("cos amplitude", self.cos_amp)
        if not (math.isfinite(self.freq) and self.freq > 0):
            raise PreconditionError("trigonometric frequency must be positive", freq=self.freq)

    @property
    def amplitude(self) -> float:
        return math.hypot(self.sin_amp, self.cos_amp)


@dataclass(frozen=True)
class StepTerm:
    """`level` is added on the half-open interval [start, end)."""
    start: float
    end: float
    level: float

    def __post_init__(self):
        _finite("step level", self.level)
        if not (0.0 <= self.start < self.end and math.isfinite(self.end)):
            raise PreconditionError("step interval must satisfy 0 <= start < end",
                                    start=self.start, end=self.end)

    def overlap(self, s: float, t: float) -> float:
        return max(0.0, min(t, self.end) - max(s, self.start))


def common_period(freqs: Sequence[float]) -> float:
    """Smallest period shared by all frequencies (1.0 when there are none)."""
    if not freqs:
        return 1.0
    fracs = [Fraction(f).limit_denominator(10**6) for f in freqs]
    denom = reduce(math.lcm, (fr.denominator for fr in fracs))
    numer = reduce(math.gcd, (fr.numerator * (denom // fr.denominator) for fr in fracs))
    return denom / numer


@dataclass(frozen=True)
class RateExpr:
    """Nonnegative rate: constant + trigonometric terms + piecewise-constant terms."""
    const_term: float = 0.0
    trig_terms: Tuple[TrigTerm, ...] = ()
    step_terms: Tuple[StepTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "const_term", _finite("constant term", self.const_term))
        object.__setattr__(self, "trig_terms", tuple(self.trig_terms))
        object.__setattr__(self, "step_terms", tuple(self.step_terms))
        self._check_nonnegative()

    @classmethod
    def constant(cls, value: float) -> "RateExpr":
        return cls(const_term=float(value))

    @classmethod
    def zero(cls) -> "RateExpr":
        return cls()

    @classmethod
    def sinusoid(cls, const: float, sin_amp: float = 0.0, cos_amp: float = 0.0,
                 freq: float = 1.0) -> "RateExpr":
        return cls(const_term=const, trig_terms=(TrigTerm(sin_amp, cos_amp, freq),))

    def _raw(self, t: float) -> float:
        value = self.const_term
        for term in self.trig_terms:
            phase = TWO_PI * term.freq * t
            value += term.sin_amp * math.sin(phase) + term.cos_amp * math.cos(phase)
        for step in self.step_terms:
            if step.start <= t < step.end:
                value += step.level
        return value

    def __call__(self, t: float) -> float:
        return max(self._raw(t), 0.0)

    def values(self, ts, clamp: bool = True) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = np.full(ts.shape, self.const_term)
        for term in self.trig_terms:
            phase = TWO_PI * term.freq * ts
            out += term.sin_amp * np.sin(phase) + term.cos_amp * np.cos(phase)
        for step in self.step_terms:
            out += np.where((ts >= step.start) & (ts < step.end), step.level, 0.0)
        return np.maximum(out, 0.0) if clamp else out

    def integral(self, s: float, t: float) -> float:
        if s > t:
            raise PreconditionError("reversed integration interval", s=s, t=t)
        total = self.const_term * (t - s)
        for term in self.trig_terms:
            w = TWO_PI * term.freq
            total += term.sin_amp * (math.cos(w * s) - math.cos(w * t)) / w
            total += term.cos_amp * (math.sin(w * t) - math.sin(w * s)) / w
        for step in self.step_terms:
            total += step.level * step.overlap(s, t)
        return total

    def upper_bound(self) -> float:
        """Closed-form sup bound; exact for a single trigonometric term."""
        return (self.const_term + sum(term.amplitude for term in self.trig_terms)
                + sum(max(step.level, 0.0) for step in self.step_terms))

    def lower_bound(self) -> float:
        low = (self.const_term - sum(term.amplitude for term in self.trig_terms)
               + sum(min(step.level, 0.0) for step in self.step_terms))
        return max(low, 0.0)

    @property
    def is_periodic(self) -> bool:
        return not self.step_terms

    @property
    def is_constant(self) -> bool:
        return not (self.trig_terms or self.step_terms)

    @property
    def frequencies(self) -> Tuple[float, ...]:
        return tuple(term.freq for term in self.trig_terms)

    def _check_nonnegative(self):
        margin = (self.const_term
                  - sum(abs(term.sin_amp) + abs(term.cos_amp) for term in self.trig_terms)
                  + sum(min(step.level, 0.0) for step in self.step_terms))
        if margin >= 0.0:
            return
        if self.is_periodic:
            horizon = common_period(self.frequencies)
        else:
            horizon = max(config.APERIODIC_HORIZON, max(step.end for step in self.step_terms))
        ts = np.linspace(0.0, horizon, config.GRID_POINTS + 1)
        edges = [x for step in self.step_terms for x in (step.start, step.end)]
        if edges:
            ts = np.concatenate([ts, np.asarray(edges)])
        low = float(self.values(ts, clamp=False).min())
        if low < -1e-12 * max(1.0, abs(self.const_term)):
            raise PreconditionError(f"rate expression takes the negative value {low:.6g}",
                                    minimum=low)
        logger.debug("rate expression passed sampled nonnegativity check (min %.3g)", low)


@dataclass(frozen=True)
class RateCombination:
    """Signed linear combination of rate expressions, e.g. mu + xi - lambda."""
    terms: Tuple[Tuple[float, RateExpr], ...]
    description: str = ""

    def __call__(self, t: float) -> float:
        return sum(coef * rate(t) for coef, rate in self.terms)

    def values(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = np.zeros(ts.shape)
        for coef, rate in self.terms:
            out += coef * rate.values(ts)
        return out

    def integral(self, s: float, t: float) -> float:
        return sum(coef * rate.integral(s, t) for coef, rate in self.terms)


def eval_rate(expr: RateExpr, t: float) -> float:
    if t < 0:
        raise PreconditionError("time must be nonnegative", t=t)
    return expr(t)


def integrate_rate(expr: RateExpr, s: float, t: float) -> float:
    return expr.integral(s, t)


ZetaKind = Literal["constant", "one_plus_c_over_k", "table_with_tail"]


@dataclass(frozen=True)
class CatastropheProfile:
    """Multipliers zeta_k (k >= 1) in xi_k(t) = zeta_k * xi(t)."""
    kind: ZetaKind = "constant"
    c: float = 1.0
    values: Tuple[float, ...] = ()
    tail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "constant" and not self.c >= 0:
            raise PreconditionError("constant catastrophe multiplier must be >= 0", c=self.c)
        if self.kind == "one_plus_c_over_k" and not self.c >= -1:
            raise PreconditionError("1 + c/k profile needs c >= -1", c=self.c)
        if self.kind == "table_with_tail":
            if not all(v >= 0 for v in self.values) or not self.tail >= 0:
                raise PreconditionError("catastrophe table entries must be >= 0")
        for v in (self.c, self.tail, *self.values):
            _finite("catastrophe multiplier", v)

    @classmethod
    def constant(cls, c: float) -> "CatastropheProfile":
        return cls(kind="constant", c=c)

    @classmethod
    def one_plus_c_over_k(cls, c: float = 1.0) -> "CatastropheProfile":
        return cls(kind="one_plus_c_over_k", c=c)

    @classmethod
    def table_with_tail(cls, values: Sequence[float], tail: float) -> "CatastropheProfile":
        return cls(kind="table_with_tail", values=tuple(values), tail=tail)

    def __call__(self, k: int) -> float:
        if k < 1:
            return 0.0
        if self.kind == "constant":
            return self.c
        if self.kind == "one_plus_c_over_k":
            return 1.0 + self.c / k
        return self.values[k - 1] if k <= len(self.values) else self.tail

    def upto(self, n: int) -> np.ndarray:
        """zeta_0..zeta_n with zeta_0 = 0 (no catastrophe from the empty state)."""
        out = np.zeros(n + 1)
        k = np.arange(1, n + 1)
        if self.kind == "constant":
            out[1:] = self.c
        elif self.kind == "one_plus_c_over_k":
            out[1:] = 1.0 + self.c / k
        else:
            m = min(len(self.values), n)
            out[1:m + 1] = self.values[:m]
            out[m + 1:] = self.tail
        return out

    @property
    def sup(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "one_plus_c_over_k":
            return max(1.0 + self.c, 1.0)
        return max(self.values + (self.tail,))

    @property
    def inf(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "one_plus_c_over_k":
            return min(1.0 + self.c, 1.0)
        return min(self.values + (self.tail,))

    @property
    def table_length(self) -> int:
        return len(self.values) if self.kind == "table_with_tail" else 0


@dataclass(frozen=True)
class QueueModel:
    servers: int
    lam: RateExpr
    mu: RateExpr
    xi: RateExpr
    zeta: CatastropheProfile = CatastropheProfile()

    def __post_init__(self):
        if isinstance(self.servers, bool) or not isinstance(self.servers, int) or self.servers < 1:
            raise PreconditionError("number of servers must be a positive integer",
                                    servers=repr(self.servers))

    def busy(self, k: int) -> int:
        return min(k, self.servers)

    def rates_at(self, t: float) -> Tuple[float, float, float]:
        return self.lam(t), self.mu(t), self.xi(t)

    @property
    def rates(self) -> Tuple[RateExpr, RateExpr, RateExpr]:
        return self.lam, self.mu, self.xi

    @cached_property
    def period(self) -> Optional[float]:
        """Common period of all rates; None when a step term makes the model aperiodic."""
        if not all(rate.is_periodic for rate in self.rates):
            return None
        return common_period([f for rate in self.rates for f in rate.frequencies])

    @property
    def is_homogeneous(self) -> bool:
        return all(rate.is_constant for rate in self.rates)

    @property
    def horizon(self) -> float:
        return self.period if self.period is not None else config.APERIODIC_HORIZON


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    n: int
    entries: np.ndarray

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)


def servers_array(servers: int, n: int) -> np.ndarray:
    """min(k, S) for k = 0..n; S is compared as an exact integer before conversion."""
    k = np.arange(n + 1, dtype=float)
    if servers >= n:
        return k
    return np.minimum(k, float(servers))


def transition_rates(model: QueueModel, k: int, t: float) -> Tuple[float, float, float]:
    """(birth, death, catastrophe) rates out of state k at time t."""
    if k < 0 or t < 0:
        raise PreconditionError("state and time must be nonnegative", k=k, t=t)
    lam, mu, xi = model.rates_at(t)
    if k == 0:
        return lam, 0.0, 0.0
    return lam, float(model.busy(k)) * mu, model.zeta(k) * xi


def rate_grid(model: QueueModel, grid_points: Optional[int] = None) -> Tuple[np.ndarray, float]:
    grid_points = grid_points or config.GRID_POINTS
    horizon = model.horizon
    ts = np.linspace(0.0, horizon, grid_points + 1)
    return ts, horizon / grid_points


class EssentialBound(NamedTuple):
    value: float
    grid_step: Optional[float]


def measure_essential_bound(model: QueueModel, grid_points: Optional[int] = None) -> EssentialBound:
    """L = sup_t lambda(t) + S mu(t) + (sup_k zeta_k) xi(t) over a grid of one period, with its step."""
    ts, step = rate_grid(model, grid_points)
    total = (model.lam.values(ts) + float(model.servers) * model.mu.values(ts)
             + model.zeta.sup * model.xi.values(ts))
    bound = float(total.max())
    logger.debug("essential bound L=%.6g (grid step %.3g over %.3g)", bound, step, model.horizon)
    return EssentialBound(bound, step)


def essential_bound(model: QueueModel, grid_points: Optional[int] = None) -> float:
    return measure_essential_bound(model, grid_points).value


def truncated_generator(model: QueueModel, n: int, t: float) -> GeneratorMatrix:
    """Conservative generator on {0..n}; the birth out of state n is dropped."""
    if n < 1:
        raise PreconditionError("truncation level must be >= 1", n=n)
    lam, mu, xi = model.rates_at(t)
    entries = np.zeros((n + 1, n + 1))
    k = np.arange(n)
    entries[k + 1, k] = lam
    entries[k, k + 1] = servers_array(model.servers, n)[1:] * mu
    entries[0, 1:] += model.zeta.upto(n)[1:] * xi
    idx = np.arange(n + 1)
    entries[idx, idx] = -entries.sum(axis=0)
    return GeneratorMatrix(n=n, entries=entries)


def reduced_matrix(model: QueueModel, n: int, t: float) -> np.ndarray:
    """n x n section of B(t) for z = (p_1..p_n) after eliminating p_0 = 1 - sum(z)."""
    if n < 2:
        raise PreconditionError("reduced matrix needs n >= 2", n=n)
    lam, mu, xi = model.rates_at(t)
    death = servers_array(model.servers, n) * mu
    cat = model.zeta.upto(n) * xi
    birth = np.full(n + 1, lam)
    birth[n] = 0.0

    B = np.zeros((n, n))
    j = np.arange(1, n + 1)
    B[j - 1, j - 1] = -(birth[j] + death[j] + cat[j])
    B[0, 0] -= lam
    B[0, 1] = death[2] - lam
    B[0, 2:] = -lam
    sup = np.arange(3, n + 1)
    B[sup - 2, sup - 1] = death[sup]
    sub = np.arange(1, n)
    B[sub, sub - 1] = birth[sub]
    return B


def large_server_example() -> QueueModel:
    """S = 10^12 servers, lambda = 1 + sin 2pi t, mu = 3 + 2 cos 2pi t, xi = 1 - sin 2pi t, zeta_k = 1 + 1/k."""
    return QueueModel(
        servers=10**12,
        lam=RateExpr.sinusoid(1.0, sin_amp=1.0),
        mu=RateExpr.sinusoid(3.0, cos_amp=2.0),
        xi=RateExpr.sinusoid(1.0, sin_amp=-1.0),
        zeta=CatastropheProfile.one_plus_c_over_k(1.0),
    )
