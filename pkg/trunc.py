"""Truncation-error certificates for the finite section {0..n}.

Bounds are evaluated in log space and exponentiated once, then multiplied by t,
so they are exactly linear in the horizon.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple, Union

import numpy as np

from ergo import Envelope, RegimeMode, WeightSequence, check_regime, fit_envelope, regime_decay, regime_weights, safe_exp
from errors import CertificationError, EnvelopeError, NumericalError, PreconditionError
from qmodel import EssentialBound, QueueModel, measure_essential_bound

logger = logging.getLogger(__name__)

Criterion = Literal["tv", "mean", "both"]
SEARCH_CAP = 10**6

BoundArg = Optional[Union[float, EssentialBound]]


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _bound(model: QueueModel, L: BoundArg) -> EssentialBound:
    if isinstance(L, EssentialBound):
        return L
    return measure_essential_bound(model) if L is None else EssentialBound(float(L), None)


@dataclass(frozen=True)
class TruncationReport:
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

    @property
    def W_n(self) -> float:
        return safe_exp(self.log_W_n)

    def value(self, criterion: Criterion) -> float:
        if criterion == "tv":
            return self.tv_bound
        if criterion == "mean":
            return self.mean_bound
        return max(self.tv_bound, self.mean_bound)


def truncation_bounds(model: QueueModel, weights: WeightSequence, env: Envelope, n: int, t: float,
                      j: int, L: BoundArg = None) -> TruncationReport:
    """Distance and mean errors of the level-n truncation started from e_j.

    tv   = 8 L t / (n W_n) * (M j d_{j+1} + L M d_1 / a)
    mean = 3 L (n+1) t / (n W_n) * (same)
    """
    if n < 1 or t < 0 or j < 0:
        raise PreconditionError("truncation bounds need n >= 1, t >= 0, j >= 0", n=n, t=t, j=j)
    bound = _bound(model, L)
    L = bound.value
    d1, d_j1 = weights.d(1), weights.d(j + 1)

    head = _log(L) + env.log_M + _log(d1) - _log(env.a)
    if j > 0:
        head = float(np.logaddexp(head, env.log_M + math.log(j) + float(weights.log_d(j + 1))))
    log_W_n = weights.log_W_n(n)
    log_scale = _log(L) - math.log(n) - log_W_n + head

    if t == 0:
        tv = mean = 0.0
    else:
        tv = t * safe_exp(math.log(8.0) + log_scale)
        mean = t * safe_exp(math.log(3.0) + math.log(n + 1) + log_scale)
    return TruncationReport(n=n, t=t, j=j, tv_bound=tv, mean_bound=mean, L=L, M=env.M, a=env.a,
                            log_W_n=log_W_n, d1=d1, d_j1=d_j1, weights=weights.describe,
                            L_grid_step=bound.grid_step)


def regime_envelope(model: QueueModel, mode: RegimeMode, eps: float, j: int = 0,
                    L: BoundArg = None) -> Envelope:
    """Sharper of the mean and floor envelopes of the regime decay function."""
    check_regime(model, mode, eps)
    if model.period is None:
        raise EnvelopeError("missing envelope: aperiodic rates have no fitted envelope", mode=mode)
    decay = regime_decay(model, mode, eps)
    weights = regime_weights(eps)
    L = _bound(model, L).value
    candidates = []
    for strategy in ("mean", "floor"):
        try:
            env = fit_envelope(decay, model.period, strategy=strategy)
        except (EnvelopeError, NumericalError) as exc:
            logger.debug("%s envelope unavailable: %s", strategy, exc.detail)
            continue
        head = _log(L) + env.log_M + _log(weights.d(1)) - _log(env.a)
        if j > 0:
            head = float(np.logaddexp(head, env.log_M + math.log(j) + float(weights.log_d(j + 1))))
        candidates.append((head, env))
    if not candidates:
        raise EnvelopeError(f"missing envelope for the {mode} regime", eps=eps)
    return min(candidates, key=lambda item: item[0])[1]


def corollary_bounds(model: QueueModel, mode: RegimeMode, eps: float, n: int, t: float, j: int,
                     envelope: Optional[Envelope] = None, L: BoundArg = None) -> TruncationReport:
    """Truncation bounds with d_k = (1+eps)^k and the envelope of the regime decay function."""
    bound = _bound(model, L)
    if envelope is None:
        envelope = regime_envelope(model, mode, eps, j, bound)
    return truncation_bounds(model, regime_weights(eps), envelope, n, t, j, L=bound)


def min_truncation_level(model: QueueModel, weights: WeightSequence, env: Envelope, t_max: float,
                         j: int, target_eps: float, criterion: Criterion = "both",
                         cap: int = SEARCH_CAP, L: BoundArg = None) -> Tuple[int, TruncationReport]:
    """Smallest n certifying the target, by doubling from n = 1 and then bisecting."""
    if not (math.isfinite(target_eps) and target_eps > 0):
        raise PreconditionError("target must be finite and positive", target=target_eps)
    if criterion not in ("tv", "mean", "both"):
        raise PreconditionError(f"unknown criterion {criterion!r}")
    bound = _bound(model, L)

    def report(n: int) -> TruncationReport:
        return truncation_bounds(model, weights, env, n, t_max, j, L=bound)

    def certified(n: int) -> bool:
        return report(n).value(criterion) <= target_eps

    lo, hi = 0, 1
    while not certified(hi):
        if hi >= cap:
            raise CertificationError("target not certifiable with these weights",
                                     target=target_eps, cap=cap, weights=weights.describe)
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if certified(mid):
            hi = mid
        else:
            lo = mid
    logger.info("level %d certifies %s <= %g up to t=%g", hi, criterion, target_eps, t_max)
    return hi, report(hi)


def rounded_example_bounds(n: int, t: float, k: int) -> Tuple[float, float]:
    """Rounded-constant forms for the large-server example (M = 4, a = 3, L = 5e12, doubling weights)."""
    paren = k * math.ldexp(1.0, k + 2) + 1e14
    tv = t * math.ldexp(1e13, -(n - 3)) * paren
    mean = t * (n + 1) * math.ldexp(1e14, -(n - 1)) * paren
    return tv, mean
