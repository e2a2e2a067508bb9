"""Weighted-norm ergodicity machinery.

The decay function alpha(t) = inf_k alpha_k(t) certifies weak ergodicity when its
integral diverges; its exponential is the contraction factor of the reduced
system in the weighted norm ||z||_{1D} = ||D z||_1.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Literal, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

import config
from errors import EnvelopeError, NumericalError, PreconditionError
from qmodel import QueueModel, RateCombination, reduced_matrix, servers_array, transition_rates

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-10
ARGMIN_CHECKS = 1000
ENVELOPE_SLACK = 1e-9
LOG4 = math.log(4.0)


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# ── weights ──────────────────────────────────────────────────────────────────

WeightKind = Literal["geometric", "doubling", "custom"]


@dataclass(frozen=True)
class WeightSequence:
    """d_0 = 1, explicit head d_1..d_m, then d_{i+1} = ratio * d_i."""
    kind: WeightKind
    ratio: float
    first: float = 1.0
    table: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        if not (math.isfinite(self.ratio) and self.ratio >= 1.0):
            raise PreconditionError("weight tail ratio must be finite and >= 1", ratio=self.ratio)
        if self.kind == "geometric" and not self.ratio > 1.0:
            raise PreconditionError("geometric weights need ratio > 1", ratio=self.ratio)
        head = self.head
        if not head or head[0] < 1.0:
            raise PreconditionError("weights need d_1 >= d_0 = 1", d1=head[0] if head else None)
        if any(b < a for a, b in zip(head, head[1:])):
            raise PreconditionError("weights must be nondecreasing")

    @classmethod
    def geometric(cls, ratio: float, first: Optional[float] = None) -> "WeightSequence":
        """d_k = first * ratio^(k-1) for k >= 1; `first` defaults to `ratio` (d_k = ratio^k)."""
        return cls(kind="geometric", ratio=float(ratio),
                   first=float(ratio if first is None else first))

    @classmethod
    def doubling(cls) -> "WeightSequence":
        """d_0 = 1, d_{k+1} = 2^k."""
        return cls(kind="doubling", ratio=2.0, first=1.0)

    @classmethod
    def custom(cls, table: Sequence[float], tail_ratio: float) -> "WeightSequence":
        return cls(kind="custom", ratio=float(tail_ratio), table=tuple(table))

    @property
    def head(self) -> Tuple[float, ...]:
        return self.table if self.kind == "custom" else (self.first,)

    @property
    def describe(self) -> str:
        if self.kind == "doubling":
            return "doubling"
        if self.kind == "geometric":
            return f"geometric:{self.ratio:g}" + ("" if self.first == self.ratio else f",d1={self.first:g}")
        return f"custom:{len(self.table)}+{self.ratio:g}"

    def d(self, i: int) -> float:
        if i == 0:
            return 1.0
        head = self.head
        if i <= len(head):
            return head[i - 1]
        try:
            return head[-1] * self.ratio ** (i - len(head))
        except OverflowError:
            return math.inf

    def log_d(self, i):
        i = np.asarray(i)
        head = np.log(np.asarray(self.head))
        m = len(head)
        inside = head[np.clip(i - 1, 0, m - 1)]
        beyond = head[-1] + (i - m) * math.log(self.ratio)
        out = np.where(i == 0, 0.0, np.where(i <= m, inside, beyond))
        return float(out) if out.ndim == 0 else out

    def ratio_up(self, k: int) -> float:
        """d_{k+1} / d_k."""
        head = self.head
        if k == 0:
            return head[0]
        if k < len(head):
            return head[k] / head[k - 1]
        return self.ratio

    def ratio_down(self, k: int) -> float:
        """d_{k-1} / d_k; zero at k = 0 where it multiplies mu_0 = 0."""
        head = self.head
        if k == 0:
            return 0.0
        if k == 1:
            return 1.0 / head[0]
        if k <= len(head):
            return head[k - 2] / head[k - 1]
        return 1.0 / self.ratio

    def ratios(self, K: int) -> Tuple[np.ndarray, np.ndarray]:
        up = np.full(K + 1, self.ratio)
        down = np.full(K + 1, 1.0 / self.ratio)
        for k in range(min(K, len(self.head)) + 1):
            up[k] = self.ratio_up(k)
            down[k] = self.ratio_down(k)
        return up, down

    def g(self, i: int) -> float:
        """g_i = d_1 + ... + d_i."""
        if i <= 4096:
            return math.fsum(self.d(m) for m in range(1, i + 1))
        return safe_exp(float(self.log_g(i)[-1]))

    def log_g(self, upto: int) -> np.ndarray:
        out = np.full(upto + 1, -np.inf)
        if upto >= 1:
            out[1:] = np.logaddexp.accumulate(self.log_d(np.arange(1, upto + 1)))
        return out

    @cached_property
    def W(self) -> float:
        """inf_{i>=1} d_i / i; d_i / i increases once i >= 1/(ratio - 1)."""
        if self.ratio == 1.0:
            return 0.0
        stop = max(len(self.head), math.ceil(1.0 / (self.ratio - 1.0))) + 2
        stop = min(stop, 10**7)
        i = np.arange(1, stop + 1)
        return float(np.exp((self.log_d(i) - np.log(i)).min()))

    def log_W_n(self, n: int) -> float:
        """log of inf_{k>=n} (d_n + ... + d_k)/k.

        The partial-sum ratio is nondecreasing in k for nondecreasing weights,
        so the infimum sits at k = n and W_n = d_n / n.
        """
        if n < 1:
            raise PreconditionError("W_n needs n >= 1", n=n)
        return float(self.log_d(n)) - math.log(n)

    def W_n(self, n: int) -> float:
        return safe_exp(self.log_W_n(n))


def weight_matrix(weights: WeightSequence, n: int) -> np.ndarray:
    """Upper-triangular D_n whose row r carries d_r on the columns j >= r."""
    d = np.array([weights.d(r) for r in range(n)])
    return np.triu(np.repeat(d[:, None], n, axis=1))


def weighted_norm(z: np.ndarray, weights: WeightSequence) -> float:
    """||D_n z||_1 = sum_r d_r |z_r + ... + z_n|."""
    z = np.asarray(z, dtype=float)
    tails = np.cumsum(z[::-1])[::-1]
    d = np.array([weights.d(r) for r in range(len(z))])
    return float(np.sum(d * np.abs(tails)))


# ── decay function ───────────────────────────────────────────────────────────

class DecayFunction(Protocol):
    description: str

    def __call__(self, t: float) -> float: ...

    def values(self, ts) -> np.ndarray: ...

    def integral(self, s: float, t: float) -> float: ...


def alpha_k(model: QueueModel, weights: WeightSequence, k: int, t: float) -> float:
    lam_k, mu_k, xi_k = transition_rates(model, k, t)
    lam_next, mu_next, xi_next = transition_rates(model, k + 1, t)
    return (lam_k + mu_next + xi_next
            - weights.ratio_up(k) * lam_next - weights.ratio_down(k) * mu_k)


class DecayRate:
    """alpha(t) as the minimum of the linear forms alpha_k = c_k . (lambda, mu, xi).

    Candidates are k = 0..K, the state K+1 with zeta at its infimum (a lower
    bound for every k in (K, S)), and the k >= S plateau. Candidates whose
    lowest possible value exceeds some other candidate's highest are dropped.
    """

    def __init__(self, model: QueueModel, weights: WeightSequence, k_eval: Optional[int] = None):
        k_eval = config.K_EVAL if k_eval is None else k_eval
        if k_eval < 1:
            raise PreconditionError("k_eval must be >= 1", k_eval=k_eval)
        K = max(k_eval, len(weights.head), model.zeta.table_length)
        self.model, self.weights, self.k_eval = model, weights, K

        up, down = weights.ratios(K)
        servers = servers_array(model.servers, K + 1)
        zeta = model.zeta.upto(K + 1)
        rows = np.column_stack([1.0 - up, servers[1:] - down * servers[:-1], zeta[1:]])

        S, r, zinf = model.servers, weights.ratio, model.zeta.inf
        tail = [1.0 - r, float(min(K + 2, S)) - float(min(K + 1, S)) / r, zinf]
        plateau = [1.0 - r, float(S) * (1.0 - 1.0 / r), zinf]
        coefs = np.vstack([rows, tail, plateau])
        labels = list(range(K + 1)) + [K + 1, max(S, K + 1)]

        lo = np.array([rate.lower_bound() for rate in model.rates])
        hi = np.array([rate.upper_bound() for rate in model.rates])
        cmin = np.where(coefs >= 0, coefs * lo, coefs * hi).sum(axis=1)
        cmax = np.where(coefs >= 0, coefs * hi, coefs * lo).sum(axis=1)
        keep = cmin <= cmax.min() + 1e-12 * max(1.0, abs(cmax.min()))
        self.coefs = coefs[keep]
        self.labels = [label for label, kept in zip(labels, keep) if kept]
        self.description = f"inf_k alpha_k ({weights.describe}, k_eval={K})"
        logger.debug("decay rate keeps %d of %d candidates", len(self.labels), len(labels))

    def _forms(self, ts) -> np.ndarray:
        rates = np.vstack([rate.values(ts) for rate in self.model.rates])
        return self.coefs @ rates

    def __call__(self, t: float) -> float:
        lam, mu, xi = self.model.rates_at(t)
        return float((self.coefs @ np.array([lam, mu, xi])).min())

    def values(self, ts) -> np.ndarray:
        return self._forms(np.atleast_1d(ts)).min(axis=0)

    def argmin(self, t: float) -> int:
        lam, mu, xi = self.model.rates_at(t)
        return self.labels[int(np.argmin(self.coefs @ np.array([lam, mu, xi])))]

    def integral(self, s: float, t: float) -> float:
        if s > t:
            raise PreconditionError("reversed integration interval", s=s, t=t)
        if s == t:
            return 0.0
        ts = np.linspace(s, t, ARGMIN_CHECKS)
        idx = self._forms(ts).argmin(axis=0)
        if np.all(idx == idx[0]):
            c = self.coefs[idx[0]]
            return float(sum(ci * rate.integral(s, t) for ci, rate in zip(c, self.model.rates)))
        switches = np.flatnonzero(np.diff(idx))
        points = 0.5 * (ts[switches] + ts[switches + 1])
        value, _ = integrate.quad(self, s, t, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=500,
                                  points=points[:400])
        return float(value)


@lru_cache(maxsize=32)
def decay_rate(model: QueueModel, weights: WeightSequence, k_eval: Optional[int] = None) -> DecayRate:
    return DecayRate(model, weights, k_eval)


def alpha_inf(model: QueueModel, weights: WeightSequence, t: float,
              k_eval: Optional[int] = None) -> float:
    return decay_rate(model, weights, k_eval)(t)


def alpha_integral(model: QueueModel, weights: WeightSequence, s: float, t: float,
                   k_eval: Optional[int] = None) -> float:
    return decay_rate(model, weights, k_eval).integral(s, t)


def decay_lower_bound(model: QueueModel) -> RateCombination:
    """mu + xi - lambda, a lower bound of alpha for doubling weights when zeta_k >= 1."""
    return RateCombination(((1.0, model.mu), (1.0, model.xi), (-1.0, model.lam)),
                           description="mu + xi - lambda")


# ── weak ergodicity ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ErgodicityVerdict:
    status: Literal["yes", "no", "undetermined"]
    reason: str
    period: Optional[float] = None
    period_mean: Optional[float] = None
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    argmin_trace: Tuple[Tuple[float, int], ...] = ()

    @property
    def is_ergodic(self) -> bool:
        return self.status == "yes"


def check_weak_ergodicity(model: QueueModel, weights: WeightSequence,
                          k_eval: Optional[int] = None, trace_points: int = 16) -> ErgodicityVerdict:
    period = model.period
    if period is None:
        return ErgodicityVerdict("undetermined", "aperiodic rates: undetermined by this tool")
    alpha = decay_rate(model, weights, k_eval)
    mean = alpha.integral(0.0, period) / period
    grid = alpha.values(np.linspace(0.0, period, ARGMIN_CHECKS))
    trace = tuple((float(t), alpha.argmin(float(t)))
                  for t in np.linspace(0.0, period, trace_points, endpoint=False))
    if mean > 0:
        status, reason = "yes", f"period mean of alpha is {mean:.6g} > 0, so its integral diverges"
    else:
        status, reason = "no", f"no positive period mean found for alpha ({mean:.6g})"
    logger.info("weak ergodicity %s: %s", status, reason)
    return ErgodicityVerdict(status, reason, period, mean, float(grid.min()), float(grid.max()), trace)


# ── exponential envelope ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class Envelope:
    """exp(-int_s^t alpha) <= M exp(-a (t - s)); M is kept as log_M."""
    log_M: float
    a: float
    alpha_description: str = ""
    strategy: str = "given"

    @classmethod
    def from_constants(cls, M: float, a: float, description: str = "given") -> "Envelope":
        if not (M >= 1.0 and a > 0):
            raise PreconditionError("envelope needs M >= 1 and a > 0", M=M, a=a)
        return cls(log_M=math.log(M), a=a, alpha_description=description)

    @property
    def M(self) -> float:
        return safe_exp(self.log_M)

    def verify(self, alpha: DecayFunction, period: float, grid: int = 50, periods: int = 2) -> float:
        """Largest log-excess of exp(-int alpha) over the envelope on a grid of (s, t) pairs."""
        ts = np.linspace(0.0, periods * period, grid)
        cumulative = np.concatenate([[0.0], np.cumsum([alpha.integral(a, b) for a, b in zip(ts, ts[1:])])])
        s, t = np.triu_indices(grid)
        excess = -(cumulative[t] - cumulative[s]) - (self.log_M - self.a * (ts[t] - ts[s]))
        return float(excess.max())


def _refine_extremum(alpha: DecayFunction, a: float, knots: np.ndarray, F: np.ndarray,
                     i: int, sign: float) -> float:
    cells = len(knots) - 1
    candidates = {c for c in (i - 1, i) if 0 <= c < cells}
    if i == 0:
        candidates.add(cells - 1)
    if i == cells:
        candidates.add(0)
    best = F[i]
    for c in candidates:
        def objective(x, c=c):
            return -sign * (F[c] + a * (x - knots[c]) - alpha.integral(knots[c], x))
        res = optimize.minimize_scalar(objective, bounds=(knots[c], knots[c + 1]),
                                       method="bounded", options={"xatol": 1e-12})
        value = -sign * res.fun
        best = max(best, value) if sign > 0 else min(best, value)
    return best


def fit_envelope(alpha: DecayFunction, period: float, strategy: str = "mean",
                 cells: int = 256) -> Envelope:
    """Fit (M, a) to a periodic decay function.

    "mean": a is the period mean and M = exp(max - min) of the cumulative
    integral of (a - alpha), tight at period multiples.
    "floor": a is (slightly below) the minimum of alpha and M = 1.
    """
    if not period > 0:
        raise PreconditionError("period must be positive", period=period)
    if strategy == "mean":
        a = alpha.integral(0.0, period) / period
        if not a > 0:
            raise EnvelopeError("no exponential envelope: period mean of the decay function is not positive",
                                period_mean=a)
        knots = np.linspace(0.0, period, cells + 1)
        pieces = [alpha.integral(x, y) for x, y in zip(knots, knots[1:])]
        F = a * knots - np.concatenate([[0.0], np.cumsum(pieces)])
        top = _refine_extremum(alpha, a, knots, F, int(F.argmax()), +1.0)
        bottom = _refine_extremum(alpha, a, knots, F, int(F.argmin()), -1.0)
        log_M = max(top, F.max()) - min(bottom, F.min())
    elif strategy == "floor":
        ts = np.linspace(0.0, period, 4 * cells + 1)
        vals = alpha.values(ts)
        lowest = float(vals.min())
        for i in np.argsort(vals)[:3]:
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
            res = optimize.minimize_scalar(alpha, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-12})
            lowest = min(lowest, float(res.fun))
        if not lowest > 0:
            raise EnvelopeError("no exponential envelope: decay function is not bounded away from zero",
                                minimum=lowest)
        a, log_M = lowest * (1.0 - 1e-7), 0.0
    else:
        raise PreconditionError(f"unknown envelope strategy {strategy!r}")

    envelope = Envelope(log_M=float(log_M), a=float(a), alpha_description=alpha.description,
                        strategy=strategy)
    excess = envelope.verify(alpha, period)
    # cumulative integrals can be huge; allow rounding relative to their size
    scale = max(abs(float(log_M)), 2.0 * abs(float(a)) * period)
    if excess > math.log1p(ENVELOPE_SLACK) + 1e-12 * scale:
        raise NumericalError("fitted envelope fails its grid verification", excess=excess)
    logger.info("envelope (%s) for %s: M=%.6g a=%.6g", strategy, alpha.description, envelope.M, a)
    return envelope


def decay_envelope(model: QueueModel, weights: WeightSequence, k_eval: Optional[int] = None) -> Envelope:
    """Envelope of inf_k alpha_k: the period-mean fit, else the floor fit."""
    if model.period is None:
        raise EnvelopeError("no exponential envelope for aperiodic rates")
    alpha = decay_rate(model, weights, k_eval)
    try:
        return fit_envelope(alpha, model.period, "mean")
    except NumericalError:
        logger.warning("mean envelope failed verification, falling back to the floor fit")
        return fit_envelope(alpha, model.period, "floor")


# ── convergence bounds ───────────────────────────────────────────────────────

def _distribution(p, name: str) -> np.ndarray:
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    if probs.ndim != 1 or probs.min() < -1e-12 or abs(probs.sum() - 1.0) > 1e-9:
        raise PreconditionError(f"{name} is not a probability distribution")
    return probs


def tv_distance_bound(model: QueueModel, weights: WeightSequence, s: float, t: float,
                      p_star, p_dstar, k_eval: Optional[int] = None) -> float:
    """4 exp(-int_s^t alpha) sum_{i>=1} g_i |p*_i(s) - p**_i(s)|."""
    first, second = _distribution(p_star, "p_star"), _distribution(p_dstar, "p_dstar")
    size = max(len(first), len(second))
    diff = np.abs(np.pad(first, (0, size - len(first))) - np.pad(second, (0, size - len(second))))[1:]
    nonzero = np.flatnonzero(diff > 0)
    if nonzero.size == 0:
        return 0.0
    log_g = weights.log_g(size - 1)[1:]
    log_sum = float(logsumexp(log_g[nonzero] + np.log(diff[nonzero])))
    exponent = alpha_integral(model, weights, s, t, k_eval)
    return safe_exp(LOG4 + log_sum - exponent)


def limiting_mean_bound(model: QueueModel, weights: WeightSequence, t: float, k: int,
                        k_eval: Optional[int] = None) -> float:
    """(4/W) g_k exp(-int_0^t alpha), the limiting regime anchored at the empty queue."""
    W = weights.W
    if not W > 0:
        raise PreconditionError("limiting mean not certified: W = 0 for these weights", W=W)
    if k == 0:
        return 0.0
    exponent = alpha_integral(model, weights, 0.0, t, k_eval) if t > 0 else 0.0
    g = weights.g(k)
    if math.isfinite(g):
        return 4.0 / W * g * math.exp(-exponent)
    return safe_exp(LOG4 - math.log(W) + float(weights.log_g(k)[-1]) - exponent)


@dataclass(frozen=True)
class BoundRow:
    t: float
    initial_k: int
    tv_bound: float
    mean_bound: Optional[float]


@dataclass(frozen=True)
class BoundReport:
    verdict: ErgodicityVerdict
    W: float
    envelope: Optional[Envelope]
    rows: Tuple[BoundRow, ...]


def bound_report(model: QueueModel, weights: WeightSequence, times: Sequence[float],
                 initial_states: Sequence[int], k_eval: Optional[int] = None) -> BoundReport:
    verdict = check_weak_ergodicity(model, weights, k_eval)
    envelope = None
    if verdict.is_ergodic:
        try:
            envelope = decay_envelope(model, weights, k_eval)
        except EnvelopeError:
            logger.warning("no envelope for %s", weights.describe)
    rows = []
    for k in initial_states:
        e_k = np.zeros(k + 1)
        e_k[k] = 1.0
        for t in times:
            tv = tv_distance_bound(model, weights, 0.0, t, e_k, [1.0], k_eval)
            mean = limiting_mean_bound(model, weights, t, k, k_eval) if weights.W > 0 else None
            rows.append(BoundRow(float(t), int(k), tv, mean))
    return BoundReport(verdict, weights.W, envelope, tuple(rows))


# ── large-catastrophe and large-service regimes ──────────────────────────────

RegimeMode = Literal["catastrophe", "service"]


def regime_weights(eps: float) -> WeightSequence:
    """d_k = (1 + eps)^k."""
    return WeightSequence.geometric(1.0 + eps)


def regime_decay(model: QueueModel, mode: RegimeMode, eps: float) -> RateCombination:
    if not eps > 0:
        raise PreconditionError("epsilon must be positive", eps=eps)
    if mode == "catastrophe":
        zeta = model.zeta.inf
        if not zeta > 0:
            raise PreconditionError("large-catastrophe regime needs inf_k zeta_k > 0", zeta=zeta)
        return RateCombination(((zeta, model.xi), (-eps, model.lam)),
                               description=f"{zeta:g}*xi - {eps:g}*lambda")
    if mode == "service":
        c = eps / (1.0 + eps)
        return RateCombination(((c * float(model.servers), model.mu), (-eps, model.lam)),
                               description=f"{c:g}*(S*mu - {1.0 + eps:g}*lambda)")
    raise PreconditionError(f"unknown regime mode {mode!r}")


def check_regime(model: QueueModel, mode: RegimeMode, eps: float) -> float:
    """Period mean of the regime decay function; it must be positive."""
    decay = regime_decay(model, mode, eps)
    horizon = model.period
    if horizon is None:
        horizon = config.APERIODIC_HORIZON
        logger.warning("aperiodic model: regime condition checked on [0, %g] only", horizon)
    mean = decay.integral(0.0, horizon) / horizon
    if not mean > 0:
        raise PreconditionError(
            f"{mode} regime condition fails: the integral of {decay.description} does not diverge",
            period_mean=mean)
    return mean


@dataclass(frozen=True)
class RegimeBound:
    mode: str
    eps: float
    t: float
    k: int
    tv_bound: float
    mean_bound: float
    exponent: float
    W: float
    log_norm_certified: bool


def regime_bounds(model: QueueModel, mode: RegimeMode, eps: float, t: float, k: int) -> RegimeBound:
    """4 (1+eps)^k / eps * exp(-int_0^t alpha_*), and the same over W for the mean."""
    check_regime(model, mode, eps)
    decay = regime_decay(model, mode, eps)
    exponent = decay.integral(0.0, t) if t > 0 else 0.0
    W = regime_weights(eps).W
    log_tv = LOG4 + k * math.log1p(eps) - math.log(eps) - exponent
    certified = mode == "catastrophe" or model.servers * eps <= 1.0 + eps
    if not certified:
        logger.warning("service-regime bound with S*eps > 1+eps is not backed by the log norm "
                       "(the k < S columns decay more slowly)")
    return RegimeBound(mode, eps, t, k, safe_exp(log_tv), safe_exp(log_tv - math.log(W)),
                       exponent, W, certified)


def sweep_epsilon(model: QueueModel, mode: RegimeMode, t: float, k: int,
                  grid: Optional[Sequence[float]] = None, workers: int = 1) -> RegimeBound:
    """Regime bound minimising the distance bound over a log grid of epsilon."""
    grid = np.logspace(-3, 1, 41) if grid is None else grid

    def attempt(eps):
        try:
            return regime_bounds(model, mode, float(eps), t, k)
        except PreconditionError:
            return None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = [r for r in pool.map(attempt, grid) if r is not None]
    if not results:
        raise PreconditionError(f"no epsilon on the grid satisfies the {mode} regime condition")
    return min(results, key=lambda r: (r.tv_bound, r.eps))


# ── logarithmic norm ─────────────────────────────────────────────────────────

class LogNorm(NamedTuple):
    gamma: float
    per_column: np.ndarray


def lognorm_oracle(model: QueueModel, weights: WeightSequence, n: int, t: float) -> LogNorm:
    """l1 logarithmic norm of D_n B_n(t) D_n^{-1}, column by column."""
    if n < 4:
        raise PreconditionError("log-norm oracle needs n >= 4", n=n)
    B = reduced_matrix(model, n, t)
    D = weight_matrix(weights, n)
    C = solve_triangular(D, (D @ B).T, trans="T").T
    diag = np.diag(C)
    per_column = diag + np.abs(C).sum(axis=0) - np.abs(diag)
    return LogNorm(float(per_column.max()), per_column)
