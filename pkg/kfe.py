"""Forward Kolmogorov system of the truncated chain on {0..n}."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

import config
from ergo import WeightSequence, weighted_norm
from errors import NumericalError, PreconditionError, WitnessError
from qmodel import QueueModel, servers_array

logger = logging.getLogger(__name__)

STABILITY_LIMIT = 0.1
CLIP_TOLERANCE = 1e-10
DRIFT_TOLERANCE = 1e-9
GUARD_EVERY = 256
MIN_WITNESS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise PreconditionError("probability vector must be one-dimensional and nonempty")
        if probs.min() < -1e-12:
            raise PreconditionError("probability vector has a negative entry", minimum=float(probs.min()))
        probs = np.maximum(probs, 0.0)
        if abs(probs.sum() - 1.0) > 1e-9:
            raise PreconditionError("probabilities must sum to 1", total=float(probs.sum()))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, n: int, j: int) -> "ProbabilityVector":
        if not 0 <= j <= n:
            raise PreconditionError("initial state outside {0..n}", n=n, j=j)
        probs = np.zeros(n + 1)
        probs[j] = 1.0
        return cls(probs)

    @property
    def n(self) -> int:
        return len(self.probs) - 1

    def padded(self, n: int) -> np.ndarray:
        if self.n > n and self.probs[n + 1:].any():
            raise PreconditionError("initial distribution has mass above the truncation level", n=n)
        out = np.zeros(n + 1)
        m = min(n, self.n) + 1
        out[:m] = self.probs[:m]
        return out


def distribution_mean(p) -> float:
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    return float(np.dot(np.arange(len(probs)), probs))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    probs: np.ndarray
    means: np.ndarray = field(default=None)
    max_drift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "probs", np.atleast_2d(np.asarray(self.probs, dtype=float)))
        if self.means is None:
            object.__setattr__(self, "means", self.probs @ np.arange(self.probs.shape[1]))

    @property
    def n(self) -> int:
        return self.probs.shape[1] - 1

    @property
    def states(self) -> List[ProbabilityVector]:
        return [ProbabilityVector(row) for row in self.probs]

    def at(self, i: int) -> ProbabilityVector:
        return ProbabilityVector(self.probs[i])

    def select(self, times: Sequence[float]) -> "Trajectory":
        """Rows recorded at exactly the given times."""
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(self.times, times)
        if np.any(idx >= len(self.times)) or not np.array_equal(self.times[np.minimum(idx, len(self.times) - 1)],
                                                                  times):
            raise PreconditionError("requested times were not recorded")
        return Trajectory(times, self.probs[idx], self.means[idx], self.max_drift)

    def __len__(self) -> int:
        return len(self.times)


class StageBands(NamedTuple):
    """Bands of A_n(t) at a run of stage times; row i belongs to the i-th stage time."""
    diagonal: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    catastrophes: np.ndarray


class ForwardSystem:
    """dP/dt = A_n(t) P for a block P whose columns are distributions, without forming A_n."""

    def __init__(self, model: QueueModel, n: int):
        if n < 1:
            raise PreconditionError("truncation level must be >= 1", n=n)
        self.model, self.n = model, n
        self.servers = servers_array(model.servers, n)
        self.zeta = model.zeta.upto(n)
        self.open = np.ones(n + 1)
        self.open[n] = 0.0

    @property
    def stiffness(self) -> float:
        """Upper bound of max_k |a_kk(t)| over all t."""
        lam, mu, xi = (rate.upper_bound() for rate in self.model.rates)
        return lam + float(self.servers[-1]) * mu + float(self.zeta.max()) * xi

    def bands(self, ts: np.ndarray) -> StageBands:
        lam, mu, xi = (rate.values(ts) for rate in self.model.rates)
        catastrophes = np.multiply.outer(xi, self.zeta)
        diagonal = -(np.multiply.outer(lam, self.open) + np.multiply.outer(mu, self.servers) + catastrophes)
        deaths = np.multiply.outer(mu, self.servers[1:])
        return StageBands(diagonal[..., None], lam, deaths[..., None], catastrophes)

    @staticmethod
    def derivative(P: np.ndarray, stages: StageBands, i: int, out: np.ndarray) -> np.ndarray:
        np.multiply(stages.diagonal[i], P, out=out)
        out[1:] += stages.births[i] * P[:-1]
        out[:-1] += stages.deaths[i] * P[1:]
        out[0] += stages.catastrophes[i] @ P
        return out

    def step(self, P: np.ndarray, stages: StageBands, i: int, h: float, work: np.ndarray) -> np.ndarray:
        """One RK4 step using stage rows i (start), i + 1 (midpoint) and i + 2 (end)."""
        k1, k2, k3, k4, y = work
        self.derivative(P, stages, i, k1)
        np.multiply(k1, 0.5 * h, out=y)
        y += P
        self.derivative(y, stages, i + 1, k2)
        np.multiply(k2, 0.5 * h, out=y)
        y += P
        self.derivative(y, stages, i + 1, k3)
        np.multiply(k3, h, out=y)
        y += P
        self.derivative(y, stages, i + 2, k4)
        k2 += k3
        k2 *= 2.0
        k2 += k1
        k2 += k4
        k2 *= h / 6.0
        return P + k2

    @staticmethod
    def settle(P: np.ndarray, t: float) -> float:
        """Clip rounding negatives and renormalise every column; returns the drift before renormalising."""
        total = P.sum(axis=0)
        drift = float(np.abs(total - 1.0).max())
        low = float(P.min())
        if low < -CLIP_TOLERANCE:
            raise NumericalError("integration unstable", t=t, minimum=low)
        if low < 0.0:
            np.maximum(P, 0.0, out=P)
            total = P.sum(axis=0)
        P /= total
        return drift

    def advance(self, P: np.ndarray, t: float, t_end: float, h: float):
        """RK4 from t to t_end on the grid t + i h; the last step is shortened to land on t_end."""
        steps = int(math.floor((t_end - t) / h + 1e-9))
        remainder = (t_end - t) - steps * h
        work = np.empty((5,) + P.shape)
        drift = 0.0
        for start in range(0, steps, GUARD_EVERY):
            count = min(GUARD_EVERY, steps - start)
            stages = self.bands(t + h * (start + 0.5 * np.arange(2 * count + 1)))
            for i in range(count):
                P = self.step(P, stages, 2 * i, h, work)
            drift = max(drift, self.settle(P, t + (start + count) * h))
        if remainder > 1e-9 * h:
            stages = self.bands(t + steps * h + 0.5 * remainder * np.arange(3))
            P = self.step(P, stages, 0, remainder, work)
            drift = max(drift, self.settle(P, t_end))
        return P, drift


def _forward_system(model: QueueModel, n: int, h: float) -> ForwardSystem:
    if not h > 0:
        raise PreconditionError("step must be positive", h=h)
    system = ForwardSystem(model, n)
    if h * system.stiffness > STABILITY_LIMIT:
        raise PreconditionError("step too large for stability", Lambda=system.stiffness, h=h,
                                limit=STABILITY_LIMIT)
    return system


def _log_drift(max_drift: float, h: float, n: int, t0: float, t1: float):
    if max_drift > DRIFT_TOLERANCE:
        logger.warning("mass drift %.3g before renormalisation exceeds %.0e (h=%g, n=%d)",
                       max_drift, DRIFT_TOLERANCE, h, n)
    else:
        logger.debug("integrated n=%d over [%g, %g], max drift %.3g", n, t0, t1, max_drift)


def _march(system: ForwardSystem, P: np.ndarray, t0: float, times: np.ndarray, h: float):
    """Block states at each of the increasing times (all >= t0), landing exactly on each."""
    t, rows, max_drift = t0, [], 0.0
    for target in times:
        if target > t:
            P, drift = system.advance(P, t, float(target), h)
            max_drift = max(max_drift, drift)
            t = float(target)
        rows.append(P.copy())
    return np.array(rows), max_drift


def integrate_forward(model: QueueModel, n: int, p0: ProbabilityVector, t0: float, t1: float,
                      h: Optional[float] = None, record_every: Optional[int] = None) -> Trajectory:
    """Classical RK4 with fixed step h, recording every `record_every` steps and at t1."""
    h = config.DEFAULT_STEP if h is None else h
    record_every = config.RECORD_EVERY if record_every is None else record_every
    if not (0 <= t0 <= t1):
        raise PreconditionError("integration interval must satisfy 0 <= t0 <= t1", t0=t0, t1=t1)
    if record_every < 1:
        raise PreconditionError("recording interval must be positive", record_every=record_every)
    system = _forward_system(model, n, h)

    steps = int(math.floor((t1 - t0) / h + 1e-9))
    marks = [t0 + i * h for i in range(record_every, steps, record_every)]
    times = np.array([t0] + marks + ([t1] if t1 > t0 else []))
    rows, max_drift = _march(system, p0.padded(n)[:, None], t0, times, h)
    _log_drift(max_drift, h, n, t0, t1)
    return Trajectory(times, rows[:, :, 0], max_drift=max_drift)


def sample_block(model: QueueModel, n: int, initial: Sequence[ProbabilityVector], times: Sequence[float],
                 h: Optional[float] = None) -> List[Trajectory]:
    """Trajectories from several initial distributions at t = 0, integrated together in one pass."""
    h = config.DEFAULT_STEP if h is None else h
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise PreconditionError("sample times must be nonnegative and increasing")
    if not initial:
        raise PreconditionError("need at least one initial distribution")
    system = _forward_system(model, n, h)
    P0 = np.column_stack([p.padded(n) for p in initial])
    rows, max_drift = _march(system, P0, 0.0, times, h)
    _log_drift(max_drift, h, n, 0.0, float(times[-1]))
    return [Trajectory(times, rows[:, :, j], max_drift=max_drift) for j in range(len(initial))]


def sample_forward(model: QueueModel, n: int, p0: ProbabilityVector, times: Sequence[float],
                   h: Optional[float] = None) -> Trajectory:
    """States at the given increasing times, integrating from t = 0."""
    return sample_block(model, n, [p0], times, h)[0]


def l1_distance(p, q) -> float:
    return float(np.abs(np.asarray(getattr(p, "probs", p)) - np.asarray(getattr(q, "probs", q))).sum())


@dataclass(frozen=True, eq=False)
class LimitingRegime:
    trajectory: Trajectory
    ergodicity_gap: float
    periodicity_gap: float
    profile_gap: Optional[float] = None


def regime_window(settle_t: float, period: float, samples: int, periodicity_profile: bool = False) -> np.ndarray:
    """Sample times over [settle_t, settle_t + period], continued over the next period for the profile."""
    window = np.linspace(settle_t, settle_t + period, samples)
    return np.concatenate([window, window[1:] + period]) if periodicity_profile else window


def check_regime_request(model: QueueModel, period: float, tol: float, samples: int):
    if not tol >= MIN_WITNESS_TOL:
        raise PreconditionError("witness tolerance must be >= 1e-12", tol=tol)
    if not period > 0:
        raise PreconditionError("period must be positive", period=period)
    if samples < 2:
        raise PreconditionError("need at least two samples over the period", samples=samples)
    if model.is_homogeneous:
        return
    if model.period is None:
        raise PreconditionError("limiting regime needs periodic rates")
    cycles = period / model.period
    if round(cycles) < 1 or abs(cycles - round(cycles)) > 1e-9:
        raise PreconditionError("period must be a multiple of the rate period",
                                period=period, rate_period=model.period)


def assess_regime(anchor: Trajectory, rival: ProbabilityVector, samples: int, tol: float) -> LimitingRegime:
    """Witnesses for an e_0 trajectory sampled on `regime_window`.

    Ergodicity: the anchor and `rival` (another start, at settle_t) agree within tol.
    Periodicity: p(settle_t) and p(settle_t + period) agree within tol; when the
    anchor covers a second period every sample is compared with its shift.
    """
    ergodicity_gap = l1_distance(anchor.probs[0], rival)
    periodicity_gap = l1_distance(anchor.probs[0], anchor.probs[samples - 1])
    profile_gap = None
    if len(anchor) > samples:
        profile_gap = max(l1_distance(anchor.probs[i], anchor.probs[i + samples - 1])
                          for i in range(samples))
    worst = max(ergodicity_gap, periodicity_gap, profile_gap or 0.0)
    if worst > tol:
        raise WitnessError("limiting-regime witness failed: increase settle time or truncation level",
                           ergodicity_gap=ergodicity_gap, periodicity_gap=periodicity_gap,
                           profile_gap=profile_gap, tol=tol)
    logger.info("limiting regime witnesses: ergodicity %.3g, periodicity %.3g", ergodicity_gap, periodicity_gap)
    regime = Trajectory(anchor.times[:samples], anchor.probs[:samples], max_drift=anchor.max_drift)
    return LimitingRegime(regime, ergodicity_gap, periodicity_gap, profile_gap)


def limiting_regime(model: QueueModel, n: int, settle_t: float, period: float, tol: float,
                    h: Optional[float] = None, samples: int = 21,
                    periodicity_profile: bool = False) -> LimitingRegime:
    """The e_0-anchored periodic regime over [settle_t, settle_t + period]; e_{n//2} is the ergodicity witness."""
    check_regime_request(model, period, tol, samples)
    times = regime_window(settle_t, period, samples, periodicity_profile)
    anchor, rival = sample_block(model, n, [ProbabilityVector.point_mass(n, 0),
                                            ProbabilityVector.point_mass(n, n // 2)], times, h)
    return assess_regime(anchor, rival.at(0), samples, tol)


class PairDistance(NamedTuple):
    t: float
    l1: float
    weighted: float


def distance_trace(first: Trajectory, second: Trajectory,
                   weights: Optional[WeightSequence] = None) -> List[PairDistance]:
    """l1 and weighted distances between two trajectories recorded at the same times."""
    weights = WeightSequence.doubling() if weights is None else weights
    diff = first.probs - second.probs
    return [PairDistance(float(t), float(np.abs(row).sum()), weighted_norm(row[1:], weights))
            for t, row in zip(first.times, diff)]


def pair_distance_trace(model: QueueModel, n: int, j1: int, j2: int, t1: float,
                        h: Optional[float] = None, grid: int = 15,
                        weights: Optional[WeightSequence] = None) -> List[PairDistance]:
    """l1 and weighted distances between the solutions started from e_j1 and e_j2."""
    if j1 == j2:
        raise PreconditionError("pair trace needs two distinct initial states", j=j1)
    times = np.linspace(0.0, t1, grid)
    first, second = sample_block(model, n, [ProbabilityVector.point_mass(n, j1),
                                            ProbabilityVector.point_mass(n, j2)], times, h)
    return distance_trace(first, second, weights)


def write_trajectory_csv(trajectory: Trajectory, path, provenance: Optional[Mapping[str, object]] = None):
    """CSV with `# key=value` provenance lines, header t,mean,p0..pn, 17 significant digits."""
    header = ",".join(["t", "mean"] + [f"p{k}" for k in range(trajectory.n + 1)])
    table = np.column_stack([trajectory.times, trajectory.means, trajectory.probs])
    with open(path, "w", newline="") as fh:
        for key, value in (provenance or {}).items():
            fh.write(f"# {key}={value}\n")
        np.savetxt(fh, table, delimiter=",", fmt="%.17g", header=header, comments="")
