"""Exact path simulation of the inhomogeneous chain by thinning.

Each path draws from its own Philox stream keyed by (seed, path index), so the
result does not depend on how paths are split across workers.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

import config
from errors import PreconditionError
from qmodel import QueueModel

logger = logging.getLogger(__name__)


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class SimulationEstimate:
    eval_times: np.ndarray
    state_probs: Dict[int, Tuple[np.ndarray, np.ndarray]]
    mean: Tuple[np.ndarray, np.ndarray]
    paths: int
    seed: int
    k0: int

    def prob(self, k: int, i: int = -1) -> Estimate:
        """P(X(eval_times[i]) = k) with its standard error; zero for states never visited."""
        if k not in self.state_probs:
            return Estimate(0.0, 0.0)
        values, errors = self.state_probs[k]
        return Estimate(float(values[i]), float(errors[i]))

    def mean_at(self, i: int = -1) -> Estimate:
        return Estimate(float(self.mean[0][i]), float(self.mean[1][i]))


def path_generator(seed: int, path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, path]))


def simulate_path(model: QueueModel, k0: int, eval_times: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """States at eval_times of one path started at k0 at time 0."""
    lam_ub, mu_ub, xi_ub = (rate.upper_bound() for rate in model.rates)
    S = model.servers
    out = np.empty(len(eval_times), dtype=np.int64)
    k, t, idx = k0, 0.0, 0
    while idx < len(eval_times):
        busy = min(k, S)
        majorant = lam_ub + busy * mu_ub + model.zeta(k) * xi_ub
        if majorant <= 0:
            out[idx:] = k
            break
        t_next = t + rng.exponential(1.0 / majorant)
        while idx < len(eval_times) and eval_times[idx] < t_next:
            out[idx] = k
            idx += 1
        if idx == len(eval_times):
            break
        t = t_next
        lam, mu, xi = model.rates_at(t)
        birth, death, catastrophe = lam, busy * mu, model.zeta(k) * xi
        u = rng.random() * majorant
        if u < birth:
            k += 1
        elif u < birth + death:
            k -= 1
        elif u < birth + death + catastrophe:
            k = 0
    return out


def _simulate_chunk(model: QueueModel, k0: int, eval_times: np.ndarray, seed: int,
                    start: int, stop: int) -> np.ndarray:
    return np.array([simulate_path(model, k0, eval_times, path_generator(seed, path))
                     for path in range(start, stop)], dtype=np.int64).reshape(stop - start, len(eval_times))


def simulate_estimate(model: QueueModel, k0: int, eval_times: Sequence[float], paths: int, seed: int,
                      workers: Optional[int] = None) -> SimulationEstimate:
    eval_times = np.asarray(eval_times, dtype=float)
    workers = config.WORKERS if workers is None else workers
    if paths < 1:
        raise PreconditionError("need at least one path", paths=paths)
    if k0 < 0 or seed < 0:
        raise PreconditionError("initial state and seed must be nonnegative", k0=k0, seed=seed)
    if eval_times.size == 0 or eval_times[0] < 0 or np.any(np.diff(eval_times) <= 0):
        raise PreconditionError("evaluation times must be nonnegative and increasing")

    if workers > 1:
        bounds = np.linspace(0, paths, min(paths, 4 * workers) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_chunk, *zip(*[
                (model, k0, eval_times, seed, int(a), int(b)) for a, b in zip(bounds, bounds[1:])])))
        states = np.concatenate(chunks)
    else:
        states = _simulate_chunk(model, k0, eval_times, seed, 0, paths)

    mean = states.mean(axis=0)
    mean_err = states.std(axis=0, ddof=1) / math.sqrt(paths) if paths > 1 else np.zeros_like(mean)
    state_probs = {}
    for k in np.unique(states):
        p = (states == k).mean(axis=0)
        state_probs[int(k)] = (p, np.sqrt(p * (1.0 - p) / paths))
    logger.info("simulated %d paths from k0=%d (seed %d, %d workers)", paths, k0, seed, max(workers, 1))
    return SimulationEstimate(eval_times, state_probs, (mean, mean_err), paths, seed, k0)
