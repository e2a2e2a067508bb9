"""
Tests for mc: thinning simulation and its estimates.

Groups:
  1. Closed-form checks
  2. Reproducibility and worker independence
  3. Agreement with the forward equations
"""
import math

import numpy as np
import pytest
from scipy.linalg import expm

from errors import PreconditionError
from kfe import ProbabilityVector, integrate_forward
from mc import path_generator, simulate_estimate, simulate_path
from qmodel import CatastropheProfile, QueueModel, RateExpr, truncated_generator


# ═══════════════════════════════════════════════════════════════════════════
# Group 1: closed-form checks
# ═══════════════════════════════════════════════════════════════════════════

def test_pure_death_single_server():
    model = QueueModel(1, RateExpr.zero(), RateExpr.constant(1.0), RateExpr.zero())
    paths = 100_000
    estimate = simulate_estimate(model, 1, [1.0], paths, seed=1)
    p, se = estimate.prob(0)
    expected = 1.0 - math.exp(-1.0)
    assert abs(p - expected) <= 4.0 * math.sqrt(expected * (1 - expected) / paths), f"{p} vs {expected}"
    assert se == pytest.approx(math.sqrt(p * (1 - p) / paths))


def test_zero_rates_keep_the_state():
    model = QueueModel(3, RateExpr.zero(), RateExpr.zero(), RateExpr.zero())
    estimate = simulate_estimate(model, 4, [0.5, 1.0, 2.0], 200, seed=3)
    assert list(estimate.state_probs) == [4]
    np.testing.assert_array_equal(estimate.state_probs[4][0], 1.0)
    np.testing.assert_array_equal(estimate.state_probs[4][1], 0.0)
    assert estimate.mean_at(-1) == (4.0, 0.0)
    assert estimate.prob(2) == (0.0, 0.0)


def test_single_path_states(mm1):
    states = simulate_path(mm1, 0, np.array([0.0, 1.0, 5.0]), path_generator(0, 0))
    assert states.dtype == np.int64
    assert states[0] == 0
    assert np.all(states >= 0)


def test_invalid_requests_rejected(mm1):
    with pytest.raises(PreconditionError):
        simulate_estimate(mm1, 0, [1.0, 0.5], 10, seed=0)
    with pytest.raises(PreconditionError):
        simulate_estimate(mm1, 0, [1.0], 0, seed=0)
    with pytest.raises(PreconditionError):
        simulate_estimate(mm1, -1, [1.0], 10, seed=0)


# ═══════════════════════════════════════════════════════════════════════════
# Group 2: reproducibility and worker independence
# ═══════════════════════════════════════════════════════════════════════════

def test_same_seed_same_estimate(example_model):
    first = simulate_estimate(example_model, 2, [0.5, 1.0], 2000, seed=42)
    second = simulate_estimate(example_model, 2, [0.5, 1.0], 2000, seed=42)
    assert first.state_probs.keys() == second.state_probs.keys()
    for k in first.state_probs:
        np.testing.assert_array_equal(first.state_probs[k][0], second.state_probs[k][0])
    np.testing.assert_array_equal(first.mean[0], second.mean[0])


def test_result_independent_of_workers(mm1):
    serial = simulate_estimate(mm1, 0, [0.5, 1.0], 800, seed=9, workers=1)
    parallel = simulate_estimate(mm1, 0, [0.5, 1.0], 800, seed=9, workers=2)
    assert serial.state_probs.keys() == parallel.state_probs.keys()
    for k in serial.state_probs:
        np.testing.assert_array_equal(serial.state_probs[k][0], parallel.state_probs[k][0])
    np.testing.assert_array_equal(serial.mean[0], parallel.mean[0])


def test_standard_error_scaling(mm1):
    small = simulate_estimate(mm1, 0, [1.0], 5000, seed=5)
    large = simulate_estimate(mm1, 0, [1.0], 20000, seed=5)
    ratio = small.prob(0).stderr / large.prob(0).stderr
    assert ratio == pytest.approx(2.0, rel=0.1)


# ═══════════════════════════════════════════════════════════════════════════
# Group 3: agreement with the forward equations
# ═══════════════════════════════════════════════════════════════════════════

HOMOGENEOUS = [
    QueueModel(1, RateExpr.constant(1.0), RateExpr.constant(2.0), RateExpr.zero()),
    QueueModel(2, RateExpr.constant(2.0), RateExpr.constant(1.0), RateExpr.constant(0.5),
               CatastropheProfile.constant(1.0)),
    QueueModel(3, RateExpr.constant(1.5), RateExpr.constant(1.0), RateExpr.constant(0.5),
               CatastropheProfile.one_plus_c_over_k(1.0)),
]


@pytest.mark.parametrize("model", HOMOGENEOUS)
def test_homogeneous_models_match_expm(model):
    n, t, paths = 40, 1.0, 20_000
    p0 = np.zeros(n + 1)
    p0[0] = 1.0
    exact = expm(truncated_generator(model, n, 0.0).entries * t) @ p0
    estimate = simulate_estimate(model, 0, [t], paths, seed=17)
    for k in range(n + 1):
        if exact[k] < 1e-3:
            continue
        p, _ = estimate.prob(k)
        se = math.sqrt(exact[k] * (1 - exact[k]) / paths)
        assert abs(p - exact[k]) <= 4.5 * se, f"state {k}: {p} vs {exact[k]}"


def test_periodic_model_matches_forward_equations(catastrophe_model):
    t, paths = 1.5, 20_000
    forward = integrate_forward(catastrophe_model, 40, ProbabilityVector.point_mass(40, 2), 0.0, t, h=1e-3)
    estimate = simulate_estimate(catastrophe_model, 2, [t], paths, seed=23)
    for k, exact in enumerate(forward.probs[-1]):
        if exact < 1e-3:
            continue
        p, _ = estimate.prob(k)
        se = math.sqrt(exact * (1 - exact) / paths)
        assert abs(p - exact) <= 4.5 * se, f"state {k}: {p} vs {exact}"
