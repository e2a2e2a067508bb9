"""
End-to-end scenarios on the large-server example. Deselect with `-m "not slow"`.

Groups:
  1. Distance trace against the closed-form bound
  2. Limiting regime and truncation self-consistency
  3. Monte Carlo against the forward equations
  4. The example command
"""
import json
import math
import time

import numpy as np
import pytest

import config
from kfe import ProbabilityVector, l1_distance, limiting_regime, pair_distance_trace, sample_forward
from main import run_command
from mc import simulate_estimate

pytestmark = pytest.mark.slow


# ═══════════════════════════════════════════════════════════════════════════
# Group 1: distance trace against the closed-form bound
# ═══════════════════════════════════════════════════════════════════════════

def test_distance_trace_below_closed_form(example_model):
    trace = pair_distance_trace(example_model, 150, 5, 0, 7.0, h=1e-4, grid=15)
    for row in trace:
        assert row.l1 <= 2.0 ** 9 * math.exp(-3.0 * row.t), f"t={row.t}: {row.l1}"


# ═══════════════════════════════════════════════════════════════════════════
# Group 2: limiting regime and truncation self-consistency
# ═══════════════════════════════════════════════════════════════════════════

def test_limiting_regime_of_the_example(example_model):
    regime = limiting_regime(example_model, 120, 6.0, 1.0, 1e-5, h=1e-4, samples=21)
    assert regime.ergodicity_gap <= 1e-5
    assert regime.periodicity_gap <= 1e-5
    assert np.all(regime.trajectory.means >= 0.0)
    assert np.all((regime.trajectory.probs[:, 0] > 0.0) & (regime.trajectory.probs[:, 0] < 1.0))


def test_truncation_levels_agree(example_model):
    times = np.linspace(6.0, 7.0, 5)
    coarse = sample_forward(example_model, 120, ProbabilityVector.point_mass(120, 0), times, h=1e-4)
    fine = sample_forward(example_model, 150, ProbabilityVector.point_mass(150, 0), times, h=1e-4)
    for i, t in enumerate(times):
        gap = l1_distance(np.pad(coarse.probs[i], (0, 30)), fine.probs[i])
        assert gap <= 1e-8, f"t={t}: {gap}"


# ═══════════════════════════════════════════════════════════════════════════
# Group 3: Monte Carlo against the forward equations
# ═══════════════════════════════════════════════════════════════════════════

def test_simulation_matches_forward_equations(example_model):
    t, paths = 6.5, 100_000
    forward = sample_forward(example_model, 120, ProbabilityVector.point_mass(120, 0), [t], h=1e-4)
    estimate = simulate_estimate(example_model, 0, [t], paths, seed=2024, workers=4)
    exact = forward.probs[-1, 0]
    p, se = estimate.prob(0)
    assert abs(p - exact) <= 4.0 * max(se, 1e-12), f"{p} +- {se} vs {exact}"
    mean, mean_se = estimate.mean_at(-1)
    exact_mean = forward.means[-1]
    assert abs(mean - exact_mean) <= 4.0 * max(mean_se, 1e-12), f"{mean} +- {mean_se} vs {exact_mean}"

    again = simulate_estimate(example_model, 0, [t], paths, seed=2024, workers=4)
    assert again.state_probs.keys() == estimate.state_probs.keys()
    for k in estimate.state_probs:
        np.testing.assert_array_equal(again.state_probs[k][0], estimate.state_probs[k][0])
    np.testing.assert_array_equal(again.mean[0], estimate.mean[0])
    np.testing.assert_array_equal(again.mean[1], estimate.mean[1])


# ═══════════════════════════════════════════════════════════════════════════
# Group 4: the example command
# ═══════════════════════════════════════════════════════════════════════════

def test_example_command(tmp_path, capsys):
    started = time.perf_counter()
    assert run_command(["example", "--out", str(tmp_path)]) == 0
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"example took {elapsed:.1f} s"
    report = json.loads(capsys.readouterr().out)
    assert report["W"] == 1.0
    assert report["log_W_n"] == pytest.approx(119 * math.log(2.0) - math.log(120.0), rel=1e-12)
    assert report["L"] == pytest.approx(5e12, rel=1e-2)
    assert report["L_grid_step"] == pytest.approx(1.0 / config.GRID_POINTS)
    assert report["provenance"]["inputs"]["grid_points"] == config.GRID_POINTS
    assert report["envelope"]["a"] == pytest.approx(3.0, rel=1e-9)
    assert report["envelope"]["M"] <= 4.0
    assert report["min_level"] <= report["certified_level"] == 120
    assert max(report["certificate"]["tv_bound"], report["certificate"]["mean_bound"]) <= 1e-6
    assert report["ergodicity_gap"] <= 1e-5 and report["profile_gap"] <= 1e-5
    for row in report["comparison"]:
        assert row["measured_l1"] <= row["certified_bound"] <= row["closed_form_bound"]
    for row in report["rounded"]:
        assert row["exact_tv"] <= row["rounded_tv"] and row["exact_mean"] <= row["rounded_mean"]
    for name in report["figure_csv"]:
        assert (tmp_path / name.split("/")[-1]).exists()
    assert json.loads((tmp_path / "example_report.json").read_text()) == report
