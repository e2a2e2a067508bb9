"""
Tests for qmodel: rate expressions, the queue model and its finite generators.

Groups:
  1. Rate expressions: evaluation, closed-form integrals, nonnegativity checks
  2. Catastrophe profiles and the queue model
  3. Transition rates and the essential bound
  4. Truncated generator and reduced matrix
"""
import math

import numpy as np
import pytest
from scipy import integrate

from errors import PreconditionError
from qmodel import (CatastropheProfile, QueueModel, RateExpr, StepTerm, TrigTerm, common_period, essential_bound,
                    eval_rate, integrate_rate, large_server_example, measure_essential_bound, reduced_matrix,
                    servers_array, transition_rates, truncated_generator)


# ═══════════════════════════════════════════════════════════════════════════
# Group 1: rate expressions
# ═══════════════════════════════════════════════════════════════════════════

def test_eval_rate_example_values(example_model):
    assert eval_rate(example_model.lam, 0.25) == pytest.approx(2.0)
    assert eval_rate(example_model.mu, 0.5) == pytest.approx(1.0)
    assert eval_rate(example_model.xi, 0.75) == pytest.approx(2.0)


def test_eval_rate_rejects_negative_time(example_model):
    with pytest.raises(PreconditionError):
        eval_rate(example_model.lam, -0.1)


def test_integrate_rate_closed_forms(example_model):
    assert integrate_rate(example_model.lam, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert integrate_rate(example_model.mu, 0.0, 0.5) == pytest.approx(1.5, abs=1e-12)
    assert integrate_rate(example_model.xi, 0.0, 0.5) == pytest.approx(0.5 - 1.0 / math.pi, abs=1e-12)
    assert integrate_rate(example_model.lam, 0.3, 0.3) == 0.0


def test_integrate_rate_matches_quadrature(example_model):
    rng = np.random.default_rng(7)
    for rate in example_model.rates:
        for _ in range(20):
            s, t = np.sort(rng.uniform(0.0, 5.0, size=2))
            expected, _ = integrate.quad(rate, s, t, epsabs=1e-13, limit=200)
            got = integrate_rate(rate, s, t)
            assert got == pytest.approx(expected, abs=1e-10), f"[{s}, {t}]: {got} vs {expected}"


def test_integrate_rate_is_additive(example_model):
    stepped = RateExpr(1.0, trig_terms=(TrigTerm(0.5, 0.25, 3.0),), step_terms=(StepTerm(0.4, 2.2, 0.7),))
    rng = np.random.default_rng(3)
    for rate in example_model.rates + (stepped,):
        for _ in range(50):
            a, b, c = np.sort(rng.uniform(0.0, 10.0, size=3))
            whole = integrate_rate(rate, a, c)
            split = integrate_rate(rate, a, b) + integrate_rate(rate, b, c)
            assert split == pytest.approx(whole, rel=1e-12, abs=1e-12), f"[{a}, {b}, {c}]"


def test_integrate_rate_reversed_interval_rejected(example_model):
    with pytest.raises(PreconditionError):
        integrate_rate(example_model.lam, 1.0, 0.5)


def test_negative_rate_expression_rejected():
    with pytest.raises(PreconditionError):
        RateExpr.sinusoid(0.5, sin_amp=1.0)
    with pytest.raises(PreconditionError):
        RateExpr(const_term=1.0, trig_terms=(TrigTerm(0.8, 0.8, 1.0),))


def test_rate_expression_accepted_by_sampling():
    # |0.8| + |0.8| exceeds 1.2 but the true amplitude is about 1.131
    rate = RateExpr(const_term=1.2, trig_terms=(TrigTerm(0.8, 0.8, 1.0),))
    assert rate.lower_bound() == pytest.approx(1.2 - math.hypot(0.8, 0.8))


def test_step_terms():
    rate = RateExpr(1.0, step_terms=(StepTerm(1.0, 2.0, -1.0),))
    assert rate(1.5) == 0.0
    assert rate(2.0) == 1.0
    assert rate.integral(0.0, 3.0) == pytest.approx(2.0)
    assert not rate.is_periodic
    with pytest.raises(PreconditionError):
        StepTerm(2.0, 1.0, 0.5)


def test_common_period():
    assert common_period([1.0]) == pytest.approx(1.0)
    assert common_period([2.0, 3.0]) == pytest.approx(1.0)
    assert common_period([0.5]) == pytest.approx(2.0)
    assert common_period([]) == 1.0


# ═══════════════════════════════════════════════════════════════════════════
# Group 2: catastrophe profiles and the queue model
# ═══════════════════════════════════════════════════════════════════════════

def test_catastrophe_profiles():
    harmonic = CatastropheProfile.one_plus_c_over_k(1.0)
    assert harmonic(0) == 0.0
    assert harmonic(1) == 2.0
    assert harmonic(4) == 1.25
    assert harmonic.sup == 2.0 and harmonic.inf == 1.0
    np.testing.assert_allclose(harmonic.upto(3), [0.0, 2.0, 1.5, 4.0 / 3.0])

    table = CatastropheProfile.table_with_tail([0.0, 1.0], 0.5)
    assert [table(k) for k in range(5)] == [0.0, 0.0, 1.0, 0.5, 0.5]
    assert table.inf == 0.0 and table.sup == 1.0
    np.testing.assert_array_equal(table.upto(4), [0.0, 0.0, 1.0, 0.5, 0.5])


def test_catastrophe_profile_validation():
    with pytest.raises(PreconditionError):
        CatastropheProfile.constant(-1.0)
    with pytest.raises(PreconditionError):
        CatastropheProfile.table_with_tail([1.0, -0.5], 1.0)


@pytest.mark.parametrize("servers", [0, -3, 1.5, True])
def test_queue_model_rejects_bad_servers(servers):
    with pytest.raises(PreconditionError):
        QueueModel(servers, RateExpr.constant(1.0), RateExpr.constant(1.0), RateExpr.zero())


def test_model_period(example_model):
    assert example_model.period == pytest.approx(1.0)
    stepped = QueueModel(1, RateExpr(1.0, step_terms=(StepTerm(0.0, 1.0, 1.0),)),
                         RateExpr.constant(1.0), RateExpr.zero())
    assert stepped.period is None
    mixed = QueueModel(1, RateExpr.sinusoid(2.0, sin_amp=1.0, freq=2.0),
                       RateExpr.sinusoid(2.0, cos_amp=1.0, freq=3.0), RateExpr.zero())
    assert mixed.period == pytest.approx(1.0)


# ═══════════════════════════════════════════════════════════════════════════
# Group 3: transition rates and the essential bound
# ═══════════════════════════════════════════════════════════════════════════

def test_transition_rates_example(example_model):
    birth, death, catastrophe = transition_rates(example_model, 3, 0.0)
    assert birth == pytest.approx(1.0)
    assert death == pytest.approx(15.0)
    assert catastrophe == pytest.approx(4.0 / 3.0)
    assert transition_rates(example_model, 0, 0.0) == (pytest.approx(1.0), 0.0, 0.0)


def test_transition_rates_saturate_at_servers(example_model):
    _, death, _ = transition_rates(example_model, 2 * 10**12, 0.0)
    assert death == pytest.approx(5e12, rel=1e-15)


def test_busy_servers_exact_for_huge_s():
    S = 10**18
    model = QueueModel(S, RateExpr.constant(1.0), RateExpr.constant(1.0), RateExpr.zero())
    assert model.busy(S + 1) == S
    assert transition_rates(model, S, 0.0)[1] == transition_rates(model, S + 1, 0.0)[1]
    assert servers_array(2, 4).tolist() == [0.0, 1.0, 2.0, 2.0, 2.0]


def test_essential_bound(example_model):
    assert essential_bound(example_model) == pytest.approx(5e12, rel=1e-2)
    constant = QueueModel(1, RateExpr.constant(1.0), RateExpr.constant(2.0), RateExpr.constant(1.0))
    assert essential_bound(constant) == pytest.approx(4.0)
    silent = QueueModel(1, RateExpr.zero(), RateExpr.zero(), RateExpr.zero())
    assert essential_bound(silent) == 0.0


def test_essential_bound_reports_grid_step(example_model):
    coarse = measure_essential_bound(example_model, grid_points=500)
    assert coarse.grid_step == pytest.approx(1.0 / 500)
    assert coarse.value == pytest.approx(5e12, rel=1e-2)
    assert coarse.value <= measure_essential_bound(example_model, grid_points=4000).value


# ═══════════════════════════════════════════════════════════════════════════
# Group 4: truncated generator and reduced matrix
# ═══════════════════════════════════════════════════════════════════════════

def test_two_state_generator(mm1):
    G = truncated_generator(mm1, 1, 0.0)
    np.testing.assert_allclose(G.entries, [[-1.0, 2.0], [1.0, -2.0]])


def test_generator_columns_conserve_mass(example_model):
    for t in np.linspace(0.0, 1.0, 9):
        G = truncated_generator(example_model, 120, float(t))
        sums = G.column_sums()
        assert np.max(np.abs(sums)) <= 1e-12, f"t={t}: column sums {np.max(np.abs(sums))}"
        off = G.entries - np.diag(np.diag(G.entries))
        assert off.min() >= 0.0
        assert np.diag(G.entries).max() <= 0.0


def test_generator_catastrophe_entry(example_model):
    G = truncated_generator(example_model, 120, 0.0)
    assert G.entries[0, 5] == pytest.approx(1.2)
    assert G.entries[6, 5] == pytest.approx(1.0)
    assert G.entries[4, 5] == pytest.approx(25.0)


def test_generator_random_models_conserve_mass():
    rng = np.random.default_rng(3)
    for _ in range(10):
        lam, mu, xi = rng.uniform(0.0, 5.0, size=3)
        model = QueueModel(int(rng.integers(1, 20)), RateExpr.constant(lam), RateExpr.constant(mu),
                           RateExpr.constant(xi), CatastropheProfile.one_plus_c_over_k(float(rng.uniform(0, 2))))
        G = truncated_generator(model, 40, 0.0)
        assert np.max(np.abs(G.column_sums())) <= 1e-12


def test_reduced_matrix_entries(example_model):
    B = reduced_matrix(example_model, 3, 0.0)
    assert B[0, 0] == pytest.approx(-9.0)
    assert B[1, 0] == pytest.approx(1.0)
    assert B[0, 1] == pytest.approx(10.0 - 1.0)
    assert B[0, 2] == pytest.approx(-1.0)


def test_reduced_matrix_without_births():
    model = QueueModel(10, RateExpr.zero(), RateExpr.constant(2.0), RateExpr.zero())
    B = reduced_matrix(model, 5, 0.0)
    assert B[0, 1] == pytest.approx(4.0)
    np.testing.assert_array_equal(B[0, 2:], 0.0)


def test_reduced_matrix_drives_the_same_dynamics(example_model):
    n, t = 12, 0.3
    rng = np.random.default_rng(11)
    p = rng.random(n + 1)
    p /= p.sum()
    full = truncated_generator(example_model, n, t).entries @ p
    lam = example_model.lam(t)
    f = np.zeros(n)
    f[0] = lam
    reduced = reduced_matrix(example_model, n, t) @ p[1:] + f
    np.testing.assert_allclose(reduced, full[1:], atol=1e-12)
