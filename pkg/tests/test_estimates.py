import numpy as np
import pytest
from numpy.testing import assert_allclose

from delaygalerkin.services import estimates
from delaygalerkin.services.delay_model import DelayLaw
from delaygalerkin.services.estimates import EstimateConstants
from delaygalerkin.services.galerkin_integrator import run


@pytest.fixture
def constants(small_scenario):
    return EstimateConstants.from_scenario(small_scenario)


@pytest.fixture
def trajectory(small_scenario):
    return run(small_scenario)


def test_reference_constants(constants):
    K = np.pi ** 1.5 * 2.0 / np.e
    assert constants.K == pytest.approx(K)
    assert constants.k1 == 1.0
    assert constants.k3 == pytest.approx(K ** 2)
    assert constants.lambda_1 == pytest.approx(1.0)
    assert constants.radius_sq == pytest.approx(K ** 2 / 3.0)
    assert constants.gamma1 == pytest.approx(1.0)
    assert constants.d1 == pytest.approx(3.0 * K ** 2)
    assert constants.gamma2 == pytest.approx(1.0)
    assert constants.r1_analytic > constants.radius
    assert set(constants.to_dict()) >= {'K', 'k1', 'k3', 'radius_sq', 'r1_analytic'}


def test_energy_functional_of_the_linear_solution(linear_scenario):
    trajectory = run(linear_scenario)
    t = trajectory.times
    # chi = e^{-4t} + 2 int_0^t e^{-4s} ds = (1 + e^{-4t}) / 2
    assert_allclose(estimates.energy_functional(trajectory), 0.5 * (1 + np.exp(-4 * t)), rtol=2e-3)


def test_energy_check_passes(trajectory, small_scenario, constants):
    record = estimates.energy_check(trajectory, small_scenario, constants)
    assert record.passed
    assert record.margin > 0
    assert record.constants['k3'] == pytest.approx(constants.k3)
    assert set(record.series) == {'t', 'chi', 'bound'}


def test_dissipativity_reports_both_exponents(trajectory, small_scenario, constants):
    record = estimates.dissipativity_check(trajectory, small_scenario, constants)
    assert record.passed
    assert record.constants['rate_derived'] == pytest.approx(3.0)
    assert record.constants['rate_printed'] == pytest.approx(4.0)
    assert 'printed_margin' in record.details
    assert record.details['long_run_applicable'] is False


def test_dissipativity_long_run_tail(small_scenario, constants):
    long_run = run(small_scenario.with_changes(horizon=12.0))
    record = estimates.dissipativity_check(long_run, small_scenario, constants)
    assert record.details['long_run_applicable'] is True
    assert record.details['tail_excess'] <= 1e-3
    assert record.passed


def test_dual_norm_check_passes(trajectory, small_scenario, constants):
    record = estimates.dual_norm_check(trajectory, small_scenario, constants)
    assert record.passed
    assert record.details['integral'] <= record.constants['C_T']


def test_rhs_bound_check(small_scenario):
    record = estimates.rhs_bound_check(small_scenario, samples=200)
    assert record.passed
    assert record.details['max_norm_discrete'] <= record.constants['bound'] + 1e-8
    assert record.details['max_norm_distributed'] <= record.constants['bound'] + 1e-8


def test_kernel_hypotheses_check_with_state_dependent_delay(small_scenario):
    scenario = small_scenario.with_changes(law=DelayLaw.sigmoid(eta_max=0.75, c0=-1.0, c1=1.0, c2=0.5))
    record = estimates.kernel_hypotheses_check(scenario, samples=100, n_max=3)
    assert record.passed
    assert [entry['n'] for entry in record.details['per_index']] == [1, 2, 3]


def test_lebesgue_check_on_sine():
    eps = [0.125 * 0.5 ** i for i in range(6)]
    record = estimates.lebesgue_check(np.sin, 0.3, eps, lipschitz=1.0)
    assert record.passed
    assert record.details['order'] >= 0.9


def test_lebesgue_error_is_exact_for_linear_functions():
    eps = [0.1, 0.05, 0.025]
    record = estimates.lebesgue_check(lambda s: 2.0 * s + 1.0, 0.3, eps, lipschitz=2.0)
    assert_allclose(record.details['errors'], eps, atol=1e-10)
    assert record.details['order'] == pytest.approx(1.0, abs=1e-6)


def test_lebesgue_estimates_the_lipschitz_constant():
    record = estimates.lebesgue_check(lambda s: 3.0 * s, 0.2, [0.1, 0.05])
    assert record.constants['lipschitz'] == pytest.approx(3.0, rel=1e-9)


def test_continuous_dependence_is_linear_in_delta(small_scenario):
    record = estimates.continuous_dependence_check(small_scenario, deltas=[1e-3, 5e-4, 2.5e-4])
    assert record.passed
    assert record.details['deltas'] == [1e-3, 5e-4, 2.5e-4]
    assert all(abs(r - 1.0) <= 0.2 for r in record.details['response_ratios'])
    assert {'C5', 'C3', 'C4', 'M', 'eps_n'} <= set(record.constants)


def test_uniqueness_witness_starts_from_zero_difference(small_scenario):
    record = estimates.uniqueness_witness(small_scenario, delta=1e-3)
    assert record.details['D_0'] == 0.0
    assert record.details['history_gap'] > 0
    assert record.details['D_max'] > 0
    assert record.passed


def test_limiting_solution_converges_monotonically(small_scenario):
    record = estimates.limiting_solution_study(small_scenario, n_max=4)
    assert record.passed
    errors = record.details['errors']
    assert len(errors) == 4
    assert record.details['monotone']
    assert record.details['mean_reduction'] >= 1.5
    assert set(record.series) == {'eps', 'error'}


def test_integrator_is_first_order(small_scenario):
    record = estimates.integrator_convergence_study(small_scenario, levels=3, horizon=1.0)
    assert record.passed
    assert all(1.5 <= r <= 2.5 for r in record.details['ratios'])


def test_energy_margin_study_reports_each_level(small_scenario):
    record = estimates.energy_margin_study(small_scenario, levels=3, horizon=2.0)
    worst = record.details['worst_margin']
    assert len(worst) == 3
    gains = record.details['gains']
    assert gains == pytest.approx([worst[1] - worst[0], worst[2] - worst[1]])
    assert record.details['improving'] == all(g >= -estimates.IMPROVEMENT_TOLERANCE for g in gains)
    assert record.details['improving'] or not record.passed


def _margins_by_level(monkeypatch, levels):
    margins = iter(np.array(level) for level in levels)
    monkeypatch.setattr(estimates, 'run', lambda scenario, initial, label='': None)
    monkeypatch.setattr(estimates, 'energy_margins', lambda trajectory, scenario, constants: next(margins))


def test_energy_margin_study_passes_when_margins_grow(small_scenario, monkeypatch):
    _margins_by_level(monkeypatch, [[0.60, 0.54], [0.60, 0.545], [0.60, 0.547]])
    record = estimates.energy_margin_study(small_scenario, levels=3, horizon=2.0)
    assert record.passed
    assert record.details['improving']
    assert record.margin > 0


def test_energy_margin_study_fails_when_margins_shrink(small_scenario, monkeypatch):
    _margins_by_level(monkeypatch, [[0.6, 0.54597], [0.6, 0.54581], [0.6, 0.54573]])
    record = estimates.energy_margin_study(small_scenario, levels=3, horizon=2.0)
    assert not record.passed
    assert not record.details['improving']
    assert record.details['changes'][1] <= record.details['changes'][0]
    assert record.margin < 0
