"""
Verification Service - assembles VerificationReports for the CLI commands.
"""
import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from delaygalerkin.models.report import VerificationReport
from delaygalerkin.models.scenario import Scenario
from delaygalerkin.models.trajectory import Trajectory
from delaygalerkin.services import estimates
from delaygalerkin.services.galerkin_integrator import GalerkinIntegrator, run_family
from delaygalerkin.services.trajectory_space import (TrajectoryEnsemble, absorbing_check, attraction_diagnostic,
                                                     semigroup_check)
from delaygalerkin.utils.initial_data import build_initial_state

logger = logging.getLogger(__name__)

LEBESGUE_LEVELS = 6
LEBESGUE_SHIFT = 0.3


def _aligned(scenario: Scenario, time: float) -> float:
    return scenario.dt * int(round(time / scenario.dt))


def _report(command: str, scenario: Scenario, config_text: str) -> VerificationReport:
    return VerificationReport(command=command, scenario=scenario.to_dict(), config_text=config_text)


def pair_report(scenario: Scenario, delta: float, config_text: str = '', base: Optional[Trajectory] = None,
                deltas: Optional[Sequence[float]] = None) -> VerificationReport:
    """
    Continuous dependence plus the history-only witness at delta.

    Without an explicit deltas list the perturbations are delta, delta/2,
    delta/4 and delta/8.
    """
    report = _report('pair', scenario, config_text)
    constants = estimates.EstimateConstants.from_scenario(scenario)
    base = base or GalerkinIntegrator(scenario).run(label='pair-base')
    deltas = list(deltas) if deltas else [delta / 2 ** i for i in range(4)]
    dependence = report.add(estimates.continuous_dependence_check(scenario, deltas, base=base, constants=constants))
    report.add(estimates.uniqueness_witness(scenario, delta, growth=dependence.constants['C5'], base=base,
                                            constants=constants))
    return report


def sweep_report(scenario: Scenario, n_max: Optional[int] = None, config_text: str = '') -> VerificationReport:
    report = _report('sweep-n', scenario, config_text)
    report.add(estimates.limiting_solution_study(scenario, n_max))
    return report


def verify_report(scenario: Scenario, config_text: str = '') -> VerificationReport:
    """Every estimate check on one scenario."""
    report = _report('verify', scenario, config_text)
    constants = estimates.EstimateConstants.from_scenario(scenario)
    analysis = scenario.analysis

    report.add(estimates.rhs_bound_check(scenario))
    report.add(estimates.kernel_hypotheses_check(scenario))
    eps = [scenario.span / 8.0 * 0.5 ** i for i in range(LEBESGUE_LEVELS)]
    report.add(estimates.lebesgue_check(np.sin, LEBESGUE_SHIFT, eps, lipschitz=1.0))

    logger.info("Main run for %s", scenario.name)
    trajectory = GalerkinIntegrator(scenario).run(label='main')
    report.add(estimates.energy_check(trajectory, scenario, constants))
    report.add(estimates.dual_norm_check(trajectory, scenario, constants))
    report.add(estimates.energy_margin_study(scenario))
    shift = _aligned(scenario, scenario.horizon / 4.0)
    report.add(semigroup_check(scenario, trajectory, shift, shift))

    long_scenario = scenario.with_changes(horizon=_aligned(scenario, max(analysis.long_horizon, scenario.horizon)))
    logger.info("Long run to T=%g", long_scenario.horizon)
    report.add(estimates.dissipativity_check(GalerkinIntegrator(long_scenario).run(label='long'),
                                             long_scenario, constants))

    report.extend(pair_report(scenario, max(analysis.perturbations), base=trajectory,
                              deltas=analysis.perturbations).records)
    report.add(estimates.limiting_solution_study(scenario))
    report.add(estimates.integrator_convergence_study(scenario))
    logger.info("Verification of %s: %d/%d checks passed", scenario.name,
                len(report.records) - len(report.failed()), len(report.records))
    return report


def absorbing_ensemble(scenario: Scenario, norms=None, ns=None, ms=None) -> TrajectoryEnsemble:
    """Members over initial sizes x kernel indices x orders, identical otherwise."""
    analysis = scenario.analysis
    norms = norms or analysis.ensemble_norms
    ns = ns or range(1, analysis.n_max + 1)
    ms = ms or analysis.ensemble_modes
    ensemble = TrajectoryEnsemble(window=analysis.window)
    for norm in norms:
        for member in run_family(scenario, ns, ms, amplitude=norm):
            ensemble.add(member, norm)
    return ensemble


def attraction_ensemble(scenario: Scenario, members: int) -> TrajectoryEnsemble:
    """Random initial data of varying size, run to the long horizon."""
    analysis = scenario.analysis
    horizon = _aligned(scenario, max(analysis.long_horizon, scenario.horizon))
    ensemble = TrajectoryEnsemble(window=analysis.window)
    for i in range(members):
        norm = analysis.ensemble_norms[i % len(analysis.ensemble_norms)]
        member = scenario.with_changes(
            horizon=horizon,
            initial=replace(scenario.initial, u0='random', u0_amplitude=norm, seed=scenario.initial.seed + i))
        trajectory = GalerkinIntegrator(member).run(build_initial_state(member), label=f'attraction-{i}')
        ensemble.add(trajectory, norm)
    return ensemble


def attractor_report(scenario: Scenario, members: int = 4, config_text: str = '') -> VerificationReport:
    report = _report('attractor', scenario, config_text)
    report.add(absorbing_check(absorbing_ensemble(scenario), scenario))
    report.add(attraction_diagnostic(attraction_ensemble(scenario, members), scenario))
    return report
