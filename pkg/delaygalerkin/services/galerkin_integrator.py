"""
Galerkin Integrator - exponential Euler with method-of-steps history.

Per mode k with mu_k = lambda_k + d:
    g_k(t + dt) = exp(-mu_k dt) g_k(t) + (1 - exp(-mu_k dt)) / mu_k * <F(u_t), e_k>
with F frozen at the start of the step (delay included).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from delaygalerkin.models.scenario import Scenario
from delaygalerkin.models.trajectory import Trajectory
from delaygalerkin.services.history_buffer import HistorySegment, steps_per_span
from delaygalerkin.services.rhs_nonlocal import RhsEvaluation, RhsModel, evaluate_rhs
from delaygalerkin.services.spectral_core import ALIASING_FACTOR, Domain, build_basis
from delaygalerkin.utils.errors import NonFiniteStateError
from delaygalerkin.utils.initial_data import InitialState, build_initial_state

logger = logging.getLogger(__name__)


def exponential_euler_step(coefficients: np.ndarray, forcing: np.ndarray, decay: np.ndarray,
                           dt: float) -> np.ndarray:
    """Exact for the linear part; forcing held constant over the step."""
    propagator = np.exp(-decay * dt)
    gain = -np.expm1(-decay * dt) / decay
    return propagator * coefficients + gain * forcing


@dataclass
class StartState:
    """Restart point: absolute step index and the history u_{t_k}."""
    step: int
    history: HistorySegment


class GalerkinIntegrator:
    """Integrates the order-m Galerkin system for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario.validate()
        self.basis = build_basis(scenario.domain, scenario.modes)
        self.model = RhsModel(basis=self.basis, nonlinearity=scenario.nonlinearity,
                              spatial_kernel=scenario.spatial_kernel, law=scenario.law,
                              eps_sequence=scenario.eps_sequence, kernel_shape=scenario.kernel_shape)
        self.decay = self.basis.eigenvalues + scenario.damping
        self._propagator = np.exp(-self.decay * scenario.dt)
        self._gain = -np.expm1(-self.decay * scenario.dt) / self.decay

    def step(self, coefficients: np.ndarray, forcing: np.ndarray) -> np.ndarray:
        return self._propagator * coefficients + self._gain * forcing

    def rhs(self, t: float, history: HistorySegment) -> RhsEvaluation:
        return evaluate_rhs(t, history, self.model, self.scenario.kernel_index)

    def initial_history(self, initial: Optional[InitialState] = None) -> HistorySegment:
        initial = initial or build_initial_state(self.scenario)
        return HistorySegment.from_initial_data(initial.u0, initial.phi, self.scenario.span, self.scenario.dt)

    def run(self, initial: Optional[InitialState] = None, start: Optional[StartState] = None,
            label: str = '') -> Trajectory:
        """Trajectory on [t_start, T]; aborts with NonFiniteStateError on overflow."""
        scenario = self.scenario
        dt = scenario.dt
        if start is None:
            history = self.initial_history(initial)
            start_step = 0
        else:
            history = start.history.copy()
            start_step = start.step
        steps = scenario.steps - start_step
        lag = steps_per_span(scenario.span, dt)
        prehistory = history.eval_many(dt * (start_step + np.arange(-lag, 0)))
        order = self.basis.order

        coefficients = np.empty((steps + 1, order))
        forcing = np.empty((steps + 1, order))
        eta = np.empty(steps + 1)
        g = history.coefficients[-1].copy()
        logger.info("Run %s: mode=%s m=%d n=%s dt=%.6g T=%.6g steps=%d", label or scenario.name,
                    scenario.mode, order, scenario.kernel_index, dt, scenario.horizon, steps)
        report_every = max(1, steps // 10)

        for j in range(steps + 1):
            t = dt * (start_step + j)
            evaluation = self.rhs(t, history)
            coefficients[j] = g
            forcing[j] = evaluation.coefficients
            eta[j] = evaluation.eta
            if j % report_every == 0:
                logger.debug("t=%.4f ||u||=%.6g eta=%.6g", t, float(np.linalg.norm(g)), evaluation.eta)
            if j == steps:
                break
            g = self.step(g, evaluation.coefficients)
            if not np.all(np.isfinite(g)):
                logger.error("Non-finite state at step %d of run %s", start_step + j + 1, label or scenario.name)
                raise NonFiniteStateError(start_step + j + 1, t + dt)
            history.append(dt * (start_step + j + 1), g)

        return Trajectory(dt=dt, span=scenario.span, damping=scenario.damping,
                          eigenvalues=np.array(self.basis.eigenvalues), coefficients=coefficients,
                          forcing=forcing, eta=eta, prehistory=prehistory, origin_step=start_step,
                          label=label or scenario.name,
                          meta={'mode': scenario.mode, 'n': scenario.kernel_index, 'modes': order})


def run(scenario: Scenario, initial: Optional[InitialState] = None, label: str = '') -> Trajectory:
    return GalerkinIntegrator(scenario).run(initial=initial, label=label)


def restart(scenario: Scenario, trajectory: Trajectory, k: int, label: str = '') -> Trajectory:
    """Continue from the phase point (u(t_k), u_{t_k}) of an earlier run."""
    start = StartState(step=trajectory.origin_step + k, history=trajectory.history_at(k))
    return GalerkinIntegrator(scenario).run(start=start, label=label)


def family_member(scenario: Scenario, n: Optional[int], modes: Optional[int] = None) -> Scenario:
    """Same physics and data with kernel index n (None: discrete delay) and order m."""
    modes = scenario.modes if modes is None else modes
    grid = max(scenario.domain.grid_size, ALIASING_FACTOR * modes)
    changes = {'modes': modes, 'domain': Domain(scenario.domain.length, grid)}
    if n is None:
        changes['mode'] = 'discrete'
    else:
        changes.update(mode='distributed', n=n)
    return scenario.with_changes(**changes)


def run_family(scenario: Scenario, ns: Iterable[Optional[int]], ms: Optional[Iterable[int]] = None,
               workers: Optional[int] = None, amplitude: Optional[float] = None) -> List[Trajectory]:
    """One trajectory per (n, m); members share initial data and grids."""
    members = [family_member(scenario, n, m) for m in (list(ms) if ms else [scenario.modes]) for n in ns]
    workers = scenario.workers if workers is None else workers

    def _run(member: Scenario) -> Trajectory:
        initial = build_initial_state(member, amplitude=amplitude)
        label = f"{member.mode}-n{member.kernel_index}-m{member.modes}"
        return GalerkinIntegrator(member).run(initial=initial, label=label)

    if workers > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run, members))
    return [_run(member) for member in members]
