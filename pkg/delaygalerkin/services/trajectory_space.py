"""
Trajectory space - the translation semigroup T(h) w = w(. + h) acting on
computed trajectories, the F_+^b norm, and absorbing/attraction diagnostics.

The attraction diagnostic measures windowed strong L^2 distances; strong
convergence implies the weak-star convergence used in the theory, so it is
a stricter surrogate, not the same topology.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from delaygalerkin.models.report import CheckRecord
from delaygalerkin.models.scenario import Scenario
from delaygalerkin.models.trajectory import Trajectory
from delaygalerkin.services.estimates import EstimateConstants, check_record
from delaygalerkin.services.galerkin_integrator import restart
from delaygalerkin.services.history_buffer import TIME_TOLERANCE, HistorySegment
from delaygalerkin.services.spectral_core import SpectralField

logger = logging.getLogger(__name__)

# Window length of the F_+^b norm.
UNIT_WINDOW = 1.0


def _aligned_steps(h: float, dt: float) -> int:
    steps = h / dt
    count = int(round(steps))
    if count < 0 or abs(steps - count) > TIME_TOLERANCE * max(1.0, steps):
        raise ValueError(f"shift h={h} is not a non-negative multiple of dt={dt}")
    return count


def _window_integrals(values: np.ndarray, dt: float, width: int) -> np.ndarray:
    """int over [t_k, t_k + window] for every window start k on the grid."""
    cumulative = cumulative_trapezoid(values, dx=dt, initial=0.0)
    return cumulative[width:] - cumulative[:-width]


@dataclass
class FbNorm:
    gradient: float     # sup_h int_h^{h+1} ||A^{1/2} u||^2
    sup_l2: float       # sup_t ||u(t)||
    dual: float         # sup_h int_h^{h+1} ||A^{-1/2} u'||^2

    @property
    def total(self) -> float:
        return self.gradient + self.sup_l2 + self.dual

    def to_dict(self) -> Dict[str, float]:
        return {'gradient': self.gradient, 'sup_l2': self.sup_l2, 'dual': self.dual, 'total': self.total}


def _window_width(trajectory: Trajectory, window: float) -> int:
    if trajectory.horizon < window * (1.0 - TIME_TOLERANCE):
        raise ValueError(f"trajectory horizon {trajectory.horizon:.6g} is shorter than the window {window}")
    return _aligned_steps(window, trajectory.dt)


def fb_norm(trajectory: Trajectory, window: float = UNIT_WINDOW) -> FbNorm:
    """Window integrals are sums of squares, without a square root."""
    width = _window_width(trajectory, window)
    gradient = _window_integrals(trajectory.norm_h1 ** 2, trajectory.dt, width)
    dual = _window_integrals(trajectory.dual_velocity_norm() ** 2, trajectory.dt, width)
    return FbNorm(gradient=float(gradient.max()), sup_l2=float(trajectory.norm_l2.max()), dual=float(dual.max()))


def fb_norm_profile(trajectory: Trajectory, window: float = UNIT_WINDOW) -> Tuple[np.ndarray, np.ndarray]:
    """||T(h) w||_{F_+^b} for every grid shift h that leaves a full window."""
    width = _window_width(trajectory, window)
    dt = trajectory.dt

    def _suffix_max(values):
        return np.maximum.accumulate(values[::-1])[::-1]

    gradient = _suffix_max(_window_integrals(trajectory.norm_h1 ** 2, dt, width))
    dual = _suffix_max(_window_integrals(trajectory.dual_velocity_norm() ** 2, dt, width))
    sup_l2 = _suffix_max(trajectory.norm_l2)[:gradient.shape[0]]
    shifts = dt * np.arange(gradient.shape[0])
    return shifts, gradient + sup_l2 + dual


def translate(trajectory: Trajectory, h: float) -> Trajectory:
    """T(h) w: the trajectory restricted to [h, T], re-based at time 0."""
    k = _aligned_steps(h, trajectory.dt)
    if k > trajectory.nodes - 1:
        raise ValueError(f"shift h={h} exceeds the horizon {trajectory.horizon:.6g}")
    lag = trajectory.prehistory.shape[0]
    full = np.vstack([trajectory.prehistory, trajectory.coefficients])
    return Trajectory(
        dt=trajectory.dt, span=trajectory.span, damping=trajectory.damping,
        eigenvalues=trajectory.eigenvalues, coefficients=trajectory.coefficients[k:],
        forcing=trajectory.forcing[k:], eta=trajectory.eta[k:], prehistory=full[k:k + lag],
        origin_step=trajectory.origin_step + k, label=trajectory.label, meta=dict(trajectory.meta))


def semigroup_state(trajectory: Trajectory, h: float) -> Tuple[SpectralField, HistorySegment]:
    """Phase point S_h(u0; phi) = (u(h); u_h)."""
    k = _aligned_steps(h, trajectory.dt)
    return trajectory.state_at(k), trajectory.history_at(k)


def semigroup_check(scenario: Scenario, trajectory: Trajectory, h1: float, h2: float) -> CheckRecord:
    """T(h1) T(h2) = T(h1 + h2), T(0) = id exactly; restart from (u(h), u_h) matches T(h) within 1e-10."""
    composed = translate(translate(trajectory, h1), h2)
    direct = translate(trajectory, h1 + h2)
    identity = translate(trajectory, 0.0)
    exact = (np.array_equal(composed.coefficients, direct.coefficients)
             and np.array_equal(composed.prehistory, direct.prehistory)
             and np.array_equal(identity.coefficients, trajectory.coefficients))
    k = _aligned_steps(h1, trajectory.dt)
    restarted = restart(scenario, trajectory, k, label='restart')
    shifted = translate(trajectory, h1)
    deviation = float(np.max(np.abs(restarted.coefficients - shifted.coefficients)))
    return check_record(
        'translation_semigroup', 'T(h1 + h2) = T(h1) T(h2); T(h) w = restart from (u(h), u_h)',
        exact and deviation <= 1e-10, 1e-10 - deviation,
        {'h1': h1, 'h2': h2},
        {'semigroup_exact': exact, 'restart_deviation': deviation})


@dataclass
class TrajectoryEnsemble:
    """Trajectories sharing physics, grid and horizon; initial data, n and m vary."""
    members: List[Trajectory] = field(default_factory=list)
    initial_norms: List[float] = field(default_factory=list)
    window: float = UNIT_WINDOW

    def add(self, trajectory: Trajectory, initial_norm: float) -> None:
        if self.members:
            first = self.members[0]
            if abs(trajectory.dt - first.dt) > TIME_TOLERANCE * first.dt or trajectory.nodes != first.nodes:
                raise ValueError("ensemble members must share the time grid and horizon")
        self.members.append(trajectory)
        self.initial_norms.append(float(initial_norm))

    @property
    def dt(self) -> float:
        return self.members[0].dt

    @property
    def horizon(self) -> float:
        return self.members[0].horizon

    def __len__(self) -> int:
        return len(self.members)


def _window_envelopes(trajectory: Trajectory, constants: EstimateConstants, window: float):
    """Windowed gradient/dual integrals for h >= 1 and their decaying bounds."""
    c = constants
    width = _window_width(trajectory, window)
    dt = trajectory.dt
    gradient = _window_integrals(trajectory.norm_h1 ** 2, dt, width)
    dual = _window_integrals(trajectory.dual_velocity_norm() ** 2, dt, width)
    h = dt * np.arange(gradient.shape[0])
    late = h >= 1.0 - TIME_TOLERANCE
    u0_sq = float(trajectory.norm_l2[0] ** 2)
    start_energy = float(c.energy_envelope(u0_sq, 1.0))
    gradient_bound = np.exp(-c.gamma1 * (h - 1.0)) * (c.damping + 1.5) * start_energy + c.d1 / c.gamma1
    dual_bound = np.exp(-c.gamma2 * (h - 1.0)) * c.d2 * (u0_sq + 1.0) + c.d3
    return gradient[late], gradient_bound[late], dual[late], dual_bound[late]


def absorbing_check(ensemble: TrajectoryEnsemble, scenario: Scenario,
                    constants: Optional[EstimateConstants] = None) -> CheckRecord:
    """
    Absorbing ball B_{R1} in the F_+^b norm, R1 = d1/gamma1 + R + d3.

    Each member's tail norm ||T(T/2) w|| gives an empirical radius R_i, which
    must lie inside B_{R1}. Members sharing an initial norm (differing n, m)
    must agree on R_i within 10%, every member must enter B_{R1}, entry times
    must grow with ||u0||, and the windowed quantities must respect the
    decaying bounds and their limits.
    """
    c = constants or EstimateConstants.from_scenario(scenario)
    slack, floor = scenario.analysis.slack, scenario.analysis.abs_floor
    window = ensemble.window
    tail_shift = ensemble.dt * int(round(0.5 * ensemble.horizon / ensemble.dt))

    tail_radii = np.array([fb_norm(translate(member, tail_shift), window).total for member in ensemble.members])
    tail_max = float(tail_radii.max())
    r1 = float(c.r1_analytic)

    entry_times = []
    bound_margin = float('inf')
    for member in ensemble.members:
        shifts, profile = fb_norm_profile(member, window)
        inside = np.nonzero(profile <= r1)[0]
        entry_times.append(float(shifts[inside[0]]) if inside.size else float('inf'))
        gradient, gradient_bound, dual, dual_bound = _window_envelopes(member, c, window)
        tail = slice(gradient.shape[0] // 2, None)
        limits = [(gradient[tail], c.d1 / c.gamma1), (dual[tail], c.d3)]
        for values, bound in [(gradient, gradient_bound), (dual, dual_bound)] + limits:
            if np.size(values):
                allowed = bound * (1.0 + slack) + floor
                bound_margin = min(bound_margin, float(np.min((allowed - values) / np.maximum(bound, floor))))
        u_sq_tail = member.norm_l2[member.times >= 0.5 * member.horizon] ** 2
        if u_sq_tail.size:
            bound_margin = min(bound_margin, float(c.radius_sq * (1.0 + slack) + 1e-3 - u_sq_tail.max()))

    norms = np.array(ensemble.initial_norms)
    spreads = {}
    for norm in sorted(set(ensemble.initial_norms)):
        group = tail_radii[norms == norm]
        spreads[f'{norm:g}'] = float((group.max() - group.min()) / group.max()) if group.max() > 0 else 0.0
    worst_spread = max(spreads.values(), default=0.0)

    all_enter = all(np.isfinite(entry_times))
    ordered = True
    for key in {(m.meta.get('n'), m.meta.get('modes')) for m in ensemble.members}:
        rows = sorted((norm, entry) for member, norm, entry in zip(ensemble.members, norms, entry_times)
                      if (member.meta.get('n'), member.meta.get('modes')) == key)
        ordered = ordered and all(b[1] >= a[1] - TIME_TOLERANCE for a, b in zip(rows, rows[1:]))

    inside_ball = tail_max <= r1
    passed = worst_spread <= 0.1 and inside_ball and all_enter and ordered and bound_margin >= 0
    return check_record(
        'absorbing_ball', '||T(h) w||_{F_+^b} <= R1 for h >= h(||u(0)||), R1 independent of n and m',
        passed, min(0.1 - worst_spread, (r1 - tail_max) / r1, bound_margin),
        {'R1': r1, 'R1_empirical': tail_max, 'gamma1': c.gamma1, 'd1': c.d1, 'gamma2': c.gamma2,
         'd2': c.d2, 'd3': c.d3, 'R_sq': c.radius_sq},
        {'tail_radii': tail_radii, 'tail_radius_max': tail_max, 'spread_by_norm': spreads,
         'entry_times': entry_times, 'entry_ordered': ordered, 'bound_margin': bound_margin,
         'labels': [m.label for m in ensemble.members]},
        {'member': np.arange(len(ensemble)), 'initial_norm': norms, 'tail_radius': tail_radii,
         'entry_time': np.array(entry_times)})


def candidate_segments(ensemble: TrajectoryEnsemble, start: float, stop: float, stride: int = 8) -> np.ndarray:
    """Unit-window coefficient segments of every member starting in [start, stop]."""
    dt = ensemble.dt
    width = _aligned_steps(ensemble.window, dt)
    last = ensemble.members[0].nodes - 1 - width
    first_step = max(0, int(round(start / dt)))
    last_step = min(last, int(round(stop / dt)))
    steps = np.union1d(np.arange(first_step, last_step + 1, stride), [last_step])
    return np.stack([member.coefficients[k:k + width + 1] for member in ensemble.members for k in steps])


def segment_distances(segment: np.ndarray, candidates: np.ndarray, dt: float) -> np.ndarray:
    """(int_window ||w - c||^2)^{1/2} for every candidate c."""
    diff_sq = np.sum((candidates - segment[None, :, :]) ** 2, axis=2)
    return np.sqrt(trapezoid(diff_sq, dx=dt, axis=1))


def attraction_diagnostic(ensemble: TrajectoryEnsemble, scenario: Scenario,
                          candidate_window: Sequence[float] = (10.0, 1.0), stride: int = 8) -> CheckRecord:
    """
    dist(T(h) w, P) for the late-time candidate set P, sampled once per time unit.

    P holds the unit-window segments starting in [T - 10, T - 1]. Each member
    is measured against the segments of the other members only, so a member
    never matches its own late segments. After the transient the distance
    must not grow beyond the tolerance and must end below the scenario
    tolerance.
    """
    if len(ensemble) < 2:
        raise ValueError("the attraction diagnostic needs at least two ensemble members")
    options = scenario.analysis
    dt = ensemble.dt
    horizon = ensemble.horizon
    width = _aligned_steps(ensemble.window, dt)
    back, front = candidate_window
    candidates = candidate_segments(ensemble, horizon - back, horizon - front, stride)
    owners = np.repeat(np.arange(len(ensemble)), candidates.shape[0] // len(ensemble))

    shifts = np.arange(0.0, np.floor(horizon - ensemble.window + TIME_TOLERANCE) + 1.0)
    distances = np.zeros(shifts.shape[0])
    for i, h in enumerate(shifts):
        k = int(round(h / dt))
        distances[i] = max(
            float(segment_distances(member.coefficients[k:k + width + 1], candidates[owners != j], dt).min())
            for j, member in enumerate(ensemble.members))

    after = shifts >= options.transient * horizon
    late = distances[after]
    allowance = np.maximum(options.tolerance, 1e-3 * late[:-1])
    growth = late[1:] - late[:-1] - allowance
    monotone = bool(np.all(growth <= 0)) if late.size > 1 else True
    final = float(distances[-1])
    passed = monotone and final <= options.tolerance
    margin = min(options.tolerance - final, -float(growth.max()) if growth.size else options.tolerance)
    return check_record(
        'attraction', 'windowed L2 distance of T(h) w to the late-time segment set -> 0 (strong surrogate)',
        passed, margin,
        {'tolerance': options.tolerance, 'transient': options.transient * horizon},
        {'surrogate': 'windowed strong L2 distance; stricter than the weak-star topology',
         'members': len(ensemble), 'candidates': int(candidates.shape[0]), 'final_distance': final,
         'monotone_after_transient': monotone},
        {'h': shifts, 'distance': distances})
