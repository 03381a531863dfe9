"""
Delay Model - state-dependent delay laws and distributed-delay kernels.

A DelayLaw maps a phase point (a, phi) in H = L^2 x L^2(-r, 0; L^2) to a lag
eta in [0, eta_max]. Step kernels of width eps_n sit on [-eta - eps_n, -eta]
with height 1/eps_n, so each has unit mass whatever the state. A tabulated
profile on [-1, 0] may replace the step shape; it is rescaled into the same
window and normalised to unit mass.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import expit

from delaygalerkin.services.history_buffer import HistorySegment
from delaygalerkin.services.spectral_core import SpectralField
from delaygalerkin.utils.errors import KernelError

logger = logging.getLogger(__name__)

# Uniform subintervals per kernel support; independent of dt since eps_n may be << dt.
KERNEL_SUBINTERVALS = 8

DELAY_RULES = ('constant', 'sigmoid')


@dataclass(frozen=True)
class DelayLaw:
    """eta(a, phi): constant eta0, or eta_max * sigmoid(c0 + c1 ||a||^2 + c2 int ||phi||^2)."""
    rule: str = 'constant'
    eta0: float = 0.5
    eta_max: float = 0.75
    c0: float = 0.0
    c1: float = 1.0
    c2: float = 0.0

    def __post_init__(self):
        if self.rule not in DELAY_RULES:
            raise KernelError(f"unknown delay rule '{self.rule}' (expected one of {', '.join(DELAY_RULES)})")
        if self.rule == 'constant' and self.eta0 < 0:
            raise KernelError(f"constant delay must be non-negative, got {self.eta0}")
        if self.rule == 'sigmoid' and not self.eta_max > 0:
            raise KernelError(f"eta_max must be positive, got {self.eta_max}")

    @classmethod
    def constant(cls, eta0: float) -> 'DelayLaw':
        return cls(rule='constant', eta0=eta0, eta_max=eta0)

    @classmethod
    def sigmoid(cls, eta_max: float, c0: float = 0.0, c1: float = 1.0, c2: float = 0.0) -> 'DelayLaw':
        return cls(rule='sigmoid', eta_max=eta_max, c0=c0, c1=c1, c2=c2)

    @property
    def cap(self) -> float:
        """Largest value the law can take."""
        return self.eta0 if self.rule == 'constant' else self.eta_max

    def from_energies(self, state_norm_sq, segment_norm_sq):
        """Delay as a function of ||a||^2 and int ||phi||^2 (broadcasts)."""
        if self.rule == 'constant':
            return self.eta0 + 0.0 * np.asarray(state_norm_sq, dtype=float)
        z = self.c0 + self.c1 * np.asarray(state_norm_sq) + self.c2 * np.asarray(segment_norm_sq)
        return self.eta_max * expit(z)

    def lipschitz_bound(self, radius: float) -> float:
        """L_{eta,M} on the ball of radius M in H (sigmoid' <= 1/4)."""
        if self.rule == 'constant':
            return 0.0
        return 0.5 * self.eta_max * radius * float(np.hypot(self.c1, self.c2))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def eta_eval(law: DelayLaw, a: SpectralField, phi: HistorySegment, t: Optional[float] = None) -> float:
    """Delay at the phase point (a, phi), phi read on [t - r, t]."""
    if law.rule == 'constant':
        return float(law.eta0)
    state_sq = float(np.sum(a.coefficients ** 2))
    segment_sq = phi.segment_norm_sq(t) if law.c2 != 0.0 else 0.0
    return float(law.from_energies(state_sq, segment_sq))


@dataclass(frozen=True)
class EpsilonSequence:
    """eps_n = eps0 * ratio^(n-1), or an explicit positive decreasing list."""
    eps0: float = 0.125
    ratio: float = 0.5
    values: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.values is not None:
            values = tuple(float(v) for v in self.values)
            if not values or any(v <= 0 for v in values):
                raise KernelError("eps sequence must be positive")
            if any(b >= a for a, b in zip(values, values[1:])):
                raise KernelError("eps sequence must be strictly decreasing")
            object.__setattr__(self, 'values', values)
            object.__setattr__(self, 'eps0', values[0])
        elif not self.eps0 > 0:
            raise KernelError(f"eps0 must be positive, got {self.eps0}")
        elif not 0 < self.ratio < 1:
            raise KernelError(f"eps ratio must lie in (0, 1), got {self.ratio}")

    @classmethod
    def default(cls, span: float) -> 'EpsilonSequence':
        return cls(eps0=span / 8.0, ratio=0.5)

    @property
    def largest(self) -> float:
        return self.eps0

    def epsilon(self, n: int) -> float:
        if n < 1:
            raise KernelError(f"kernel index must be at least 1, got {n}")
        if self.values is not None:
            if n > len(self.values):
                raise KernelError(f"kernel index {n} beyond the {len(self.values)} configured widths")
            return self.values[n - 1]
        return self.eps0 * self.ratio ** (n - 1)

    def to_dict(self) -> Dict[str, Any]:
        return {'eps0': self.eps0, 'ratio': self.ratio,
                'values': list(self.values) if self.values is not None else None}


@dataclass(frozen=True)
class StepKernel:
    """xi^n(theta) = 1/eps on [-eta - eps, -eta], zero elsewhere."""
    eps: float
    eta: float
    index: int = 1

    @property
    def support(self) -> Tuple[float, float]:
        return (-self.eta - self.eps, -self.eta)

    @property
    def height(self) -> float:
        return 1.0 / self.eps

    @property
    def sup_norm(self) -> float:
        return self.height

    @property
    def mass(self) -> float:
        return self.height * self.eps

    @property
    def variation(self) -> float:
        return 2.0 * self.height

    def value(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lower, upper = self.support
        return np.where((theta >= lower) & (theta <= upper), self.height, 0.0)

    def quadrature(self, subintervals: int = KERNEL_SUBINTERVALS) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights (kernel height folded in) of the composite trapezoid rule."""
        lower, upper = self.support
        theta = np.linspace(lower, upper, subintervals + 1)
        weights = np.full(subintervals + 1, self.eps / subintervals)
        weights[[0, -1]] *= 0.5
        return theta, self.height * weights


@dataclass(frozen=True)
class TabulatedKernel:
    """General kernel given by samples; piecewise linear between nodes."""
    theta: Tuple[float, ...]
    values: Tuple[float, ...]
    index: int = 1

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.shape[0] < 2 or np.any(np.diff(theta) <= 0):
            raise KernelError("tabulated kernel nodes must be strictly increasing")
        if len(self.values) != theta.shape[0]:
            raise KernelError("tabulated kernel needs one value per node")
        if any(v < 0 for v in self.values):
            raise KernelError("kernels with sign changes are not supported")

    @property
    def support(self) -> Tuple[float, float]:
        return (float(self.theta[0]), float(self.theta[-1]))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def mass(self) -> float:
        return float(trapezoid(np.abs(self.values), self.theta))

    def value(self, theta) -> np.ndarray:
        return np.interp(theta, self.theta, self.values, left=0.0, right=0.0)

    def quadrature(self, subintervals: int = KERNEL_SUBINTERVALS) -> Tuple[np.ndarray, np.ndarray]:
        """Composite trapezoid rule with `subintervals` pieces between neighbouring nodes."""
        nodes = np.asarray(self.theta, dtype=float)
        fractions = np.linspace(0.0, 1.0, subintervals + 1)[:-1]
        theta = np.append((nodes[:-1, None] + np.diff(nodes)[:, None] * fractions).ravel(), nodes[-1])
        gaps = np.diff(theta)
        weights = np.zeros_like(theta)
        weights[:-1] += 0.5 * gaps
        weights[1:] += 0.5 * gaps
        return theta, weights * self.value(theta)

    @property
    def variation(self) -> float:
        """Total variation of the kernel extended by zero outside its nodes."""
        values = np.asarray(self.values, dtype=float)
        return float(abs(values[0]) + np.sum(np.abs(np.diff(values))) + abs(values[-1]))

    @classmethod
    def profile(cls, nodes: Sequence[float], values: Sequence[float]) -> 'TabulatedKernel':
        """Kernel shape on [-1, 0], rescaled to unit mass."""
        shape = cls(theta=tuple(float(x) for x in nodes), values=tuple(float(v) for v in values))
        lower, upper = shape.support
        if lower < -1.0 - 1e-12 or upper > 1e-12:
            raise KernelError(f"kernel profile nodes must lie in [-1, 0], got [{lower:.6g}, {upper:.6g}]")
        mass = shape.mass
        if not mass > 0:
            raise KernelError("kernel profile must have positive mass")
        return cls(theta=shape.theta, values=tuple(v / mass for v in shape.values))

    def placed(self, eps: float, eta: float, index: int = 1) -> 'TabulatedKernel':
        """theta -> profile((theta + eta) / eps) / eps, supported inside [-eta - eps, -eta]."""
        return TabulatedKernel(theta=tuple(float(-eta + eps * x) for x in self.theta),
                               values=tuple(float(v / eps) for v in self.values), index=index)

    def to_dict(self) -> Dict[str, Any]:
        return {'nodes': list(self.theta), 'values': list(self.values)}


DelayKernel = Union[StepKernel, TabulatedKernel]


def make_step_kernel(n: int, law: DelayLaw, a: SpectralField, phi: HistorySegment,
                     eps_sequence: EpsilonSequence, t: Optional[float] = None,
                     shape: Optional[TabulatedKernel] = None) -> DelayKernel:
    """Kernel xi^n(., a, phi) = xi~^n(., -eta(a, phi)); the step kernel unless a profile is given."""
    eps = eps_sequence.epsilon(n)
    if law.cap + eps > phi.span * (1 + 1e-12):
        raise KernelError(f"eta_max + eps_{n} = {law.cap + eps:.6g} exceeds r = {phi.span:.6g}")
    return kernel_at(n, eta_eval(law, a, phi, t), eps_sequence, shape)


def kernel_at(n: int, eta: float, eps_sequence: EpsilonSequence,
              shape: Optional[TabulatedKernel] = None) -> DelayKernel:
    if shape is None:
        return StepKernel(eps=eps_sequence.epsilon(n), eta=eta, index=n)
    return shape.placed(eps_sequence.epsilon(n), eta, n)


def _interval_overlap(first: Tuple[float, float], second: Tuple[float, float]) -> float:
    return max(0.0, min(first[1], second[1]) - max(first[0], second[0]))


def kernel_l1_diff(first, second) -> float:
    """int |xi(theta, s1) - xi(theta, s2)| dtheta; exact for step kernels."""
    if isinstance(first, StepKernel) and isinstance(second, StepKernel):
        overlap = _interval_overlap(first.support, second.support)
        only_first = first.eps - overlap
        only_second = second.eps - overlap
        return float(first.height * only_first + second.height * only_second
                     + abs(first.height - second.height) * overlap)
    lower = min(first.support[0], second.support[0])
    upper = max(first.support[1], second.support[1])
    theta = np.union1d(np.linspace(lower, upper, 4097),
                       np.concatenate([np.asarray(k.theta) for k in (first, second) if isinstance(k, TabulatedKernel)]
                                      or [np.empty(0)]))
    return float(trapezoid(np.abs(first.value(theta) - second.value(theta)), theta))


def phase_distance(a1: SpectralField, phi1: HistorySegment, a2: SpectralField, phi2: HistorySegment) -> float:
    """(||a1 - a2||^2 + int_{-r}^0 ||phi1 - phi2||^2)^{1/2}."""
    state_sq = float(np.sum((a1.coefficients - a2.coefficients) ** 2))
    return float(np.sqrt(state_sq + phi1.segment_distance_sq(phi2)))


def phase_norm(a: SpectralField, phi: HistorySegment) -> float:
    return float(np.sqrt(np.sum(a.coefficients ** 2) + phi.segment_norm_sq()))


def random_phase_point(order: int, span: float, dt: float, radius: float,
                       rng: np.random.Generator) -> Tuple[SpectralField, HistorySegment]:
    """Random (a, phi) with ||a||^2 + int ||phi||^2 <= radius^2."""
    count = int(round(span / dt))
    times = dt * np.arange(-count, 1)
    history = rng.standard_normal((count + 1, order))
    state = rng.standard_normal(order)
    phi = HistorySegment(span, times, history)
    scale = radius * rng.uniform(0.0, 1.0) / max(phase_norm(SpectralField(state), phi), 1e-300)
    return SpectralField(scale * state), HistorySegment(span, times, scale * history)


@dataclass
class KernelHypothesisRecord:
    n: int
    eps: float
    lipschitz_eta: float
    lipschitz_bound: float
    empirical_lipschitz: float
    max_mass_error: float
    max_sup_norm_error: float
    violations: int
    samples: int
    ratios: List[float] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.max_mass_error <= 1e-12 and self.max_sup_norm_error <= 1e-12

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('ratios')
        data['passed'] = self.passed
        return data


def verify_kernel_hypotheses(law: DelayLaw, eps_sequence: EpsilonSequence, indices: Sequence[int],
                             pairs: Sequence[Tuple[Tuple[SpectralField, HistorySegment],
                                                   Tuple[SpectralField, HistorySegment]]],
                             radius: float,
                             shape: Optional[TabulatedKernel] = None) -> List[KernelHypothesisRecord]:
    """
    Empirical check of the unit-mass, sup-bound and Lipschitz-in-state properties of the kernels.

    Every sampled pair must satisfy kernel_l1_diff <= TV(xi^n) L_{eta,M} dist_H,
    where TV(xi^n) = 2 / eps_n for step kernels; violations are counted,
    never raised.
    """
    lip_eta = law.lipschitz_bound(radius)
    records = []
    for n in indices:
        eps = eps_sequence.epsilon(n)
        reference = kernel_at(n, 0.0, eps_sequence, shape)
        bound = reference.variation * lip_eta
        violations = 0
        ratios = []
        mass_error = 0.0
        sup_error = 0.0
        for (a1, phi1), (a2, phi2) in pairs:
            k1 = make_step_kernel(n, law, a1, phi1, eps_sequence, shape=shape)
            k2 = make_step_kernel(n, law, a2, phi2, eps_sequence, shape=shape)
            diff = kernel_l1_diff(k1, k2)
            dist = phase_distance(a1, phi1, a2, phi2)
            theta, weights = k1.quadrature()
            mass_error = max(mass_error, abs(float(np.sum(weights)) - 1.0), abs(k2.mass - 1.0))
            sup_error = max(sup_error, abs(k1.sup_norm - reference.sup_norm),
                            abs(k2.sup_norm - reference.sup_norm))
            if dist > 0:
                ratios.append(diff / dist)
            if diff > bound * dist * (1 + 1e-9) + 1e-14:
                violations += 1
        record = KernelHypothesisRecord(
            n=n, eps=eps, lipschitz_eta=lip_eta, lipschitz_bound=bound,
            empirical_lipschitz=max(ratios) if ratios else 0.0,
            max_mass_error=mass_error, max_sup_norm_error=sup_error,
            violations=violations, samples=len(pairs), ratios=ratios)
        if record.passed:
            logger.info("Kernel hypotheses hold for n=%d (empirical L=%.4g <= %.4g)",
                        n, record.empirical_lipschitz, bound)
        else:
            logger.warning("Kernel hypotheses violated for n=%d: %d of %d pairs", n, violations, len(pairs))
        records.append(record)
    return records
