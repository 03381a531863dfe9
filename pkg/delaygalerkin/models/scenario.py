from dataclasses import dataclass, field, asdict, replace
from typing import Any, Dict, Optional, Tuple

from delaygalerkin.services.delay_model import DelayLaw, EpsilonSequence, TabulatedKernel
from delaygalerkin.services.history_buffer import TIME_TOLERANCE
from delaygalerkin.services.rhs_nonlocal import Nonlinearity, SpatialKernel
from delaygalerkin.services.spectral_core import ALIASING_FACTOR, Domain
from delaygalerkin.utils.errors import ScenarioError

RHS_MODES = ('discrete', 'distributed')
U0_KINDS = ('mode', 'random')
HISTORY_KINDS = ('constant', 'zero', 'ramp', 'random')


@dataclass(frozen=True)
class InitialData:
    u0: str = 'mode'
    u0_mode: int = 1
    u0_amplitude: float = 1.0
    history: str = 'constant'
    seed: int = 0


@dataclass(frozen=True)
class OutputOptions:
    directory: str = 'out'
    coefficients: bool = True
    plot_data: bool = False


@dataclass(frozen=True)
class AnalysisOptions:
    slack: float = 1e-3
    abs_floor: float = 1e-10
    long_horizon: float = 100.0
    perturbations: Tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5)
    n_max: int = 6
    ensemble_norms: Tuple[float, ...] = (0.1, 1.0, 10.0)
    ensemble_modes: Tuple[int, ...] = (8, 16, 32)
    transient: float = 0.25
    tolerance: float = 1e-3
    window: float = 1.0
    study_horizon: float = 2.0


@dataclass(frozen=True)
class Scenario:
    """Run configuration; every field maps to one key of the scenario document."""
    domain: Domain = field(default_factory=Domain)
    modes: int = 16
    damping: float = 1.0
    span: float = 1.0
    dt: float = 1.0 / 64
    horizon: float = 20.0
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    spatial_kernel: SpatialKernel = field(default_factory=SpatialKernel)
    law: DelayLaw = field(default_factory=lambda: DelayLaw.constant(0.5))
    mode: str = 'distributed'
    n: int = 1
    eps_sequence: EpsilonSequence = field(default_factory=lambda: EpsilonSequence.default(1.0))
    kernel_shape: Optional[TabulatedKernel] = None
    initial: InitialData = field(default_factory=InitialData)
    output: OutputOptions = field(default_factory=OutputOptions)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    workers: int = 1
    name: str = 'scenario'

    @property
    def kernel_index(self) -> Optional[int]:
        """Step-kernel index n, or None for the discrete delay."""
        return None if self.mode == 'discrete' else self.n

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def with_changes(self, **changes) -> 'Scenario':
        return replace(self, **changes)

    def validate(self) -> 'Scenario':
        """Raise ScenarioError naming the first violated invariant."""
        if not self.damping > 0:
            raise ScenarioError(f"damping d must be positive, got {self.damping}", invariant='damping')
        if self.modes < 1:
            raise ScenarioError(f"modes must be at least 1, got {self.modes}", invariant='modes')
        if self.domain.grid_size < ALIASING_FACTOR * self.modes:
            raise ScenarioError(
                f"grid_size {self.domain.grid_size} < {ALIASING_FACTOR}*modes = {ALIASING_FACTOR * self.modes}",
                invariant='anti-aliasing')
        if not self.span > 0:
            raise ScenarioError(f"delay span r must be positive, got {self.span}", invariant='span')
        if not self.dt > 0:
            raise ScenarioError(f"dt must be positive, got {self.dt}", invariant='time-step')
        ratio = self.span / self.dt
        if abs(ratio - round(ratio)) > TIME_TOLERANCE * max(1.0, ratio):
            raise ScenarioError(f"r/dt = {ratio:.12g} is not an integer", invariant='history-grid')
        if self.horizon < self.dt:
            raise ScenarioError(f"horizon T={self.horizon} is shorter than dt={self.dt}", invariant='horizon')
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > TIME_TOLERANCE * max(1.0, steps):
            raise ScenarioError(f"T/dt = {steps:.12g} is not an integer", invariant='horizon')
        if self.mode not in RHS_MODES:
            raise ScenarioError(f"rhs mode must be one of {', '.join(RHS_MODES)}, got '{self.mode}'",
                                invariant='rhs-mode')
        if self.n < 1:
            raise ScenarioError(f"kernel index n must be at least 1, got {self.n}", invariant='kernel-index')
        if self.law.cap >= self.span:
            raise ScenarioError(f"eta_max = {self.law.cap} must be below r = {self.span}", invariant='delay-range')
        if self.law.cap + self.eps_sequence.largest > self.span * (1 + 1e-12):
            raise ScenarioError(
                f"kernel-support invariant violated: eta_max + eps_1 = {self.law.cap:.6g} + "
                f"{self.eps_sequence.largest:.6g} > r = {self.span:.6g}", invariant='kernel-support')
        if self.initial.u0 not in U0_KINDS:
            raise ScenarioError(f"u0 must be one of {', '.join(U0_KINDS)}", invariant='initial-data')
        if self.initial.u0 == 'mode' and not 1 <= self.initial.u0_mode <= self.modes:
            raise ScenarioError(f"u0_mode {self.initial.u0_mode} outside 1..{self.modes}", invariant='initial-data')
        if self.initial.history not in HISTORY_KINDS:
            raise ScenarioError(f"history must be one of {', '.join(HISTORY_KINDS)}", invariant='initial-data')
        if self.workers < 1:
            raise ScenarioError(f"workers must be at least 1, got {self.workers}", invariant='workers')
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'domain': asdict(self.domain),
            'modes': self.modes,
            'damping': self.damping,
            'span': self.span,
            'dt': self.dt,
            'horizon': self.horizon,
            'nonlinearity': self.nonlinearity.to_dict(),
            'spatial_kernel': self.spatial_kernel.to_dict(),
            'law': self.law.to_dict(),
            'mode': self.mode,
            'n': self.n,
            'eps_sequence': self.eps_sequence.to_dict(),
            'kernel_shape': self.kernel_shape.to_dict() if self.kernel_shape is not None else None,
            'initial': asdict(self.initial),
            'output': asdict(self.output),
            'analysis': {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.analysis).items()},
            'workers': self.workers,
        }
