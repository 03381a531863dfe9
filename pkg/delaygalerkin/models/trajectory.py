from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from delaygalerkin.services.history_buffer import HistorySegment
from delaygalerkin.services.spectral_core import SpectralField


@dataclass
class Trajectory:
    """Galerkin solution on the uniform grid t_j = (origin_step + j) * dt."""
    dt: float
    span: float
    damping: float
    eigenvalues: np.ndarray
    coefficients: np.ndarray      # (J + 1, m)
    forcing: np.ndarray           # <F(u_{t_j}), e_k>, (J + 1, m)
    eta: np.ndarray               # eta(u(t_j), u_{t_j})
    prehistory: np.ndarray        # samples at t_0 - r, ..., t_0 - dt, (r/dt, m)
    origin_step: int = 0
    label: str = ''
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.coefficients.shape[1]

    @property
    def nodes(self) -> int:
        return self.coefficients.shape[0]

    @property
    def times(self) -> np.ndarray:
        """Times relative to the trajectory start."""
        return self.dt * np.arange(self.nodes)

    @property
    def absolute_times(self) -> np.ndarray:
        return self.dt * (self.origin_step + np.arange(self.nodes))

    @property
    def horizon(self) -> float:
        return self.dt * max(self.nodes - 1, 0)

    def _norm(self, values: np.ndarray, alpha: float) -> np.ndarray:
        return np.sqrt(np.sum(self.eigenvalues ** (2.0 * alpha) * values ** 2, axis=1))

    @property
    def norm_l2(self) -> np.ndarray:
        return self._norm(self.coefficients, 0.0)

    @property
    def norm_h1(self) -> np.ndarray:
        """||A^{1/2} u(t_j)||."""
        return self._norm(self.coefficients, 0.5)

    @property
    def f_norm(self) -> np.ndarray:
        return self._norm(self.forcing, 0.0)

    def velocity(self) -> np.ndarray:
        """u' = -A u - d u + F(u_t), reconstructed from the equation at each node."""
        return -(self.eigenvalues + self.damping) * self.coefficients + self.forcing

    def dual_velocity_norm(self) -> np.ndarray:
        """||A^{-1/2} u'(t_j)||."""
        return self._norm(self.velocity(), -0.5)

    def state_at(self, k: int) -> SpectralField:
        return SpectralField(self.coefficients[k])

    def history_at(self, k: int) -> HistorySegment:
        """u_{t_k} on [t_k - r, t_k] with absolute sample times."""
        lag = self.prehistory.shape[0]
        samples = np.vstack([self.prehistory, self.coefficients[:k + 1]])[-(lag + 1):]
        steps = self.origin_step + k + np.arange(-lag, 1)
        return HistorySegment(self.span, self.dt * steps, samples)

    def summary(self) -> Dict[str, Any]:
        norms = self.norm_l2
        return {
            'label': self.label,
            'nodes': self.nodes,
            'order': self.order,
            'dt': self.dt,
            'horizon': self.horizon,
            'terminal_norm': float(norms[-1]) if norms.size else None,
            'max_norm': float(norms.max()) if norms.size else None,
            **self.meta,
        }

    @classmethod
    def empty(cls, order: int, dt: float = 1.0, span: float = 1.0,
              eigenvalues: Optional[np.ndarray] = None) -> 'Trajectory':
        eig = np.ones(order) if eigenvalues is None else eigenvalues
        return cls(dt=dt, span=span, damping=1.0, eigenvalues=eig,
                   coefficients=np.empty((0, order)), forcing=np.empty((0, order)),
                   eta=np.empty(0), prehistory=np.empty((0, order)))
