"""
Nonlocal right-hand sides.

F(u_t)(x)   = int_Omega b(u(t - eta(u(t), u_t), y)) f(x - y) dy
F_n(u_t)(x) = int_{-r}^0 { int_Omega b(u(t + theta, y)) f(x - y) dy } xi^n(theta, u(t), u_t) dtheta

Both are projected onto the Galerkin basis. The kernel does not depend on x,
so the time average of b(u) is taken first and convolved once.
"""
import logging
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np

from delaygalerkin.services.delay_model import (DelayKernel, DelayLaw, EpsilonSequence, TabulatedKernel,
                                                eta_eval, kernel_at)
from delaygalerkin.services.history_buffer import HistorySegment
from delaygalerkin.services.spectral_core import Domain, SpectralBasis, SpectralField
from delaygalerkin.utils.errors import ScenarioError

logger = logging.getLogger(__name__)

NONLINEARITY_KINDS = ('nicholson', 'zero', 'table')
SPATIAL_KERNEL_KINDS = ('constant', 'gaussian')


@dataclass(frozen=True)
class Nonlinearity:
    """Bounded, locally Lipschitz birth function b."""
    kind: str = 'nicholson'
    p: float = 2.0
    nodes: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ScenarioError(
                f"unknown nonlinearity '{self.kind}' (expected one of {', '.join(NONLINEARITY_KINDS)})",
                invariant='nonlinearity')
        if self.kind == 'nicholson' and not self.p > 0:
            raise ScenarioError(f"nicholson rate p must be positive, got {self.p}", invariant='nonlinearity')
        if self.kind == 'table':
            if len(self.nodes) < 2 or len(self.nodes) != len(self.values):
                raise ScenarioError("table nonlinearity needs matching node and value lists (at least two)",
                                    invariant='nonlinearity')
            if np.any(np.diff(self.nodes) <= 0):
                raise ScenarioError("table nonlinearity nodes must be strictly increasing",
                                    invariant='nonlinearity')

    @property
    def bound(self) -> float:
        """C_b = sup |b|."""
        if self.kind == 'nicholson':
            return self.p / np.e
        if self.kind == 'table':
            return float(np.max(np.abs(self.values)))
        return 0.0

    @property
    def lipschitz(self) -> float:
        """Global Lipschitz constant of b (sup |b'| = p at w = 0 for nicholson)."""
        if self.kind == 'nicholson':
            return self.p
        if self.kind == 'table':
            slopes = np.diff(self.values) / np.diff(self.nodes)
            return float(np.max(np.abs(slopes)))
        return 0.0

    def __call__(self, w):
        return b_eval(self, w)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['nodes'] = list(self.nodes)
        data['values'] = list(self.values)
        return data


def b_eval(nl: Nonlinearity, w):
    """b(w); the nicholson branch clamps negative arguments to zero."""
    w = np.asarray(w, dtype=float)
    if nl.kind == 'nicholson':
        positive = np.maximum(w, 0.0)
        result = nl.p * positive * np.exp(-positive)
    elif nl.kind == 'table':
        # constant extension outside the table keeps b bounded
        result = np.interp(w, nl.nodes, nl.values)
    else:
        result = np.zeros_like(w)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class SpatialKernel:
    """Interaction kernel f on Omega - Omega."""
    kind: str = 'constant'
    f0: float = 1.0
    alpha: float = 0.05

    def __post_init__(self):
        if self.kind not in SPATIAL_KERNEL_KINDS:
            raise ScenarioError(
                f"unknown spatial kernel '{self.kind}' (expected one of {', '.join(SPATIAL_KERNEL_KINDS)})",
                invariant='spatial-kernel')
        if self.kind == 'gaussian' and not self.alpha > 0:
            raise ScenarioError(f"gaussian width alpha must be positive, got {self.alpha}",
                                invariant='spatial-kernel')

    @property
    def sup_bound(self) -> float:
        """M_f = sup |f|."""
        if self.kind == 'gaussian':
            return 1.0 / np.sqrt(4.0 * np.pi * self.alpha)
        return abs(self.f0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == 'gaussian':
            return np.exp(-s ** 2 / (4.0 * self.alpha)) / np.sqrt(4.0 * np.pi * self.alpha)
        return np.full_like(s, self.f0)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@lru_cache(maxsize=32)
def convolution_matrix(kernel: SpatialKernel, domain: Domain) -> np.ndarray:
    """Quadrature matrix K_ij = f(x_i - y_j) * h of the interior-node trapezoid rule."""
    nodes = domain.nodes
    matrix = kernel(nodes[:, None] - nodes[None, :]) * domain.spacing
    matrix.setflags(write=False)
    return matrix


def convolve_f(kernel: SpatialKernel, domain: Domain, w: np.ndarray) -> np.ndarray:
    """int_0^L w(y) f(x - y) dy at every grid node (direct O(N_x^2) quadrature)."""
    w = np.asarray(w, dtype=float)
    if kernel.kind == 'constant':
        return np.full(domain.grid_size, kernel.f0 * domain.integrate(w))
    return convolution_matrix(kernel, domain) @ w


@dataclass(frozen=True)
class RhsModel:
    """Everything F and F_n need besides the history itself."""
    basis: SpectralBasis
    nonlinearity: Nonlinearity
    spatial_kernel: SpatialKernel
    law: DelayLaw
    eps_sequence: EpsilonSequence
    kernel_shape: Optional[TabulatedKernel] = None

    @property
    def bound(self) -> float:
        """M_f |Omega|^{3/2} C_b C_{xi,1} of the uniform RHS estimate, with C_{xi,1} = 1."""
        length = self.basis.domain.length
        return self.spatial_kernel.sup_bound * length ** 1.5 * self.nonlinearity.bound


@dataclass
class RhsEvaluation:
    coefficients: np.ndarray
    eta: float
    kernel: Optional[DelayKernel] = None


def _current_state(history: HistorySegment, t: float) -> SpectralField:
    return history.eval(t)


def distributed_rhs(t: float, history: HistorySegment, model: RhsModel, n: int) -> RhsEvaluation:
    """<F_n(u_t), e_k> for k = 1..m."""
    a = _current_state(history, t)
    eta = eta_eval(model.law, a, history, t)
    kernel = kernel_at(n, eta, model.eps_sequence, model.kernel_shape)
    if model.nonlinearity.kind == 'zero':
        return RhsEvaluation(np.zeros(model.basis.order), eta, kernel)
    averaged = history.kernel_time_integral(t, kernel, model.nonlinearity, model.basis)
    forcing = convolve_f(model.spatial_kernel, model.basis.domain, averaged)
    return RhsEvaluation(model.basis.to_spectral_coefficients(forcing), eta, kernel)


def discrete_rhs(t: float, history: HistorySegment, model: RhsModel) -> RhsEvaluation:
    """<F(u_t), e_k>: point evaluation at t - eta(u(t), u_t)."""
    a = _current_state(history, t)
    eta = eta_eval(model.law, a, history, t)
    if model.nonlinearity.kind == 'zero':
        return RhsEvaluation(np.zeros(model.basis.order), eta)
    delayed = history.eval(t - eta)
    pointwise = model.nonlinearity(model.basis.to_physical(delayed))
    forcing = convolve_f(model.spatial_kernel, model.basis.domain, pointwise)
    return RhsEvaluation(model.basis.to_spectral_coefficients(forcing), eta)


def evaluate_rhs(t: float, history: HistorySegment, model: RhsModel, n: Optional[int]) -> RhsEvaluation:
    """Distributed kernel n, or the discrete delay when n is None."""
    if n is None:
        return discrete_rhs(t, history, model)
    return distributed_rhs(t, history, model, n)
