"""
Spectral core - Dirichlet-Laplacian eigenbasis on an interval.

The basis e_k(x) = sqrt(2/L) sin(k pi x / L) diagonalises A = -d^2/dx^2 with
A e_k = (k pi / L)^2 e_k. Grid values live on the N_x interior nodes
x_i = i L / (N_x + 1); the boundary values are zero.
"""
import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.fft import dst
from scipy.integrate import trapezoid

from delaygalerkin.utils.errors import BasisError

logger = logging.getLogger(__name__)

# Anti-aliasing: products b(u) e_k need four grid nodes per mode.
ALIASING_FACTOR = 4


@dataclass(frozen=True)
class Domain:
    """Omega = (0, length) sampled on grid_size interior nodes."""
    length: float = float(np.pi)
    grid_size: int = 64

    def __post_init__(self):
        if not self.length > 0:
            raise BasisError(f"domain length must be positive, got {self.length}")
        if self.grid_size < 1:
            raise BasisError(f"grid_size must be positive, got {self.grid_size}")

    @property
    def spacing(self) -> float:
        return self.length / (self.grid_size + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.grid_size + 1)

    def integrate(self, values: np.ndarray) -> Union[float, np.ndarray]:
        """Composite trapezoid over (0, L) along the last axis, zero at both ends."""
        values = np.asarray(values, dtype=float)
        pad = [(0, 0)] * (values.ndim - 1) + [(1, 1)]
        return trapezoid(np.pad(values, pad), dx=self.spacing, axis=-1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """u(x) = sum_k g_k e_k(x); coefficients are stored, never grid values."""
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float).reshape(-1)
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coefficients', coeffs)

    @property
    def order(self) -> int:
        return self.coefficients.shape[0]

    @classmethod
    def zeros(cls, order: int) -> 'SpectralField':
        return cls(np.zeros(order))

    @classmethod
    def mode(cls, order: int, k: int, amplitude: float = 1.0) -> 'SpectralField':
        """amplitude * e_k."""
        if not 1 <= k <= order:
            raise BasisError(f"mode {k} outside 1..{order}")
        coeffs = np.zeros(order)
        coeffs[k - 1] = amplitude
        return cls(coeffs)

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.coefficients + other.coefficients)

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.coefficients - other.coefficients)

    def __mul__(self, scale: float) -> 'SpectralField':
        return SpectralField(scale * self.coefficients)

    __rmul__ = __mul__

    def allclose(self, other: 'SpectralField', atol: float = 1e-12) -> bool:
        return self.order == other.order and np.allclose(self.coefficients, other.coefficients, rtol=0.0, atol=atol)


def _coefficients(field_or_array) -> np.ndarray:
    if isinstance(field_or_array, SpectralField):
        return field_or_array.coefficients
    return np.asarray(field_or_array, dtype=float)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First `order` Dirichlet eigenpairs on `domain`, with mode tables on the grid."""
    domain: Domain
    order: int
    eigenvalues: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)

    @property
    def lambda_1(self) -> float:
        return float(self.eigenvalues[0])

    def _check_order(self, coeffs: np.ndarray) -> None:
        if coeffs.shape[-1] != self.order:
            raise BasisError(f"field of order {coeffs.shape[-1]} does not match basis order {self.order}")

    def apply_power(self, field_: SpectralField, alpha: float) -> SpectralField:
        """A^alpha, diagonal in spectral space."""
        self._check_order(field_.coefficients)
        return SpectralField(self.eigenvalues ** alpha * field_.coefficients)

    def norm(self, field_or_array, alpha: float = 0.0):
        """(sum_k lambda_k^{2 alpha} g_k^2)^{1/2}; vectorised over leading axes."""
        coeffs = _coefficients(field_or_array)
        self._check_order(coeffs)
        weights = self.eigenvalues ** (2.0 * alpha)
        result = np.sqrt(np.sum(weights * coeffs ** 2, axis=-1))
        return float(result) if np.ndim(result) == 0 else result

    def to_physical(self, field_or_array) -> np.ndarray:
        """Grid values u(x_i); a (..., m) array maps to (..., N_x)."""
        coeffs = _coefficients(field_or_array)
        self._check_order(coeffs)
        n_x = self.domain.grid_size
        pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, n_x - self.order)]
        scale = 0.5 * np.sqrt(2.0 / self.domain.length)
        return scale * dst(np.pad(coeffs, pad), type=1, axis=-1)

    def to_spectral_coefficients(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.domain.grid_size:
            raise BasisError(f"expected {self.domain.grid_size} grid values, got {values.shape[-1]}")
        scale = 0.5 * self.domain.spacing * np.sqrt(2.0 / self.domain.length)
        return scale * dst(values, type=1, axis=-1)[..., :self.order]

    def to_spectral(self, values: np.ndarray) -> SpectralField:
        """Quadrature projection g_k = <u, e_k> on the interior grid."""
        return SpectralField(self.to_spectral_coefficients(np.asarray(values, dtype=float).reshape(-1)))


def build_basis(domain: Domain, m: int) -> SpectralBasis:
    """Eigenvalues lambda_k = (k pi / L)^2 and mode tables for k = 1..m."""
    if m < 1:
        raise BasisError(f"basis order must be at least 1, got {m}")
    if domain.grid_size < ALIASING_FACTOR * m:
        raise BasisError(
            f"grid_size {domain.grid_size} < {ALIASING_FACTOR}*m = {ALIASING_FACTOR * m} (aliasing risk)")
    k = np.arange(1, m + 1, dtype=float)
    eigenvalues = (k * np.pi / domain.length) ** 2
    modes = np.sqrt(2.0 / domain.length) * np.sin(np.outer(k, domain.nodes) * np.pi / domain.length)
    eigenvalues.setflags(write=False)
    modes.setflags(write=False)
    logger.debug("Built basis: L=%s, N_x=%d, m=%d", domain.length, domain.grid_size, m)
    return SpectralBasis(domain=domain, order=m, eigenvalues=eigenvalues, modes=modes)
