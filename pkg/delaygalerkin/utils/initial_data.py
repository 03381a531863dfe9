"""
Initial data (u0, phi) built from the [initial] section of a scenario.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from delaygalerkin.services.spectral_core import SpectralField


@dataclass(frozen=True)
class InitialState:
    u0: SpectralField
    phi: Callable[[float], SpectralField]

    def perturbed(self, du0: SpectralField = None,
                  dphi: Callable[[float], SpectralField] = None) -> 'InitialState':
        u0 = self.u0 if du0 is None else self.u0 + du0
        if dphi is None:
            return InitialState(u0, self.phi)
        base = self.phi
        return InitialState(u0, lambda theta: base(theta) + dphi(theta))


def smooth_random_field(order: int, norm: float, rng: np.random.Generator) -> SpectralField:
    """Random coefficients decaying like 1/k^2, rescaled to the requested L^2 norm."""
    k = np.arange(1, order + 1, dtype=float)
    coeffs = rng.standard_normal(order) / k ** 2
    size = np.linalg.norm(coeffs)
    return SpectralField(norm * coeffs / size if size > 0 else coeffs)


def build_initial_state(scenario, order: int = None, amplitude: float = None) -> InitialState:
    """u0 and phi for the scenario; order/amplitude override the configured ones."""
    initial = scenario.initial
    order = scenario.modes if order is None else order
    amplitude = initial.u0_amplitude if amplitude is None else amplitude
    rng = np.random.default_rng(initial.seed)
    if initial.u0 == 'random':
        u0 = smooth_random_field(order, abs(amplitude), rng)
    else:
        u0 = SpectralField.mode(order, initial.u0_mode, amplitude)
    span = scenario.span
    if initial.history == 'zero':
        zero = SpectralField.zeros(order)
        phi = lambda theta: zero
    elif initial.history == 'ramp':
        phi = lambda theta: (1.0 + theta / span) * u0
    elif initial.history == 'random':
        wiggle = smooth_random_field(order, 0.5 * abs(amplitude), rng)
        phi = lambda theta: u0 + np.sin(np.pi * theta / span) * wiggle
    else:
        phi = lambda theta: u0
    return InitialState(u0, phi)
