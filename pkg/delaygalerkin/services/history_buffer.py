"""
History Buffer - dense record of the solution segment u_t on [t - r, t].

Samples are stored as coefficient rows; evaluation between samples is
piecewise linear per coefficient and never extrapolates.
"""
import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from delaygalerkin.services.spectral_core import SpectralBasis, SpectralField
from delaygalerkin.utils.errors import HistoryRangeError, KernelError

logger = logging.getLogger(__name__)

# Relative tolerance used when comparing times computed as j * dt.
TIME_TOLERANCE = 1e-9

HistorySampler = Callable[[float], Union[SpectralField, np.ndarray]]


def steps_per_span(span: float, dt: float) -> int:
    """r / dt as an integer; rejects non-integral ratios."""
    if dt <= 0:
        raise HistoryRangeError(f"time step must be positive, got {dt}")
    ratio = span / dt
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > TIME_TOLERANCE * max(1.0, ratio):
        raise HistoryRangeError(f"delay span r={span} is not an integral multiple of dt={dt}")
    return count


class HistorySegment:
    """Time-stamped coefficient samples covering at least [t_now - r, t_now]."""

    def __init__(self, span: float, times: Sequence[float], coefficients: np.ndarray, margin: float = 0.0):
        times = np.asarray(times, dtype=float)
        coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
        if times.ndim != 1 or times.shape[0] != coefficients.shape[0]:
            raise HistoryRangeError("times and coefficient rows must have the same length")
        if times.shape[0] < 2:
            raise HistoryRangeError("a history segment needs at least two samples")
        if np.any(np.diff(times) <= 0):
            raise HistoryRangeError("sample times must be strictly increasing")
        self.span = float(span)
        self.margin = float(margin)
        self.order = coefficients.shape[1]
        capacity = max(16, 2 * times.shape[0])
        self._times = np.empty(capacity)
        self._values = np.empty((capacity, self.order))
        self._start = 0
        self._end = times.shape[0]
        self._times[:self._end] = times
        self._values[:self._end] = coefficients

    @classmethod
    def from_initial_data(cls, u0: SpectralField, phi: HistorySampler, span: float, dt: float,
                          margin: float = 0.0) -> 'HistorySegment':
        """Samples at -r, -r + dt, ..., -dt from phi and u0 at 0."""
        count = steps_per_span(span, dt)
        times = dt * np.arange(-count, 1)
        rows = [np.asarray(_coefficients(phi(float(t))), dtype=float) for t in times[:-1]]
        rows.append(u0.coefficients)
        return cls(span, times, np.vstack(rows), margin=margin)

    @property
    def times(self) -> np.ndarray:
        return self._times[self._start:self._end]

    @property
    def coefficients(self) -> np.ndarray:
        return self._values[self._start:self._end]

    @property
    def t_now(self) -> float:
        return float(self._times[self._end - 1])

    @property
    def t_first(self) -> float:
        return float(self._times[self._start])

    def __len__(self) -> int:
        return self._end - self._start

    def copy(self) -> 'HistorySegment':
        return HistorySegment(self.span, self.times.copy(), self.coefficients.copy(), margin=self.margin)

    def append(self, t: float, field: Union[SpectralField, np.ndarray]) -> None:
        """Add a sample after the last one and prune samples older than t - r - margin."""
        if t <= self.t_now:
            raise HistoryRangeError(f"append time {t} must exceed last sample time {self.t_now}")
        coeffs = _coefficients(field)
        if self._end == self._times.shape[0]:
            self._compact()
        self._times[self._end] = t
        self._values[self._end] = coeffs
        self._end += 1
        self._prune(t)

    def _compact(self) -> None:
        live = self._end - self._start
        if live * 2 > self._times.shape[0]:
            times = np.empty(2 * self._times.shape[0])
            values = np.empty((times.shape[0], self.order))
        else:
            times, values = self._times, self._values
        times[:live] = self._times[self._start:self._end]
        values[:live] = self._values[self._start:self._end]
        self._times, self._values = times, values
        self._start, self._end = 0, live

    def _prune(self, t: float) -> None:
        # the oldest kept sample sits at or just before t - r - margin
        cutoff = t - self.span - self.margin
        cutoff += TIME_TOLERANCE * max(1.0, abs(cutoff))
        while self._end - self._start > 2 and self._times[self._start + 1] <= cutoff:
            self._start += 1

    def eval_many(self, query_times: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation, one coefficient row per query time."""
        query = np.atleast_1d(np.asarray(query_times, dtype=float))
        times = self.times
        if query.size and (query.min() < times[0] - TIME_TOLERANCE * max(1.0, abs(times[0]))
                           or query.max() > times[-1] + TIME_TOLERANCE * max(1.0, abs(times[-1]))):
            raise HistoryRangeError(
                f"evaluation at [{query.min():.6g}, {query.max():.6g}] outside covered span "
                f"[{times[0]:.6g}, {times[-1]:.6g}]")
        index = np.clip(np.searchsorted(times, query, side='right') - 1, 0, times.shape[0] - 2)
        left, right = times[index], times[index + 1]
        weight = np.clip((query - left) / (right - left), 0.0, 1.0)[:, None]
        values = self.coefficients
        return (1.0 - weight) * values[index] + weight * values[index + 1]

    def eval(self, t: float) -> SpectralField:
        return SpectralField(self.eval_many(np.array([t]))[0])

    def _segment_grid(self, t: float) -> np.ndarray:
        times = self.times
        start = t - self.span
        tol = TIME_TOLERANCE * max(1.0, abs(t))
        inner = times[(times > start + tol) & (times < t - tol)]
        return np.concatenate(([start], inner, [t]))

    def segment_norm_sq(self, t: Optional[float] = None) -> float:
        """Trapezoid approximation of int_{-r}^0 ||u(t+s)||^2 ds on the sample grid."""
        t = self.t_now if t is None else t
        grid = self._segment_grid(t)
        rows = self.eval_many(grid)
        return float(trapezoid(np.sum(rows ** 2, axis=1), grid))

    def segment_distance_sq(self, other: 'HistorySegment', t: Optional[float] = None,
                            t_other: Optional[float] = None) -> float:
        """int_{-r}^0 ||u(t+s) - v(t'+s)||^2 ds on this segment's sample grid."""
        t = self.t_now if t is None else t
        t_other = other.t_now if t_other is None else t_other
        grid = self._segment_grid(t)
        diff = self.eval_many(grid) - other.eval_many(grid - t + t_other)
        return float(trapezoid(np.sum(diff ** 2, axis=1), grid))

    def kernel_time_integral(self, t: float, kernel, pointwise_map: Callable[[np.ndarray], np.ndarray],
                             basis: SpectralBasis) -> np.ndarray:
        """
        w(y) = int xi(theta) * map(u(t + theta, y)) dtheta on the physical grid.

        The kernel supplies quadrature nodes theta_j and weights (density
        already folded in); history is interpolated at t + theta_j.
        """
        lower, upper = kernel.support
        tol = TIME_TOLERANCE * max(1.0, self.span)
        if lower < -self.span - tol or upper > tol:
            raise KernelError(f"kernel support [{lower:.6g}, {upper:.6g}] escapes [-{self.span:.6g}, 0]")
        theta, weights = kernel.quadrature()
        rows = self.eval_many(t + theta)
        mapped = pointwise_map(basis.to_physical(rows))
        return weights @ mapped


def _coefficients(field) -> np.ndarray:
    if isinstance(field, SpectralField):
        return field.coefficients
    return np.asarray(field, dtype=float).reshape(-1)
