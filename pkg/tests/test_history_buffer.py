import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from delaygalerkin.services.delay_model import StepKernel
from delaygalerkin.services.history_buffer import HistorySegment, steps_per_span
from delaygalerkin.services.spectral_core import Domain, SpectralField, build_basis
from delaygalerkin.utils.errors import HistoryRangeError, KernelError

DT = 1.0 / 16
SLOPE = np.array([1.0, -2.0, 0.5])
OFFSET = np.array([0.25, 1.0, -1.0])


def linear_history(span=1.0, dt=DT):
    """Samples of u(t) = OFFSET + t * SLOPE on [-span, 0]."""
    u0 = SpectralField(OFFSET)
    return HistorySegment.from_initial_data(u0, lambda t: OFFSET + t * SLOPE, span, dt)


def test_steps_per_span():
    assert steps_per_span(1.0, 1.0 / 64) == 64
    assert steps_per_span(0.3, 0.1) == 3
    with pytest.raises(HistoryRangeError):
        steps_per_span(1.0, 0.3)
    with pytest.raises(HistoryRangeError):
        steps_per_span(1.0, 0.0)


def test_initial_samples_cover_span():
    history = linear_history()
    assert len(history) == 17
    assert history.t_first == pytest.approx(-1.0)
    assert history.t_now == 0.0
    assert_allclose(history.coefficients[-1], OFFSET)


@given(st.floats(-1.0, 0.0))
def test_interpolation_is_exact_for_linear_history(t):
    history = linear_history()
    assert_allclose(history.eval(t).coefficients, OFFSET + t * SLOPE, atol=1e-12)


def test_evaluation_outside_segment_raises():
    history = linear_history()
    with pytest.raises(HistoryRangeError):
        history.eval(0.01)
    with pytest.raises(HistoryRangeError):
        history.eval_many(np.array([-0.5, -1.2]))


def test_append_requires_increasing_time():
    history = linear_history()
    with pytest.raises(HistoryRangeError):
        history.append(0.0, OFFSET)


def test_append_prunes_to_one_span():
    history = linear_history()
    for j in range(1, 200):
        history.append(j * DT, OFFSET + j * DT * SLOPE)
    t_now = history.t_now
    assert t_now == pytest.approx(199 * DT)
    assert history.t_first > t_now - 1.0 - DT - 1e-12
    assert len(history) == 17
    assert_allclose(history.eval(t_now - 0.5).coefficients, OFFSET + (t_now - 0.5) * SLOPE, atol=1e-12)


def test_copy_is_independent():
    history = linear_history()
    clone = history.copy()
    clone.append(DT, OFFSET)
    assert history.t_now == 0.0
    assert clone.t_now == DT


def test_segment_norm_of_constant_history():
    u0 = SpectralField([3.0, 4.0])
    history = HistorySegment.from_initial_data(u0, lambda t: u0, 1.0, DT)
    assert history.segment_norm_sq() == pytest.approx(25.0, rel=1e-12)


def test_segment_distance_between_shifted_constants():
    a = SpectralField([1.0, 0.0])
    b = SpectralField([0.0, 1.0])
    first = HistorySegment.from_initial_data(a, lambda t: a, 0.5, DT)
    second = HistorySegment.from_initial_data(b, lambda t: b, 0.5, DT)
    assert first.segment_distance_sq(second) == pytest.approx(1.0, rel=1e-12)


def test_kernel_integral_of_constant_history_is_the_mapped_state():
    basis = build_basis(Domain(float(np.pi), 16), 4)
    u0 = SpectralField.mode(4, 1)
    history = HistorySegment.from_initial_data(u0, lambda t: u0, 1.0, DT)
    kernel = StepKernel(eps=0.125, eta=0.5)
    averaged = history.kernel_time_integral(0.0, kernel, np.square, basis)
    assert_allclose(averaged, basis.to_physical(u0) ** 2, atol=1e-12)


def test_kernel_escaping_the_segment_is_rejected():
    basis = build_basis(Domain(float(np.pi), 16), 3)
    history = linear_history()
    with pytest.raises(KernelError):
        history.kernel_time_integral(0.0, StepKernel(eps=0.5, eta=0.75), np.square, basis)


def test_kernel_integral_of_linear_history_is_the_window_midpoint():
    basis = build_basis(Domain(float(np.pi), 16), 3)
    history = linear_history()
    kernel = StepKernel(eps=0.25, eta=0.5)
    averaged = history.kernel_time_integral(0.0, kernel, lambda w: w, basis)
    # support [-0.75, -0.5]; the average of a linear function is its midpoint value
    assert_allclose(averaged, basis.to_physical(OFFSET - 0.625 * SLOPE), atol=1e-12)


@pytest.mark.parametrize('dt', [1.0 / 16, 1.0 / 64])
def test_segment_norm_of_linear_history(dt):
    u0 = SpectralField([1.0])
    history = HistorySegment.from_initial_data(u0, lambda t: np.array([1.0 + t]), 1.0, dt)
    # int_{-1}^0 (1 + s)^2 ds = 1/3; the trapezoid rule overshoots by dt^2 / 6
    assert history.segment_norm_sq() == pytest.approx(1.0 / 3.0 + dt ** 2 / 6.0, abs=1e-12)


def test_interpolation_error_drops_fourfold_when_dt_halves():
    query = np.linspace(-1.0, 0.0, 2001)
    errors = []
    for dt in (1.0 / 16, 1.0 / 32, 1.0 / 64):
        u0 = SpectralField([0.0])
        history = HistorySegment.from_initial_data(u0, lambda t: np.array([np.sin(3.0 * t)]), 1.0, dt)
        errors.append(float(np.max(np.abs(history.eval_many(query)[:, 0] - np.sin(3.0 * query)))))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(3.6 <= r <= 4.4 for r in ratios)
