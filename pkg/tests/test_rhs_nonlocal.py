import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from delaygalerkin.services.delay_model import DelayLaw, EpsilonSequence, TabulatedKernel, random_phase_point
from delaygalerkin.services.history_buffer import HistorySegment
from delaygalerkin.services.rhs_nonlocal import (Nonlinearity, RhsModel, SpatialKernel, b_eval, convolve_f,
                                                 discrete_rhs, distributed_rhs, evaluate_rhs)
from delaygalerkin.services.spectral_core import Domain, SpectralField, build_basis
from delaygalerkin.utils.errors import ScenarioError

DT = 1.0 / 32


@pytest.fixture
def model():
    basis = build_basis(Domain(float(np.pi), 32), 8)
    return RhsModel(basis=basis, nonlinearity=Nonlinearity(), spatial_kernel=SpatialKernel(),
                    law=DelayLaw.constant(0.5), eps_sequence=EpsilonSequence.default(1.0))


def test_nicholson_values():
    nicholson = Nonlinearity(p=2.0)
    assert b_eval(nicholson, 1.0) == pytest.approx(2.0 / np.e)
    assert b_eval(nicholson, -3.0) == 0.0
    assert nicholson.bound == pytest.approx(2.0 / np.e)
    assert nicholson.lipschitz == 2.0


@given(st.floats(-1e6, 1e6))
def test_nicholson_is_bounded(w):
    nicholson = Nonlinearity(p=3.0)
    assert 0.0 <= nicholson(w) <= nicholson.bound * (1 + 1e-12)


def test_table_nonlinearity_extends_constantly():
    table = Nonlinearity(kind='table', nodes=(0.0, 1.0, 2.0), values=(0.0, 1.0, 0.5))
    assert_allclose(table(np.array([-1.0, 0.5, 1.5, 9.0])), [0.0, 0.5, 0.75, 0.5])
    assert table.bound == 1.0
    assert table.lipschitz == 1.0
    with pytest.raises(ValueError):
        Nonlinearity(kind='table', nodes=(1.0, 0.0), values=(0.0, 1.0))


def test_gaussian_kernel_sup_is_its_peak():
    kernel = SpatialKernel(kind='gaussian', alpha=0.1)
    assert kernel.sup_bound == pytest.approx(float(kernel(0.0)))
    assert float(kernel(1.0)) < kernel.sup_bound


def test_constant_kernel_convolution_is_the_integral():
    domain = Domain(float(np.pi), 64)
    w = np.sin(domain.nodes)
    result = convolve_f(SpatialKernel(f0=2.0), domain, w)
    assert_allclose(result, 2.0 * domain.integrate(w))
    assert float(result[0]) == pytest.approx(4.0, rel=1e-3)


def test_gaussian_convolution_uses_the_grid_quadrature():
    domain = Domain(1.0, 16)
    kernel = SpatialKernel(kind='gaussian', alpha=0.05)
    w = np.ones(domain.grid_size)
    expected = np.array([domain.spacing * np.sum(kernel(x - domain.nodes)) for x in domain.nodes])
    assert_allclose(convolve_f(kernel, domain, w), expected, rtol=1e-12)


def test_zero_nonlinearity_gives_zero_forcing(model):
    zero = RhsModel(model.basis, Nonlinearity(kind='zero'), model.spatial_kernel, model.law, model.eps_sequence)
    u0 = SpectralField.mode(8, 1)
    history = HistorySegment.from_initial_data(u0, lambda t: u0, 1.0, DT)
    for n in (None, 1):
        evaluation = evaluate_rhs(0.0, history, zero, n)
        assert not np.any(evaluation.coefficients)
        assert evaluation.eta == 0.5


def test_distributed_and_discrete_agree_on_constant_history(model):
    u0 = SpectralField.mode(8, 1, 2.0)
    history = HistorySegment.from_initial_data(u0, lambda t: u0, 1.0, DT)
    discrete = discrete_rhs(0.0, history, model)
    for n in (1, 3):
        distributed = distributed_rhs(0.0, history, model, n)
        assert_allclose(distributed.coefficients, discrete.coefficients, atol=1e-12)
        assert distributed.kernel.support == pytest.approx((-0.5 - model.eps_sequence.epsilon(n), -0.5))


def test_discrete_rhs_reads_the_delayed_state(model):
    # history is zero except near t = -0.5, where the delayed read happens
    u0 = SpectralField.zeros(8)
    bump = SpectralField.mode(8, 1, 1.0)
    history = HistorySegment.from_initial_data(u0, lambda t: bump if abs(t + 0.5) < 1e-9 else u0, 1.0, DT)
    forcing = discrete_rhs(0.0, history, model).coefficients
    expected_grid = convolve_f(model.spatial_kernel, model.basis.domain,
                               model.nonlinearity(model.basis.to_physical(bump)))
    assert_allclose(forcing, model.basis.to_spectral_coefficients(expected_grid), atol=1e-12)


def test_rhs_bound_holds_on_random_states(model):
    rng = np.random.default_rng(5)
    bound = model.bound
    assert bound == pytest.approx(np.pi ** 1.5 * 2.0 / np.e)
    for _ in range(200):
        _, phi = random_phase_point(8, 1.0, DT, 10.0, rng)
        for n in (None, 1, 4):
            assert np.linalg.norm(evaluate_rhs(0.0, phi, model, n).coefficients) <= bound + 1e-8


def test_distributed_rhs_approaches_discrete_at_first_order_in_eps(model):
    dt = 1.0 / 256
    u0 = SpectralField.mode(8, 1, 1.0)
    history = HistorySegment.from_initial_data(u0, lambda t: SpectralField.mode(8, 1, 1.0 + 0.5 * t), 1.0, dt)
    discrete = discrete_rhs(0.0, history, model).coefficients
    levels = [2, 3, 4, 5]
    errors = np.array([np.linalg.norm(distributed_rhs(0.0, history, model, n).coefficients - discrete)
                       for n in levels])
    eps = np.array([model.eps_sequence.epsilon(n) for n in levels])
    assert np.all(errors > 0)
    ratios = errors[:-1] / errors[1:]
    assert np.all((ratios >= 1.8) & (ratios <= 2.2))
    assert_allclose(errors / eps, errors[0] / eps[0], rtol=0.1)


def test_invalid_nonlinearity_and_kernel_raise_scenario_errors():
    with pytest.raises(ScenarioError) as excinfo:
        Nonlinearity(kind='cubic')
    assert excinfo.value.invariant == 'nonlinearity'
    with pytest.raises(ScenarioError):
        Nonlinearity(p=0.0)
    with pytest.raises(ScenarioError) as excinfo:
        SpatialKernel(kind='gaussian', alpha=0.0)
    assert excinfo.value.invariant == 'spatial-kernel'
    with pytest.raises(ScenarioError):
        SpatialKernel(kind='box')


def test_box_profile_gives_the_step_kernel_forcing(model):
    box = RhsModel(model.basis, model.nonlinearity, model.spatial_kernel, model.law, model.eps_sequence,
                   kernel_shape=TabulatedKernel.profile((-1.0, 0.0), (1.0, 1.0)))
    u0 = SpectralField.mode(8, 1, 1.0)
    history = HistorySegment.from_initial_data(u0, lambda t: SpectralField.mode(8, 1, 1.0 + 0.5 * t), 1.0, DT)
    for n in (1, 2):
        expected = distributed_rhs(0.0, history, model, n).coefficients
        evaluation = distributed_rhs(0.0, history, box, n)
        assert isinstance(evaluation.kernel, TabulatedKernel)
        assert_allclose(evaluation.coefficients, expected, atol=1e-12)
