import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from delaygalerkin.models.report import CheckRecord, VerificationReport
from delaygalerkin.models.trajectory import Trajectory
from delaygalerkin.services import export_service
from delaygalerkin.services.galerkin_integrator import run
from delaygalerkin.services.spectral_core import build_basis
from delaygalerkin.utils.errors import ExportError


def _report(small_scenario):
    report = VerificationReport(command='verify', scenario=small_scenario.to_dict(), config_text='[operator]\n')
    report.add(CheckRecord('energy', 'chi <= bound', True, 0.25, {'k3': 1.5}, {'t_worst': np.float64(2.0)},
                           series={'t': np.linspace(0, 1, 5), 'chi': np.ones(5)}))
    report.add(CheckRecord('attraction', 'dist -> 0', False, float('-inf'), {}, {'distances': np.array([1.0, np.inf])}))
    return report


def test_empty_trajectory_gives_header_only(tmp_path):
    path = export_service.export_trajectory(Trajectory.empty(3), tmp_path / 'empty.csv')
    assert path.read_text() == 't,norm_l2,norm_h1,eta,f_norm,g_1,g_2,g_3\n'
    table = export_service.read_table(path)
    assert list(table) == ['t', 'norm_l2', 'norm_h1', 'eta', 'f_norm', 'g_1', 'g_2', 'g_3']
    assert table['t'].shape == (0,)


def test_trajectory_round_trip_reproduces_norms(tmp_path, small_scenario):
    trajectory = run(small_scenario)
    path = export_service.export_trajectory(trajectory, tmp_path / 'run' / 'traj.csv')
    coefficients = export_service.read_trajectory_coefficients(path)
    assert_array_equal(coefficients, trajectory.coefficients)
    basis = build_basis(small_scenario.domain, small_scenario.modes)
    table = export_service.read_table(path)
    assert_allclose(basis.norm(coefficients), table['norm_l2'], rtol=0, atol=1e-12)
    assert_allclose(basis.norm(coefficients, alpha=0.5), table['norm_h1'], rtol=0, atol=1e-12)
    assert_allclose(table['t'], trajectory.absolute_times)


def test_trajectory_without_coefficients(tmp_path, small_scenario):
    trajectory = run(small_scenario)
    path = export_service.export_trajectory(trajectory, tmp_path / 'norms.csv', coefficients=False)
    assert path.read_text().splitlines()[0] == 't,norm_l2,norm_h1,eta,f_norm'
    with pytest.raises(ExportError):
        export_service.read_trajectory_coefficients(path)


def test_identical_runs_export_identical_bytes(tmp_path, small_scenario):
    first = export_service.export_trajectory(run(small_scenario), tmp_path / 'a.csv')
    second = export_service.export_trajectory(run(small_scenario), tmp_path / 'b.csv')
    assert first.read_bytes() == second.read_bytes()


def test_report_document_fields(tmp_path, small_scenario):
    path = export_service.export_report(_report(small_scenario), tmp_path / 'report.json')
    document = json.loads(path.read_text())
    assert set(document) == set(export_service.REPORT_FIELDS)
    assert document['passed'] is False
    assert document['scenario']['modes'] == 8
    for check in document['checks']:
        assert set(check) == set(export_service.CHECK_FIELDS)
    energy, attraction = document['checks']
    assert energy['details'] == {'t_worst': 2.0}
    assert attraction['margin'] == -1e300
    assert attraction['details']['distances'] == [1.0, 1e300]


def test_report_round_trip(tmp_path, small_scenario):
    report = _report(small_scenario)
    loaded = export_service.load_report(export_service.export_report(report, tmp_path / 'report.json'))
    assert [r.name for r in loaded.records] == ['energy', 'attraction']
    assert loaded.records[0].margin == 0.25
    assert loaded.created_at == report.created_at
    assert not loaded.passed


def test_load_report_rejects_other_files(tmp_path):
    path = tmp_path / 'notes.json'
    path.write_text('not json')
    with pytest.raises(ExportError, match='not a report document'):
        export_service.load_report(path)


def test_plot_data_only_for_checks_with_series(tmp_path, small_scenario):
    written = export_service.export_plot_data(_report(small_scenario), tmp_path / 'plots')
    assert [p.name for p in written] == ['energy.csv']
    table = export_service.read_table(written[0])
    assert_allclose(table['t'], np.linspace(0, 1, 5))


def test_series_columns_must_match():
    record = CheckRecord('bad', '', True, 0.0, series={'a': np.zeros(3), 'b': np.zeros(4)})
    with pytest.raises(ValueError):
        export_service.export_series(record, '.')


def test_unwritable_location_raises_export_error(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pytest.raises(ExportError) as excinfo:
        export_service.export_trajectory(Trajectory.empty(2), blocker / 'traj.csv')
    assert str(blocker) in str(excinfo.value)
    assert isinstance(excinfo.value, OSError)
