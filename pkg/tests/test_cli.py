import json

import pytest

import delaygalerkin_core
from delaygalerkin.config import Config
from delaygalerkin.models.report import CheckRecord, VerificationReport
from delaygalerkin.services import export_service, registry_service, verification
from delaygalerkin_core import EXIT_CHECK_FAILED, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main

from conftest import SMALL_CONFIG


def _cli(*args, out):
    return main([*map(str, args), '--out', str(out), '--no-record', '--quiet'])


def test_run_exports_the_trajectory(config_file, tmp_path, capsys):
    assert _cli('run', config_file, out=tmp_path / 'out') == EXIT_OK
    path = tmp_path / 'out' / 'small_trajectory.csv'
    assert path.exists()
    table = export_service.read_table(path)
    assert table['t'].shape == (65,)
    assert list(table)[:5] == ['t', 'norm_l2', 'norm_h1', 'eta', 'f_norm']
    assert 'Trajectory written' in capsys.readouterr().out


def test_run_overrides(config_file, tmp_path):
    assert _cli('run', config_file, '--dt', '1/64', '--modes', '4', out=tmp_path) == EXIT_OK
    table = export_service.read_table(tmp_path / 'small_trajectory.csv')
    assert table['t'].shape == (129,)
    assert [name for name in table if name.startswith('g_')] == ['g_1', 'g_2', 'g_3', 'g_4']


def test_same_config_and_seed_give_identical_bytes(config_file, tmp_path):
    for name in ('a', 'b'):
        assert _cli('run', config_file, '--seed', '3', out=tmp_path / name) == EXIT_OK
    first = (tmp_path / 'a' / 'small_trajectory.csv').read_bytes()
    second = (tmp_path / 'b' / 'small_trajectory.csv').read_bytes()
    assert first == second


def test_validation_error_exits_with_one(tmp_path, capsys):
    config = tmp_path / 'bad.ini'
    config.write_text(SMALL_CONFIG.replace('dt = 1/32', 'dt = 0.3'))
    assert _cli('run', config, out=tmp_path) == EXIT_VALIDATION
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith('error: line 14: ')
    assert 'history-grid' in err


def test_missing_config_exits_with_three(tmp_path, capsys):
    assert _cli('run', tmp_path / 'absent.ini', out=tmp_path) == EXIT_IO
    assert 'I/O error' in capsys.readouterr().err


def test_unwritable_output_exits_with_three(config_file, tmp_path, capsys):
    blocker = tmp_path / 'blocker'
    blocker.write_text('')
    assert _cli('run', config_file, out=blocker) == EXIT_IO
    assert str(blocker) in capsys.readouterr().err


def test_usage_errors_exit_with_one():
    with pytest.raises(SystemExit) as excinfo:
        main(['run'])
    assert excinfo.value.code == EXIT_VALIDATION
    with pytest.raises(SystemExit) as excinfo:
        main(['run', 'x.ini', '--dt', 'fast'])
    assert excinfo.value.code == EXIT_VALIDATION


def _fake_report(scenario, config_text=''):
    report = VerificationReport(command='verify', scenario=scenario.to_dict(), config_text=config_text)
    report.add(CheckRecord('energy', 'chi <= bound', True, 0.4))
    report.add(CheckRecord('attraction', 'dist -> 0', False, -0.2, series={'h': [0.0, 1.0], 'distance': [1.0, 0.5]}))
    return report


def test_failed_check_only_fails_under_strict(config_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(verification, 'verify_report', _fake_report)
    assert _cli('verify', config_file, out=tmp_path) == EXIT_OK
    assert _cli('verify', config_file, '--strict', out=tmp_path) == EXIT_CHECK_FAILED
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith('check failed: attraction')
    document = json.loads((tmp_path / 'small_verify_report.json').read_text())
    assert [c['name'] for c in document['checks']] == ['energy', 'attraction']
    assert '[delay]' in document['config_text']


def test_plot_data_flag_writes_series(config_file, tmp_path, monkeypatch):
    monkeypatch.setattr(verification, 'verify_report', _fake_report)
    assert _cli('verify', config_file, '--plot-data', out=tmp_path) == EXIT_OK
    assert (tmp_path / 'plot_data' / 'attraction.csv').exists()
    assert not (tmp_path / 'plot_data' / 'energy.csv').exists()


def test_sweep_writes_error_table(config_file, tmp_path):
    assert _cli('sweep-n', config_file, '--n-max', '3', out=tmp_path) == EXIT_OK
    table = export_service.read_table(tmp_path / 'plot_data' / 'limiting_solution.csv')
    assert list(table) == ['eps', 'error']
    assert table['eps'].tolist() == [0.125, 0.0625, 0.03125]
    errors = table['error']
    assert errors[1] <= errors[0] and errors[2] <= errors[1]


def test_pair_reports_dependence_and_witness(config_file, tmp_path):
    assert _cli('pair', config_file, '--delta', '1e-3', out=tmp_path) == EXIT_OK
    document = json.loads((tmp_path / 'small_pair_report.json').read_text())
    assert [c['name'] for c in document['checks']] == ['continuous_dependence', 'uniqueness_witness']
    assert document['checks'][0]['details']['deltas'] == [1e-3, 5e-4, 2.5e-4, 1.25e-4]


def test_runs_are_recorded_unless_disabled(config_file, tmp_path, registry_db, monkeypatch):
    monkeypatch.setattr(Config, 'RECORD_RUNS', True)
    assert main(['run', str(config_file), '--out', str(tmp_path), '--quiet']) == EXIT_OK
    assert main(['run', str(config_file), '--out', str(tmp_path), '--quiet', '--no-record']) == EXIT_OK
    runs = registry_service.list_runs()
    assert len(runs) == 1
    assert runs[0]['command'] == 'run'
    assert runs[0]['output_path'].endswith('small_trajectory.csv')


def test_serve_starts_the_registry_app(monkeypatch, registry_db):
    calls = {}

    class _App:
        def run(self, **kwargs):
            calls.update(kwargs)

    monkeypatch.setattr(delaygalerkin_core.Setup, 'create_app', staticmethod(lambda: _App()))
    assert main(['serve', '--port', '5055']) == EXIT_OK
    assert calls == {'debug': False, 'host': '127.0.0.1', 'port': 5055}
