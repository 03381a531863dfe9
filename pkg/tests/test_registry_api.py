import pytest

from delaygalerkin import create_app
from delaygalerkin.database.connection import get_db_path
from delaygalerkin.models.report import CheckRecord, VerificationReport
from delaygalerkin.services import registry_service
from delaygalerkin.services.galerkin_integrator import run


@pytest.fixture
def client(registry_db):
    app = create_app()
    app.config['TESTING'] = True
    return app.test_client()


@pytest.fixture
def recorded(registry_db, small_scenario):
    trajectory = run(small_scenario)
    run_id = registry_service.record_run('run', small_scenario, trajectory, '[operator]\nmodes = 8\n', 'out/small.csv')
    report = VerificationReport(command='verify', scenario=small_scenario.to_dict())
    report.add(CheckRecord('energy', 'chi <= bound', True, 0.5, {'k3': 2.0}))
    report.add(CheckRecord('attraction', 'dist -> 0', False, -0.1))
    report_id = registry_service.record_report(report, small_scenario, 'out/report.json')
    return run_id, report_id, trajectory


def test_registry_follows_the_configured_path(registry_db):
    assert get_db_path() == registry_db
    assert registry_service.count_runs() == 0
    assert registry_db.exists()


def test_record_and_list(recorded, small_scenario):
    run_id, report_id, trajectory = recorded
    runs = registry_service.list_runs()
    assert [r['id'] for r in runs] == [report_id, run_id]
    stored = registry_service.get_run(run_id)
    assert stored['name'] == 'small'
    assert stored['modes'] == 8
    assert stored['steps'] == small_scenario.steps
    assert stored['terminal_norm'] == pytest.approx(float(trajectory.norm_l2[-1]))
    checks = registry_service.get_checks(report_id)
    assert [(c['name'], c['passed']) for c in checks] == [('energy', True), ('attraction', False)]
    assert checks[0]['constants'] == {'k3': 2.0}


def test_health(client, recorded):
    response = client.get('/health')
    assert response.status_code == 200
    assert response.get_json() == {'status': 'ok', 'runs': 2}


def test_list_runs_with_filters(client, recorded):
    run_id, report_id, _ = recorded
    assert [r['id'] for r in client.get('/api/runs').get_json()] == [report_id, run_id]
    assert [r['command'] for r in client.get('/api/runs?command=run').get_json()] == ['run']
    assert len(client.get('/api/runs?limit=1').get_json()) == 1
    response = client.get('/api/runs?limit=many')
    assert response.status_code == 400


def test_run_detail_includes_checks(client, recorded):
    _, report_id, _ = recorded
    detail = client.get(f'/api/runs/{report_id}').get_json()
    assert detail['command'] == 'verify'
    assert detail['passed'] is False
    assert [c['name'] for c in detail['checks']] == ['energy', 'attraction']
    checks = client.get(f'/api/runs/{report_id}/checks').get_json()
    assert checks[1]['margin'] == pytest.approx(-0.1)


def test_missing_run(client, registry_db):
    assert client.get('/api/runs/999').status_code == 404
    assert client.get('/api/runs/999/checks').status_code == 404
