"""
Results API - read-only JSON views of the run registry.
All routes prefixed with /api/ except the health check.
"""
from flask import Blueprint, jsonify, request

from delaygalerkin.services.registry_service import count_runs, get_checks, get_run, list_runs

api_bp = Blueprint("api", __name__, url_prefix="/api")
health_bp = Blueprint("health", __name__)


# ============================================
# Run endpoints
# ============================================

@api_bp.route('/runs')
def get_runs():
    """Recorded runs, newest first; optional ?command= and ?limit= filters"""
    command = request.args.get('command', '')
    try:
        limit = int(request.args.get('limit', 100))
    except ValueError:
        return jsonify({'error': 'limit must be an integer'}), 400

    runs = list_runs(limit)
    if command:
        runs = [run for run in runs if run['command'] == command]
    return jsonify(runs)


@api_bp.route('/runs/<int:run_id>')
def get_run_detail(run_id):
    run = get_run(run_id)
    if run is None:
        return jsonify({'error': f'Run {run_id} not found'}), 404
    run['checks'] = get_checks(run_id)
    run['passed'] = all(check['passed'] for check in run['checks'])
    return jsonify(run)


@api_bp.route('/runs/<int:run_id>/checks')
def get_run_checks(run_id):
    if get_run(run_id) is None:
        return jsonify({'error': f'Run {run_id} not found'}), 404
    return jsonify(get_checks(run_id))


@health_bp.route('/health')
def health():
    return jsonify({'status': 'ok', 'runs': count_runs()})
