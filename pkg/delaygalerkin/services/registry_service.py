"""
Run Registry Service - records simulations and verification reports in SQLite
so earlier results can be listed and served by the results API.
"""
import logging
from typing import Any, Dict, List, Optional

from delaygalerkin.database import init_db
from delaygalerkin.database.connection import get_db_path
from delaygalerkin.database.models import CheckModel, RunModel
from delaygalerkin.models.report import VerificationReport
from delaygalerkin.models.scenario import Scenario
from delaygalerkin.models.trajectory import Trajectory

logger = logging.getLogger(__name__)

# Registry file the schema was last initialized for
_db_initialized = None


def _ensure_db():
    """Initialize database if not already done for the configured path."""
    global _db_initialized
    path = get_db_path()
    if _db_initialized != path:
        init_db()
        _db_initialized = path


def record_run(command: str, scenario: Scenario, trajectory: Optional[Trajectory] = None,
               config_text: str = '', output_path: str = '') -> int:
    _ensure_db()
    summary = trajectory.summary() if trajectory is not None else {}
    run_id = RunModel.add(
        name=scenario.name, command=command, mode=scenario.mode, modes=scenario.modes,
        n=scenario.kernel_index, dt=scenario.dt, horizon=scenario.horizon, steps=scenario.steps,
        terminal_norm=summary.get('terminal_norm'), max_norm=summary.get('max_norm'),
        config_text=config_text, output_path=str(output_path))
    logger.info("Recorded %s run %d for %s", command, run_id, scenario.name)
    return run_id


def record_report(report: VerificationReport, scenario: Scenario, output_path: str = '',
                  trajectory: Optional[Trajectory] = None) -> int:
    run_id = record_run(report.command, scenario, trajectory, report.config_text, output_path)
    CheckModel.add_many(run_id, [record.to_dict() for record in report.records])
    return run_id


def list_runs(limit: int = 100) -> List[Dict[str, Any]]:
    _ensure_db()
    return RunModel.get_all(limit)


def get_run(run_id: int) -> Optional[Dict[str, Any]]:
    _ensure_db()
    return RunModel.get_by_id(run_id)


def get_checks(run_id: int) -> List[Dict[str, Any]]:
    _ensure_db()
    return CheckModel.get_for_run(run_id)


def count_runs() -> int:
    _ensure_db()
    return RunModel.count()
