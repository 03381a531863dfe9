"""
Export Service - trajectory CSVs, JSON verification reports and per-figure
plot-data CSVs. Floats are written with 17 significant digits so that
re-imported values are bit-identical.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from delaygalerkin.models.report import CheckRecord, VerificationReport
from delaygalerkin.models.trajectory import Trajectory
from delaygalerkin.utils.errors import ExportError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
TRAJECTORY_COLUMNS = ('t', 'norm_l2', 'norm_h1', 'eta', 'f_norm')
REPORT_FIELDS = ('command', 'created_at', 'passed', 'scenario', 'config_text', 'checks')
CHECK_FIELDS = ('name', 'reference', 'passed', 'margin', 'constants', 'details')

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(path.parent, f"cannot create directory ({e.strerror or e})") from e
    return path


def _write_table(path: PathLike, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = _prepare(path)
    rows = np.column_stack(columns) if columns and len(columns[0]) else np.empty((0, len(header)))
    try:
        with open(path, 'w', newline='') as f:
            f.write(','.join(header) + '\n')
            if rows.shape[0]:
                np.savetxt(f, rows, fmt=FLOAT_FORMAT, delimiter=',')
    except OSError as e:
        raise ExportError(path, f"cannot write ({e.strerror or e})") from e
    return path


def trajectory_header(order: int, coefficients: bool = True) -> List[str]:
    header = list(TRAJECTORY_COLUMNS)
    if coefficients:
        header += [f'g_{k}' for k in range(1, order + 1)]
    return header


def export_trajectory(trajectory: Trajectory, path: PathLike, coefficients: bool = True) -> Path:
    """CSV `t,norm_l2,norm_h1,eta,f_norm[,g_1..g_m]`; an empty trajectory gives the header only."""
    header = trajectory_header(trajectory.order, coefficients)
    columns = [trajectory.absolute_times, trajectory.norm_l2, trajectory.norm_h1, trajectory.eta,
               trajectory.f_norm]
    if coefficients:
        columns += [trajectory.coefficients[:, k] for k in range(trajectory.order)]
    written = _write_table(path, header, columns)
    logger.info("Wrote trajectory (%d nodes) to %s", trajectory.nodes, written)
    return written


def read_table(path: PathLike) -> Dict[str, np.ndarray]:
    """Columns of a CSV written by this module, keyed by header name."""
    path = Path(path)
    try:
        with open(path) as f:
            header = f.readline().strip().split(',')
            body = f.read()
    except OSError as e:
        raise ExportError(path, f"cannot read ({e.strerror or e})") from e
    if body.strip():
        data = np.loadtxt(body.splitlines(), delimiter=',', ndmin=2)
    else:
        data = np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def read_trajectory_coefficients(path: PathLike) -> np.ndarray:
    """(nodes, m) coefficient matrix of an exported trajectory."""
    table = read_table(path)
    names = sorted((name for name in table if name.startswith('g_')), key=lambda name: int(name[2:]))
    if not names:
        raise ExportError(path, "no coefficient columns")
    return np.column_stack([table[name] for name in names])


def export_report(report: VerificationReport, path: PathLike) -> Path:
    path = _prepare(path)
    try:
        with open(path, 'w') as f:
            json.dump(report.to_dict(), f, indent=2, allow_nan=False)
    except OSError as e:
        raise ExportError(path, f"cannot write ({e.strerror or e})") from e
    logger.info("Wrote report with %d checks to %s", len(report.records), path)
    return path


def load_report(path: PathLike) -> VerificationReport:
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ExportError(path, f"cannot read ({e.strerror or e})") from e
    except json.JSONDecodeError as e:
        raise ExportError(path, f"not a report document ({e.msg} at line {e.lineno})") from e
    return VerificationReport.from_dict(data)


def export_series(record: CheckRecord, directory: PathLike) -> Path:
    """One CSV per check with its plot columns."""
    names = list(record.series)
    columns = [np.asarray(record.series[name], dtype=float).reshape(-1) for name in names]
    lengths = {column.shape[0] for column in columns}
    if len(lengths) > 1:
        raise ValueError(f"plot columns of '{record.name}' differ in length: {sorted(lengths)}")
    return _write_table(Path(directory) / f'{record.name}.csv', names, columns)


def export_plot_data(report: VerificationReport, directory: PathLike) -> List[Path]:
    written = [export_series(record, directory) for record in report.records if record.series]
    logger.info("Wrote %d plot-data files to %s", len(written), directory)
    return written
