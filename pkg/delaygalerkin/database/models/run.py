"""
Run model: one row per simulation or verification command.
"""
from datetime import datetime
from typing import Any, Dict, List, Optional

from ..connection import execute, fetch_all, fetch_one


class RunModel:

    @staticmethod
    def add(name: str, command: str, mode: Optional[str] = None, modes: Optional[int] = None,
            n: Optional[int] = None, dt: Optional[float] = None, horizon: Optional[float] = None,
            steps: Optional[int] = None, terminal_norm: Optional[float] = None,
            max_norm: Optional[float] = None, config_text: str = '', output_path: str = '') -> int:
        cursor = execute("""
            INSERT INTO runs (name, command, mode, modes, n, dt, horizon, steps, terminal_norm,
                              max_norm, config_text, output_path, created_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, (name, command, mode, modes, n, dt, horizon, steps, terminal_norm, max_norm,
              config_text, output_path, datetime.now().isoformat()))
        return cursor.lastrowid

    @staticmethod
    def get_all(limit: int = 100) -> List[Dict[str, Any]]:
        rows = fetch_all("""
            SELECT id, name, command, mode, modes, n, dt, horizon, steps, terminal_norm, max_norm,
                   output_path, created_at
            FROM runs
            ORDER BY id DESC
            LIMIT ?
        """, (limit,))
        return [dict(row) for row in rows]

    @staticmethod
    def get_by_id(run_id: int) -> Optional[Dict[str, Any]]:
        row = fetch_one("SELECT * FROM runs WHERE id = ?", (run_id,))
        return dict(row) if row else None

    @staticmethod
    def count() -> int:
        row = fetch_one("SELECT COUNT(*) as count FROM runs")
        return row['count'] if row else 0
