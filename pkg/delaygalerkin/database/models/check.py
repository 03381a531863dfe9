"""
Check model: verification records attached to a run.
"""
import json
from datetime import datetime
from typing import Any, Dict, List

from ..connection import get_cursor, fetch_all


class CheckModel:

    @staticmethod
    def add_many(run_id: int, records: List[Dict[str, Any]]) -> int:
        """Insert serialized CheckRecords; returns the number stored."""
        now = datetime.now().isoformat()
        with get_cursor() as cursor:
            cursor.executemany("""
                INSERT INTO checks (run_id, name, reference, passed, margin, constants, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?)
            """, [(run_id, r['name'], r.get('reference', ''), int(bool(r['passed'])), r.get('margin'),
                   json.dumps(r.get('constants', {})), now) for r in records])
        return len(records)

    @staticmethod
    def get_for_run(run_id: int) -> List[Dict[str, Any]]:
        rows = fetch_all("""
            SELECT id, name, reference, passed, margin, constants, created_at
            FROM checks WHERE run_id = ? ORDER BY id
        """, (run_id,))
        result = []
        for row in rows:
            item = dict(row)
            item['passed'] = bool(item['passed'])
            try:
                item['constants'] = json.loads(item.get('constants') or '{}')
            except (json.JSONDecodeError, TypeError):
                item['constants'] = {}
            result.append(item)
        return result
