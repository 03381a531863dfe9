"""
SQLite connection singleton for the run registry.
The file location comes from Config.database_path() (DELAYGALERKIN_DB_PATH).
"""
import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from delaygalerkin.config import Config

logger = logging.getLogger(__name__)

# Single connection for SQLite, reopened when the configured path changes
_connection: Optional[sqlite3.Connection] = None
_connection_path: Optional[Path] = None


def get_db_path() -> Path:
    """Registry file path, creating its directory if needed."""
    path = Config.database_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def get_db() -> sqlite3.Connection:
    global _connection, _connection_path

    path = get_db_path()
    if _connection is not None and _connection_path != path:
        close_db()
    if _connection is None:
        _connection = sqlite3.connect(str(path), check_same_thread=False)
        _connection.row_factory = sqlite3.Row
        _connection.execute("PRAGMA foreign_keys = ON")
        _connection.execute("PRAGMA journal_mode = WAL")
        _connection_path = path
        logger.debug("Opened registry %s", path)
    return _connection


def init_db() -> None:
    from .migrations import run_migrations
    conn = get_db()
    run_migrations(conn)
    conn.commit()


def close_db() -> None:
    global _connection, _connection_path
    if _connection is not None:
        _connection.close()
        _connection = None
        _connection_path = None


@contextmanager
def get_cursor():
    """Cursor with commit on success and rollback on error."""
    conn = get_db()
    cursor = conn.cursor()
    try:
        yield cursor
        conn.commit()
    except Exception:
        conn.rollback()
        raise
    finally:
        cursor.close()


def execute(query: str, params: tuple = ()) -> sqlite3.Cursor:
    conn = get_db()
    cursor = conn.execute(query, params)
    conn.commit()
    return cursor


def fetch_one(query: str, params: tuple = ()) -> Optional[sqlite3.Row]:
    return get_db().execute(query, params).fetchone()


def fetch_all(query: str, params: tuple = ()) -> list:
    return get_db().execute(query, params).fetchall()
