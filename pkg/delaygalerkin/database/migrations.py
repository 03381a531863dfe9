"""
Registry schema and versioned migrations.
"""
import logging
import sqlite3
from datetime import datetime

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 2


def run_migrations(conn: sqlite3.Connection) -> None:
    conn.execute("""
        CREATE TABLE IF NOT EXISTS schema_migrations (
            version INTEGER PRIMARY KEY,
            applied_at DATETIME DEFAULT CURRENT_TIMESTAMP
        )
    """)
    row = conn.execute("SELECT MAX(version) FROM schema_migrations").fetchone()
    current_version = row[0] if row[0] is not None else 0

    migrations = [
        (1, migrate_v1_runs),
        (2, migrate_v2_checks),
    ]
    for version, migration_fn in migrations:
        if version > current_version:
            logger.info("Running registry migration v%d", version)
            migration_fn(conn)
            conn.execute(
                "INSERT INTO schema_migrations (version, applied_at) VALUES (?, ?)",
                (version, datetime.now().isoformat())
            )
            conn.commit()


def migrate_v1_runs(conn: sqlite3.Connection) -> None:
    conn.execute("""
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            name TEXT NOT NULL,
            command TEXT NOT NULL,
            mode TEXT,
            modes INTEGER,
            n INTEGER,
            dt REAL,
            horizon REAL,
            steps INTEGER,
            terminal_norm REAL,
            max_norm REAL,
            config_text TEXT,
            output_path TEXT,
            created_at DATETIME DEFAULT CURRENT_TIMESTAMP
        )
    """)
    conn.execute("CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command)")


def migrate_v2_checks(conn: sqlite3.Connection) -> None:
    conn.execute("""
        CREATE TABLE IF NOT EXISTS checks (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER NOT NULL,
            name TEXT NOT NULL,
            reference TEXT,
            passed INTEGER NOT NULL,
            margin REAL,
            constants TEXT,
            created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
            FOREIGN KEY (run_id) REFERENCES runs(id) ON DELETE CASCADE
        )
    """)
    conn.execute("CREATE INDEX IF NOT EXISTS idx_checks_run ON checks(run_id)")
