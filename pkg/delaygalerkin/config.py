import os
from pathlib import Path

from flask.cli import load_dotenv

load_dotenv()


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    SECRET_KEY = os.getenv('SECRET_KEY', 'delaygalerkin-local')
    LOG_LEVEL = os.getenv('DELAYGALERKIN_LOG_LEVEL', 'INFO')
    OUTPUT_DIR = os.getenv('DELAYGALERKIN_OUTPUT_DIR', 'out')
    RECORD_RUNS = _flag('DELAYGALERKIN_RECORD', '1')

    @staticmethod
    def database_path() -> Path:
        """Registry location; read at call time so tests can redirect it."""
        custom = os.environ.get('DELAYGALERKIN_DB_PATH')
        if custom:
            return Path(custom)
        return Path.home() / '.delaygalerkin' / 'delaygalerkin.db'
