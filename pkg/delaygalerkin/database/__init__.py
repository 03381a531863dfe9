# Run registry database
from .connection import close_db, get_db, init_db
from .migrations import run_migrations

__all__ = ['get_db', 'init_db', 'close_db', 'run_migrations']
