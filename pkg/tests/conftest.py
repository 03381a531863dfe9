import numpy as np
import pytest

from delaygalerkin.database import close_db
from delaygalerkin.models.scenario import AnalysisOptions, Scenario
from delaygalerkin.services.rhs_nonlocal import Nonlinearity
from delaygalerkin.services.spectral_core import Domain

SMALL_CONFIG = """\
[domain]
length = pi
grid_size = 32

[operator]
modes = 8
damping = 1

[delay]
span = 1
eta0 = 0.5

[integration]
dt = 1/32
horizon = 2

[analysis]
n_max = 3
study_horizon = 1
"""


@pytest.fixture
def make_scenario():
    """Desk-scale Nicholson scenario: m=8, N_x=32, dt=1/32, T=2."""
    def _make(**changes):
        base = Scenario(domain=Domain(float(np.pi), 32), modes=8, dt=1.0 / 32, horizon=2.0,
                        analysis=AnalysisOptions(n_max=3, study_horizon=1.0), name='small')
        return base.with_changes(**changes)
    return _make


@pytest.fixture
def small_scenario(make_scenario):
    return make_scenario()


@pytest.fixture
def linear_scenario(make_scenario):
    """Zero nonlinearity, u0 = e_1, L = pi, d = 1: ||u(t)|| = e^{-2t}."""
    return make_scenario(nonlinearity=Nonlinearity(kind='zero'))


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'small.ini'
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture
def registry_db(tmp_path, monkeypatch):
    path = tmp_path / 'registry.db'
    monkeypatch.setenv('DELAYGALERKIN_DB_PATH', str(path))
    yield path
    close_db()
