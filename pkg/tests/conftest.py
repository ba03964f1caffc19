"""
Shared fixtures: reference jets and engine configurations.
"""
import pytest

from steep.catalog import FIVE_VARIABLE, FOUR_VARIABLE, WEAKLY_CONVEX_LIMIT
from steep.polyjet import jet_at
from steep.search import SearchConfig


@pytest.fixture(scope='session')
def example1_jet():
    return jet_at(FOUR_VARIABLE.polynomial(), FOUR_VARIABLE.origin, 5)


@pytest.fixture(scope='session')
def example2_jet():
    return jet_at(FIVE_VARIABLE.polynomial(), FIVE_VARIABLE.origin, 5)


@pytest.fixture(scope='session')
def limit_jet():
    return jet_at(WEAKLY_CONVEX_LIMIT.polynomial(), WEAKLY_CONVEX_LIMIT.origin, 5)


@pytest.fixture
def cfg():
    """Default engine configuration (certify mode)."""
    return SearchConfig()


@pytest.fixture
def quick_cfg():
    """Heuristic search with few starts, for tests that only need witnesses."""
    return SearchConfig(starts=32, mode='heuristic', threads=1)
