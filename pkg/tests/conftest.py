"""
Shared fixtures for the test suite
"""

import sys
from pathlib import Path

import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from witten_rates.grid_operator import build_grid
from witten_rates.potential import QuarticDoubleWell, Quadratic, Region
from witten_rates.spectrum import partition_from_critical_points


@pytest.fixture
def quartic():
    """Quartic double well with barrier height 1 and wells at +-1"""
    return QuarticDoubleWell(h=1.0, a=1.0)


@pytest.fixture
def quadratic():
    """Quadratic potential with alpha = 1"""
    return Quadratic(alpha=1.0)


@pytest.fixture
def quartic_partition(quartic):
    """Automatic partition of the quartic well on [-3, 3]"""
    return partition_from_critical_points(quartic, Region(-3.0, 3.0))


@pytest.fixture
def tight_grid():
    """Symmetric grid on [-3, 3] with a node at the origin"""
    return build_grid(-3.0, 3.0, 1599)
