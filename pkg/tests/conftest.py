import numpy as np
import pytest

from qldp.core import DensityMatrix
from qldp.measurement import Povm, projective_povm
from qldp.rng import make_rng

KET0 = DensityMatrix(np.diag([1.0, 0.0]))
KET1 = DensityMatrix(np.diag([0.0, 1.0]))
MIXED = DensityMatrix(np.eye(2) / 2)


def tilted_pair(labels=None):
    """The (diag(0.75, 0.25), diag(0.25, 0.75)) measurement."""
    return Povm([np.diag([0.75, 0.25]), np.diag([0.25, 0.75])], labels)


def coin_povm(dim=2, labels=None):
    """(I/2, I/2): ignores the state entirely."""
    return Povm([np.eye(dim) / 2, np.eye(dim) / 2], labels)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def projective_pair():
    return projective_povm(2, (1, 2))
