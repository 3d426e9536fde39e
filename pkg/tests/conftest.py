import numpy as np
import pytest

from mlparch import InputDist, Theta


@pytest.fixture
def theta_k1():
    """Default single-unit tanh model used by the theory checks."""
    return Theta(0.0, [1.0], [0.3], [[1.2]])


@pytest.fixture
def theta_k2():
    """Default two-unit tanh model used by the consistency experiment."""
    return Theta(0.3, [1.2, -0.8], [0.5, 1.2], [[1.5], [-2.0]])


@pytest.fixture
def std_normal_d1():
    return InputDist.gaussian([0.0], [1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20250811)
