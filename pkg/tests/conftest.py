import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def hand_dataset():
    """Three observations, one centered column; solvable by hand."""
    from postselect import Dataset

    return Dataset(y=[1.0, 1.0, -2.0], X=np.array([[1.0], [0.0], [-1.0]]))
