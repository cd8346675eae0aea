import numpy as np
import pytest

from assr import make_dictionary, make_sparse_code, synthesize


@pytest.fixture
def small_problem():
    d = make_dictionary(10, 20, seed=3)
    code = make_sparse_code(20, 0.2, seed=4)
    return synthesize(d, code)


@pytest.fixture
def tiny_problem():
    # two overlapping unit atoms, one active coefficient
    atoms = np.array([[1.0, 0.6], [0.0, 0.8]])
    from assr import Dictionary
    return synthesize(Dictionary(atoms), np.array([0.9, 0.0]))
