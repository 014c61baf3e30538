import numpy as np
import pytest

from hybridbo.core import ProblemSpec, VariableSpec


@pytest.fixture
def mixed_problem():
    return ProblemSpec(
        [
            VariableSpec.categorical("color", ["a", "b", "c"]),
            VariableSpec.continuous("t", 0.0, 5.0),
            VariableSpec.integer("k", 0, 2),
            VariableSpec.integer("m", 0, 99),
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
