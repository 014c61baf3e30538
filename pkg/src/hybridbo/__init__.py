"""Mixed categorical/continuous Bayesian optimization.

A Monte Carlo tree searches the categorical variables, a single Gaussian
process models all variables, and the surrogate kernel is re-selected every
iteration with a rank-based criterion.
"""

from .core import (
    Direction,
    EffectiveKind,
    Encoding,
    MixedPoint,
    ProblemSpec,
    SampleHistory,
    VariableSpec,
    classify_integer_variable,
    encode_categorical,
    generate_pilots,
)
from .kernels import DEFAULT_KERNELS, KernelParams, KernelSpec
from .optimizer import HybridOptimizer, RunConfig, RunTrace, run
from .selection import Criterion

__all__ = [
    "DEFAULT_KERNELS",
    "Criterion",
    "Direction",
    "EffectiveKind",
    "Encoding",
    "HybridOptimizer",
    "KernelParams",
    "KernelSpec",
    "MixedPoint",
    "ProblemSpec",
    "RunConfig",
    "RunTrace",
    "SampleHistory",
    "VariableSpec",
    "classify_integer_variable",
    "encode_categorical",
    "generate_pilots",
    "run",
]

__version__ = "0.1.0"
