"""Metamorphic-testing harness for stochastic trajectory predictors."""

from .core import (
    DEFAULT_RESCALE_FACTOR,
    MtrajError,
    Point2,
    PredictionSet,
    RunConfig,
    Scene,
    TestCase,
    Trajectory,
    make_test_case,
)
from .harness import (
    SutHandle,
    SuiteReport,
    TestCaseReport,
    run_suite,
    run_test_case,
)
from .ot import ground_distance, solve_assignment, wasserstein
from .transforms import MetamorphicRelation, transform_input

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RESCALE_FACTOR",
    "MetamorphicRelation",
    "MtrajError",
    "Point2",
    "PredictionSet",
    "RunConfig",
    "Scene",
    "SutHandle",
    "SuiteReport",
    "TestCase",
    "TestCaseReport",
    "Trajectory",
    "ground_distance",
    "make_test_case",
    "run_suite",
    "run_test_case",
    "solve_assignment",
    "transform_input",
    "wasserstein",
]
