"""Geodesics, covariant derivatives and Finsler lengths on graded-seminorm
model spaces, with a problem catalog and a CLI (`gradedgeo`)."""

__version__ = "0.1.0"

from .spaces import (  # noqa: F401
    GradedSeminormSpace,
    GradingReport,
    LinearOperatorSample,
    check_grading,
    lipschitz_gap,
    model_metric,
    seminorm,
)
