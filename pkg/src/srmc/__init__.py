"""Numerical tools for constant-mean-curvature intrinsic graphs in contact sub-Riemannian 3-manifolds."""

__version__ = "0.1.0"

from .chart import ChartPoint, HorizontalVec, MetricError, MetricField  # noqa: E402
from .fields import ParseError, ScalarField, parse  # noqa: E402
from .graph import BumpFunction, DomainError, ExprGraph, GraphDomain, GridGraph  # noqa: E402

__all__ = [
    "__version__",
    "BumpFunction",
    "ChartPoint",
    "DomainError",
    "ExprGraph",
    "GraphDomain",
    "GridGraph",
    "HorizontalVec",
    "MetricError",
    "MetricField",
    "ParseError",
    "ScalarField",
    "parse",
]
