"""Mean-field equilibria for competitive investment-consumption games with
external habit benchmarks, plus n-agent Monte Carlo verification."""

from .grids import GridPath, TimeGrid, cumulative_tail_integral, trapezoid_integral
from .model import AgentClass, MarketParams, Regime, TypeDistribution, ValidationError

__all__ = [
    "AgentClass",
    "GridPath",
    "MarketParams",
    "Regime",
    "TimeGrid",
    "TypeDistribution",
    "ValidationError",
    "cumulative_tail_integral",
    "trapezoid_integral",
]
