"""Shared parameter model: market constants, agent classes, type distribution.

Two utility regimes are supported.  In the exponential regime the risk
parameter of a class is the risk tolerance ``beta > 0`` and wealth may take
any sign; in the power regime it is the curvature ``p in (0, 1)`` and both
initial wealth and all simulated wealths must stay positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

WEIGHT_TOL = 1e-12


class Regime:
    EXPONENTIAL = "exponential"
    POWER = "power"
    ALL = (EXPONENTIAL, POWER)


class ValidationError(ValueError):
    """A parameter failed its domain check; the message names the field."""


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ValidationError(f"{field_name}: {message}")


@dataclass(frozen=True)
class MarketParams:
    """Horizon and the class-independent initial conditions.

    ``delta`` is the habit persistence rate of dZ = -delta (Z - C) dt.
    ``delta = 0`` is admitted as a degenerate testing extension (frozen
    habit); the model itself assumes delta > 0.
    """

    T: float
    delta: float
    x0: float
    z0: float

    def validate(self, regime: str) -> None:
        _require(self.T > 0, "market.T", "horizon must be > 0")
        _require(self.delta >= 0, "market.delta", "habit persistence must be >= 0")
        _require(self.z0 > 0, "market.z0", "initial habit must be > 0")
        if regime == Regime.POWER:
            _require(self.x0 > 0, "market.x0", "initial wealth must be > 0 in the power regime")


@dataclass(frozen=True)
class AgentClass:
    """One type vector: market exposure plus preference parameters.

    ``risk`` is beta (exponential) or p (power) depending on the regime.
    ``theta`` weights the habit benchmark in the running utility;
    ``terminal_theta`` weights the average-wealth benchmark in the terminal
    utility and defaults to ``theta``.  Setting it to 0 switches off the
    relative wealth concern while keeping habit competition (used by the
    with/without-wealth-concern comparison presets).  ``theta = 0`` is a
    testing extension; the model proper takes theta in (0, 1].
    """

    mu: float
    sigma: float
    risk: float
    theta: float
    terminal_theta: float | None = None

    @property
    def theta_term(self) -> float:
        return self.theta if self.terminal_theta is None else self.terminal_theta

    def validate(self, regime: str, label: str = "class") -> None:
        _require(self.mu > 0, f"{label}.mu", "drift must be > 0")
        _require(self.sigma > 0, f"{label}.sigma", "volatility must be > 0")
        _require(0.0 <= self.theta <= 1.0, f"{label}.theta", "competition weight must be in [0, 1]")
        _require(
            0.0 <= self.theta_term <= 1.0,
            f"{label}.terminal_theta",
            "terminal competition weight must be in [0, 1]",
        )
        if regime == Regime.EXPONENTIAL:
            _require(self.risk > 0, f"{label}.risk", "beta must be > 0 in the exponential regime")
        elif regime == Regime.POWER:
            _require(
                0.0 < self.risk < 1.0,
                f"{label}.risk",
                "p must be in (0, 1) in the power regime",
            )
        else:
            raise ValidationError(f"regime: unknown regime {regime!r}")


@dataclass(frozen=True)
class TypeDistribution:
    """Finite class list with limiting weights F({k})."""

    classes: tuple[AgentClass, ...]
    weights: tuple[float, ...]

    def __init__(self, classes, weights):
        object.__setattr__(self, "classes", tuple(classes))
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def validate(self, regime: str) -> None:
        _require(len(self.classes) >= 1, "distribution.classes", "need at least one class")
        _require(
            len(self.classes) == len(self.weights),
            "distribution.weights",
            "weights and classes must have equal length",
        )
        for w in self.weights:
            _require(w >= 0, "distribution.weights", "weights must be nonnegative")
        _require(
            abs(sum(self.weights) - 1.0) <= WEIGHT_TOL,
            "distribution.weights",
            f"weights must sum to 1 within {WEIGHT_TOL}",
        )
        for k, cls in enumerate(self.classes):
            cls.validate(regime, label=f"class[{k}]")

    def mean(self, fn) -> float:
        """Expectation over the type law of a per-class functional."""
        return sum(w * fn(c) for c, w in zip(self.classes, self.weights))


def homogeneous(cls: AgentClass) -> TypeDistribution:
    return TypeDistribution(classes=(cls,), weights=(1.0,))
