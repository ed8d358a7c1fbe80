"""Scenario configuration: a JSON file fully validated before any compute."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import AgentClass, MarketParams, Regime, TypeDistribution, ValidationError

SWEEPABLE = ("p", "delta", "theta", "z0", "x0")
# terminal_theta is reserved for the preset runner (with/without wealth concern)
INTERNAL_SWEEPABLE = SWEEPABLE + ("terminal_theta", "beta")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 10_000
    damping: float = 0.5

    def validate(self) -> None:
        if not (self.tol > 0):
            raise ValidationError(f"solver.tol: must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValidationError(f"solver.max_iter: must be >= 1, got {self.max_iter}")
        if not (0 < self.damping <= 1):
            raise ValidationError(f"solver.damping: must be in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class SimulationConfig:
    n_values: tuple[int, ...] = (16, 64, 256)
    replications: int = 64
    seed: int = 20240801

    def validate(self) -> None:
        if len(self.n_values) < 1 or any(n < 1 for n in self.n_values):
            raise ValidationError(f"simulation.n_values: need positive entries, got {self.n_values}")
        if list(self.n_values) != sorted(set(self.n_values)):
            raise ValidationError("simulation.n_values: must be strictly increasing")
        if self.replications < 1:
            raise ValidationError(f"simulation.replications: must be >= 1, got {self.replications}")
        if self.seed < 0:
            raise ValidationError(f"simulation.seed: must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class ScenarioConfig:
    regime: str
    market: MarketParams
    distribution: TypeDistribution
    n_steps: int = 1000
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    outputs: str = "out"

    def validate(self) -> None:
        if self.regime not in Regime.ALL:
            raise ValidationError(f"regime: must be one of {Regime.ALL}, got {self.regime!r}")
        if self.n_steps < 2:
            raise ValidationError(f"grid.n_steps: must be >= 2, got {self.n_steps}")
        self.market.validate(self.regime)
        self.distribution.validate(self.regime)
        self.solver.validate()
        self.simulation.validate()

    def with_overrides(self, **kw) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def with_swept(self, param: str, value: float) -> "ScenarioConfig":
        """New config with one market/class parameter replaced."""
        from dataclasses import replace

        if param not in INTERNAL_SWEEPABLE:
            raise ValidationError(f"sweep.param: must be one of {SWEEPABLE}, got {param!r}")
        if param in ("delta", "z0", "x0"):
            market = replace(self.market, **{param: value})
            return replace(self, market=market)
        per_class = {"p": "risk", "beta": "risk", "theta": "theta", "terminal_theta": "terminal_theta"}[param]
        classes = tuple(replace(c, **{per_class: value}) for c in self.distribution.classes)
        return replace(self, distribution=TypeDistribution(classes, self.distribution.weights))


def _field(obj: dict, key: str, kind, where: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ValidationError(f"{where}.{key}: missing required field")
        return default
    value = obj[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}.{key}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be an object")
    regime = _field(data, "regime", str, "config", required=True)

    market_obj = data.get("market")
    if not isinstance(market_obj, dict):
        raise ValidationError("market: missing or not an object")
    market = MarketParams(
        T=_field(market_obj, "T", float, "market", required=True),
        delta=_field(market_obj, "delta", float, "market", required=True),
        x0=_field(market_obj, "x0", float, "market", required=True),
        z0=_field(market_obj, "z0", float, "market", required=True),
    )

    classes_obj = data.get("classes")
    if not isinstance(classes_obj, list) or not classes_obj:
        raise ValidationError("classes: need a nonempty list")
    classes = []
    for k, c in enumerate(classes_obj):
        where = f"classes[{k}]"
        if not isinstance(c, dict):
            raise ValidationError(f"{where}: must be an object")
        classes.append(
            AgentClass(
                mu=_field(c, "mu", float, where, required=True),
                sigma=_field(c, "sigma", float, where, required=True),
                risk=_field(c, "risk", float, where, required=True),
                theta=_field(c, "theta", float, where, required=True),
                terminal_theta=_field(c, "terminal_theta", float, where),
            )
        )
    weights = data.get("weights", [1.0] if len(classes) == 1 else None)
    if weights is None:
        raise ValidationError("weights: required when more than one class is given")
    dist = TypeDistribution(classes, weights)

    solver_obj = data.get("solver", {})
    solver = SolverConfig(
        tol=_field(solver_obj, "tol", float, "solver", default=1e-10),
        max_iter=_field(solver_obj, "max_iter", int, "solver", default=10_000),
        damping=_field(solver_obj, "damping", float, "solver", default=0.5),
    )
    sim_obj = data.get("simulation", {})
    n_values = tuple(int(n) for n in sim_obj.get("n_values", (16, 64, 256)))
    sim = SimulationConfig(
        n_values=n_values,
        replications=_field(sim_obj, "replications", int, "simulation", default=64),
        seed=_field(sim_obj, "seed", int, "simulation", default=20240801),
    )
    grid_obj = data.get("grid", {})
    cfg = ScenarioConfig(
        regime=regime,
        market=market,
        distribution=dist,
        n_steps=_field(grid_obj, "n_steps", int, "grid", default=1000),
        solver=solver,
        simulation=sim,
        outputs=_field(data, "outputs", str, "config", default="out"),
    )
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config: invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)
