"""Named scenario presets with the sensitivity-study constants baked in.

All presets are power-regime, homogeneous unless noted, on T = 1 with
mu = sigma = 0.2.  fig1/fig2/fig3 sweep the risk curvature p, the habit
persistence delta, and the competition weight theta over low and high
initial-habit configurations; fig4 is the two-class heterogeneous case;
the fig5 pair compares with/without the relative wealth concern via the
terminal_theta override.  Exponential analogues reuse the same constants
with beta in place of p.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ScenarioConfig
from .model import AgentClass, MarketParams, TypeDistribution


@dataclass(frozen=True)
class Preset:
    name: str
    base: ScenarioConfig
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()


def _homog(p: float, theta: float, delta: float, x0: float, z0: float) -> ScenarioConfig:
    return ScenarioConfig(
        regime="power",
        market=MarketParams(T=1.0, delta=delta, x0=x0, z0=z0),
        distribution=TypeDistribution([AgentClass(mu=0.2, sigma=0.2, risk=p, theta=theta)], [1.0]),
    )


PRESETS: dict[str, Preset] = {
    "fig1-low": Preset("fig1-low", _homog(0.3, 1.0, 0.1, 5.0, 1.0), "p", (0.2, 0.3, 0.5)),
    "fig1-high": Preset("fig1-high", _homog(0.3, 1.0, 0.1, 5.0, 10.0), "p", (0.2, 0.3, 0.5, 0.8)),
    "fig2-low": Preset("fig2-low", _homog(0.3, 1.0, 0.1, 5.0, 1.0), "delta", (0.1, 0.3, 0.5)),
    "fig2-high": Preset("fig2-high", _homog(0.8, 1.0, 0.1, 8.0, 10.0), "delta", (0.1, 0.3, 0.5)),
    "fig3-low": Preset("fig3-low", _homog(0.3, 1.0, 0.1, 5.0, 1.0), "theta", (0.5, 0.8, 1.0)),
    "fig3-high": Preset("fig3-high", _homog(0.3, 1.0, 0.1, 5.0, 10.0), "theta", (0.5, 0.8, 1.0)),
    "fig4-hetero": Preset(
        "fig4-hetero",
        ScenarioConfig(
            regime="power",
            market=MarketParams(T=1.0, delta=0.1, x0=5.0, z0=1.0),
            distribution=TypeDistribution(
                [
                    AgentClass(mu=0.2, sigma=0.2, risk=0.2, theta=1.0),
                    AgentClass(mu=0.4, sigma=0.2, risk=0.5, theta=1.0),
                ],
                [0.7, 0.3],
            ),
        ),
    ),
    # with/without relative wealth concern: the "without" leg zeroes the
    # terminal competition weight while keeping habit competition
    "fig5-highwealth": Preset("fig5-highwealth", _homog(0.5, 1.0, 0.1, 10.0, 5.0), "terminal_theta", (1.0, 0.0)),
    "fig5-lowwealth": Preset("fig5-lowwealth", _homog(0.5, 1.0, 0.1, 1.0, 5.0), "terminal_theta", (1.0, 0.0)),
}


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


def exp_analogue(p: Preset) -> Preset:
    """Exponential-regime analogue of a preset: beta takes the value of p."""
    from dataclasses import replace

    base = replace(p.base, regime="exponential")
    sweep = "beta" if p.sweep_param == "p" else p.sweep_param
    return Preset(name=f"{p.name}-exp", base=base, sweep_param=sweep, sweep_values=p.sweep_values)
