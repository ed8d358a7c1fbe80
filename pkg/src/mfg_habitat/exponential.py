"""Exponential-utility mean-field equilibrium.

A representative agent with utility -exp(-y/beta) measures her consumption
rate against theta times the population habit path Zbar and her terminal
wealth against theta times the population average terminal wealth Xbar_T.
Given the benchmark pair (Zbar, Xbar_T) the best response is closed form:

    Pi*(t)    = beta (mu / sigma^2) (T + 1 - t)
    C*(t, x)  = (x - theta_term Xbar_T) / (T + 1 - t) + theta Zbar_t
                - theta / (T + 1 - t) * int_t^T Zbar ds
                + (beta / 4) (mu / sigma)^2 ((T + 1 - t) - 1 / (T + 1 - t))

and the value function is -exp(a(t) x + b(t)) with a(t) = -1/(beta (T+1-t)).

The equilibrium pair is the fixed point of the induced consistency map:
Xbar_T solves a linear equation once Zbar is known (the terminal condition
decouples), and Zbar solves a functional ODE driven by the population mean
consumption.  All integrals here use the shared trapezoid rule so that the
solver, the consistency audit, and the cohort simulator agree to solver
tolerance rather than to quadrature accuracy.

``theta`` weights the habit benchmark and ``theta_term`` the terminal
wealth benchmark; both equal the class competition weight unless the
class carries a terminal override.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GridPath, TimeGrid, cumtrapz, tail_cumtrapz
from .model import AgentClass, MarketParams, TypeDistribution


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"fixed-point iteration did not converge: residual {residual:.3e} after {iterations} iterations")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class ExpValueCoeffs:
    """Coefficients of the value function -exp(a(t) x + b(t)) at one time."""

    a: float
    b: float


@dataclass(frozen=True)
class ExpEquilibrium:
    zbar: GridPath
    xbar_T: float
    residual: float
    iterations: int


# ---------------------------------------------------------------------------
# path-level building blocks (vectorized over grid nodes)
# ---------------------------------------------------------------------------

def _inv_horizon(grid: TimeGrid) -> np.ndarray:
    """w_j = 1 / (T + 1 - t_j)."""
    return 1.0 / (grid.T + 1.0 - grid.nodes)


def _risk_factor(cls: AgentClass) -> float:
    """(mu / sigma)^2 * beta for one class."""
    return (cls.mu / cls.sigma) ** 2 * cls.risk


def mean_wealth_path(
    cls: AgentClass,
    params: MarketParams,
    grid: TimeGrid,
    zbar: np.ndarray,
    xbar_T: float,
    invest_scale: float = 1.0,
    consume_tilt: float = 0.0,
) -> np.ndarray:
    """Deterministic part of the optimal wealth path, E[X*_t] for one class.

    With ``invest_scale`` m and an additive consumption tilt the strategy
    (m Pi*, C* + tilt) stays deterministic-affine, so the same explicit
    solution applies; m = 1, tilt = 0 gives the candidate itself.
    """
    w = _inv_horizon(grid)
    tail = tail_cumtrapz(zbar, grid.dt)
    r = _risk_factor(cls)
    # (Pi mu - q(s)) / (T+1-s) with Pi = m Pi*, q the x-free part of C* + tilt
    integrand = (
        cls.theta * w**2 * tail
        + cls.theta_term * w**2 * xbar_T
        - cls.theta * w * zbar
        + 0.25 * r * w**2
        + (invest_scale - 0.25) * r
        - consume_tilt * w
    )
    horizon = grid.T + 1.0 - grid.nodes
    return horizon * (params.x0 / (grid.T + 1.0) + cumtrapz(integrand, grid.dt))


def consumption_at(
    cls: AgentClass,
    params: MarketParams,
    grid: TimeGrid,
    zbar: np.ndarray,
    xbar_T: float,
    wealth: np.ndarray,
) -> np.ndarray:
    """C*(t_j, wealth_j) along a wealth path (wealth may be an (m, N+1) array)."""
    w = _inv_horizon(grid)
    tail = tail_cumtrapz(zbar, grid.dt)
    r = _risk_factor(cls)
    base = (
        -cls.theta_term * xbar_T * w
        + cls.theta * zbar
        - cls.theta * w * tail
        + 0.25 * r * (grid.T + 1.0 - grid.nodes - w)
    )
    return wealth * w + base


def decoupled_xbar(dist: TypeDistribution, params: MarketParams, grid: TimeGrid, zbar: np.ndarray) -> float:
    """Average terminal wealth consistent with a given habit path.

    The terminal consistency Xbar_T = E_m[E[X*_T]] is linear in Xbar_T, so it
    is solved directly; discretized with the same trapezoid rule as the
    wealth paths, which makes the post-solve audit exact up to rounding.
    """
    w = _inv_horizon(grid)
    tail = tail_cumtrapz(zbar, grid.dt)
    s_w2 = cumtrapz(w**2, grid.dt)[-1]
    mean_theta_term = dist.mean(lambda c: c.theta_term)
    denom = 1.0 - mean_theta_term * s_w2
    assert denom > 0, "terminal consistency denominator must be positive (theta <= 1, T > 0)"
    const = params.x0 / (grid.T + 1.0)
    for cls, weight in zip(dist.classes, dist.weights):
        r = _risk_factor(cls)
        integrand = cls.theta * w**2 * tail - cls.theta * w * zbar + 0.25 * r * w**2 + 0.75 * r
        const += weight * cumtrapz(integrand, grid.dt)[-1]
    return const / denom


def mean_consumption_path(
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    zbar: np.ndarray,
    xbar_T: float,
) -> np.ndarray:
    """Population mean consumption E[C*(t, X*_t)] on the grid."""
    out = np.zeros(grid.n_nodes)
    for cls, weight in zip(dist.classes, dist.weights):
        f = mean_wealth_path(cls, params, grid, zbar, xbar_T)
        out += weight * consumption_at(cls, params, grid, zbar, xbar_T, f)
    return out


def phi_map(dist: TypeDistribution, params: MarketParams, grid: TimeGrid, zbar: np.ndarray) -> tuple[np.ndarray, float]:
    """One application of the consistency map Zbar -> habit path of E[C*].

    Returns (new habit path, the Xbar_T used).  The habit update integrates
    the linear habit ODE exactly against the mean consumption:
    Z(t) = exp(-delta t) (z0 + int_0^t delta exp(delta s) E[C*](s) ds).
    """
    xbar = decoupled_xbar(dist, params, grid, zbar)
    mean_c = mean_consumption_path(dist, params, grid, zbar, xbar)
    t = grid.nodes
    weighted = cumtrapz(params.delta * np.exp(params.delta * t) * mean_c, grid.dt)
    return np.exp(-params.delta * t) * (params.z0 + weighted), xbar


def solve(
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> ExpEquilibrium:
    """Picard iteration on the habit consistency map from Zbar ≡ z0.

    Stops when the sup-norm change drops below ``tol``; the reported
    residual audits both consistency conditions at the final iterate and
    must come out below 10 tol, otherwise the quadrature routes disagree
    and the result is rejected.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    params.validate("exponential")
    dist.validate("exponential")

    z = np.full(grid.n_nodes, params.z0)
    change = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z_next, _ = phi_map(dist, params, grid, z)
        change = float(np.max(np.abs(z_next - z)))
        z = z_next
        if change < tol:
            break

    z_audit, xbar = phi_map(dist, params, grid, z)
    residual = float(np.max(np.abs(z_audit - z)))
    # terminal consistency: Xbar_T against the class-average of E[X*_T]
    mean_f_T = sum(
        weight * mean_wealth_path(cls, params, grid, z, xbar)[-1]
        for cls, weight in zip(dist.classes, dist.weights)
    )
    residual += abs(xbar - mean_f_T)
    if change >= tol or residual >= 10.0 * tol:
        raise NonConvergence(iterations, residual)
    return ExpEquilibrium(zbar=GridPath(grid, z), xbar_T=xbar, residual=residual, iterations=iterations)


# ---------------------------------------------------------------------------
# pointwise operations (spec-facing, scalar t)
# ---------------------------------------------------------------------------

def _check_time(t: float, T: float) -> None:
    if not (0.0 <= t <= T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {T}]")


def _tail_integral_at(zbar: GridPath, t: float) -> float:
    """int_t^T Zbar ds for any t in [0, T]; exact for the piecewise-linear path."""
    grid = zbar.grid
    tail = tail_cumtrapz(zbar.values, grid.dt)
    j = min(int(t / grid.dt), grid.n_steps)
    frac = t - grid.nodes[j]
    if frac <= 0 or j == grid.n_steps:
        return float(tail[j])
    z_t = np.interp(t, grid.nodes, zbar.values)
    partial = 0.5 * frac * (zbar.values[j] + z_t)
    # subtract the consumed part of cell j from the tail at node j
    return float(tail[j] - partial)


def value_coeffs(
    t: float,
    cls: AgentClass,
    params: MarketParams,
    zbar: GridPath,
    xbar_T: float,
) -> ExpValueCoeffs:
    """Closed-form (a(t), b(t)) of the value function for one class."""
    _check_time(t, params.T)
    h = params.T + 1.0 - t
    beta = cls.risk
    a = -1.0 / (beta * h)
    tail = _tail_integral_at(zbar, t)
    b = (
        cls.theta_term * xbar_T / (beta * h)
        + cls.theta * tail / (beta * h)
        + math.log(h)
        - 0.25 * (cls.mu / cls.sigma) ** 2 * (h - 1.0 / h)
    )
    return ExpValueCoeffs(a=a, b=b)


def strategy(
    t: float,
    x: float,
    cls: AgentClass,
    params: MarketParams,
    zbar: GridPath,
    xbar_T: float,
) -> tuple[float, float]:
    """Optimal (investment amount, consumption rate) at time t and wealth x."""
    _check_time(t, params.T)
    h = params.T + 1.0 - t
    pi = cls.risk * cls.mu / cls.sigma**2 * h
    z_t = float(np.interp(t, zbar.grid.nodes, zbar.values))
    tail = _tail_integral_at(zbar, t)
    c = (
        (x - cls.theta_term * xbar_T) / h
        + cls.theta * z_t
        - cls.theta * tail / h
        + 0.25 * _risk_factor(cls) * (h - 1.0 / h)
    )
    return pi, c


def mean_consumption(
    t: float,
    dist: TypeDistribution,
    params: MarketParams,
    zbar: GridPath,
    xbar_T: float,
) -> float:
    """E[C*(t, X*_t)] at a grid node."""
    j = zbar.grid.index_of(t)
    return float(mean_consumption_path(dist, params, zbar.grid, zbar.values, xbar_T)[j])


def g_source(t: float, zbar: GridPath, dist: TypeDistribution, params: MarketParams) -> float:
    """Habit-ODE source G(t, Zbar) = E[C*] - E[theta] Zbar_t at a grid node.

    Evaluated with Xbar_T already eliminated through its linear consistency
    equation, which is how the decoupled habit ODE is driven.
    """
    grid = zbar.grid
    j = grid.index_of(t)
    xbar = decoupled_xbar(dist, params, grid, zbar.values)
    mean_c = mean_consumption_path(dist, params, grid, zbar.values, xbar)
    mean_theta = dist.mean(lambda c: c.theta)
    return float(mean_c[j] - mean_theta * zbar.values[j])


def phi(zbar: GridPath, dist: TypeDistribution, params: MarketParams) -> GridPath:
    """The habit consistency map as a GridPath operation."""
    out, _ = phi_map(dist, params, zbar.grid, zbar.values)
    return GridPath(zbar.grid, out)


def mean_wealth(
    t: float,
    cls: AgentClass,
    params: MarketParams,
    zbar: GridPath,
    xbar_T: float,
) -> float:
    """E[X*_t] for one class at a grid node."""
    j = zbar.grid.index_of(t)
    return float(mean_wealth_path(cls, params, zbar.grid, zbar.values, xbar_T)[j])
