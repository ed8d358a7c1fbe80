"""n-agent cohort simulation under the candidate strategies.

The candidate strategy substitutes the mean-field benchmark pair
(Zbar, Xbar_T) into each agent's closed-form best response.  Wealth paths
are simulated from the explicit solutions (no Euler discretization), so the
only numerical error besides Monte Carlo noise is the shared trapezoid
quadrature.  Per-agent noise comes from counter-based streams keyed by
(seed, replication, agent), which makes every statistic reproducible and
independent of scheduling.

The module measures how fast the empirical cohort averages converge to the
mean-field benchmarks as n grows, and probes the approximate-Nash property
by letting one agent deviate inside a finite strategy family under common
random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import exponential, power, rng
from .grids import GridPath, TimeGrid, cumtrapz
from .model import MarketParams, Regime, TypeDistribution


@dataclass(frozen=True)
class ClassAssignment:
    """Deterministic class labels for n agents, sorted by class index."""

    labels: np.ndarray
    empirical_weights: np.ndarray
    epsilon_n: float

    @property
    def n(self) -> int:
        return len(self.labels)


def assign_classes(n: int, dist: TypeDistribution) -> ClassAssignment:
    """Largest-remainder rounding of n F({k}) to integer class counts.

    Base counts are floor(n F_k); leftover agents go to classes in
    descending fractional-part order (ties broken by class index), which
    keeps eps_n = max_k |F_n({k}) - F({k})| below K / n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    target = np.array([n * w for w in dist.weights])
    counts = np.floor(target).astype(int)
    fractional = target - counts
    # stable argsort on (-fraction, index)
    order = sorted(range(dist.n_classes), key=lambda k: (-fractional[k], k))
    for k in order[: n - counts.sum()]:
        counts[k] += 1
    labels = np.repeat(np.arange(dist.n_classes), counts)
    empirical = counts / n
    eps = float(np.max(np.abs(empirical - np.asarray(dist.weights))))
    return ClassAssignment(labels=labels, empirical_weights=empirical, epsilon_n=eps)


def _increments_matrix(
    n: int, n_steps: int, seed: int, replication: int, increments: np.ndarray | None
) -> np.ndarray:
    if increments is not None:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (n, n_steps):
            raise ValueError(f"increments must have shape {(n, n_steps)}")
        return increments
    out = np.empty((n, n_steps))
    for i in range(n):
        out[i] = rng.normal_increments(seed, replication, i, n_steps)
    return out


def _brownian(increments: np.ndarray, dt: float) -> np.ndarray:
    n = increments.shape[0]
    w = np.empty((n, increments.shape[1] + 1))
    w[:, 0] = 0.0
    np.cumsum(np.sqrt(dt) * increments, axis=1, out=w[:, 1:])
    return w


@dataclass(frozen=True)
class Cohort:
    """One simulated cohort: empirical benchmark paths plus optional paths."""

    zbar_n: np.ndarray          # empirical mean habit path
    xbar_n_T: float             # empirical terminal benchmark (mean or geometric mean)
    wealth: np.ndarray | None = None        # (n, N+1) on demand
    consumption: np.ndarray | None = None   # (n, N+1) rates C or spending cX


def simulate_exp_cohort(
    assignment: ClassAssignment,
    dist: TypeDistribution,
    eq: exponential.ExpEquilibrium,
    params: MarketParams,
    grid: TimeGrid,
    seed: int,
    replication: int,
    keep_paths: bool = False,
    increments: np.ndarray | None = None,
) -> Cohort:
    """Exponential-regime cohort under the candidate strategies.

    Wealth is exact in distribution:
    X*_t = f_k(t) + (T+1-t) (mu_k/sigma_k) beta_k W_t.
    """
    if grid is not eq.zbar.grid and grid != eq.zbar.grid:
        raise ValueError("grid mismatch between equilibrium and simulation")
    n = assignment.n
    xi = _increments_matrix(n, grid.n_steps, seed, replication, increments)
    w_paths = _brownian(xi, grid.dt)

    zvals, xbar = eq.zbar.values, eq.xbar_T
    horizon = grid.T + 1.0 - grid.nodes
    wealth = np.empty((n, grid.n_nodes))
    consumption = np.empty((n, grid.n_nodes))
    for k, cls in enumerate(dist.classes):
        rows = assignment.labels == k
        if not rows.any():
            continue
        drift = exponential.mean_wealth_path(cls, params, grid, zvals, xbar)
        vol = cls.mu / cls.sigma * cls.risk
        wealth[rows] = drift + horizon * vol * w_paths[rows]
        consumption[rows] = exponential.consumption_at(cls, params, grid, zvals, xbar, wealth[rows])

    mean_c = consumption.mean(axis=0)
    t = grid.nodes
    zbar_n = np.exp(-params.delta * t) * (
        params.z0 + cumtrapz(params.delta * np.exp(params.delta * t) * mean_c, grid.dt)
    )
    return Cohort(
        zbar_n=zbar_n,
        xbar_n_T=float(wealth[:, -1].mean()),
        wealth=wealth if keep_paths else None,
        consumption=consumption if keep_paths else None,
    )


def simulate_power_cohort(
    assignment: ClassAssignment,
    dist: TypeDistribution,
    eq: power.PowerEquilibrium,
    params: MarketParams,
    grid: TimeGrid,
    seed: int,
    replication: int,
    keep_paths: bool = False,
    increments: np.ndarray | None = None,
) -> Cohort:
    """Power-regime cohort; X*_t = x0 exp(drift_k(t) + pi_k sigma_k W_t).

    xbar_n_T is the geometric mean, computed through mean log wealth.
    consumption (when kept) holds the spending rates c*_k(t) X^i_t.
    """
    if grid is not eq.zbar.grid and grid != eq.zbar.grid:
        raise ValueError("grid mismatch between equilibrium and simulation")
    n = assignment.n
    xi = _increments_matrix(n, grid.n_steps, seed, replication, increments)
    w_paths = _brownian(xi, grid.dt)
    cp = power.class_paths(eq, dist, params)

    log_wealth = np.empty((n, grid.n_nodes))
    spending = np.empty((n, grid.n_nodes))
    for k, cls in enumerate(dist.classes):
        rows = assignment.labels == k
        if not rows.any():
            continue
        log_wealth[rows] = (
            math.log(params.x0) + cp.log_drift[k] + cp.pi_star[k] * cls.sigma * w_paths[rows]
        )
        spending[rows] = cp.c_frac[k] * np.exp(log_wealth[rows])

    mean_spend = spending.mean(axis=0)
    t = grid.nodes
    zbar_n = np.exp(-params.delta * t) * (
        params.z0 + cumtrapz(params.delta * np.exp(params.delta * t) * mean_spend, grid.dt)
    )
    return Cohort(
        zbar_n=zbar_n,
        xbar_n_T=float(np.exp(log_wealth[:, -1].mean())),
        wealth=np.exp(log_wealth) if keep_paths else None,
        consumption=spending if keep_paths else None,
    )


# ---------------------------------------------------------------------------
# convergence-rate estimation
# ---------------------------------------------------------------------------

def fit_loglog_slope(n_values, errors) -> tuple[float, float] | None:
    """OLS slope of log(error) on log(n) with its standard error.

    Returns None when the regression is degenerate (a nonpositive error
    makes the log undefined; exact matches are reported by the caller).
    """
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        return None
    x, y = np.log(n_values), np.log(errors)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y / sxx)
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    stderr = float(np.sqrt(resid @ resid / dof / sxx)) if dof > 0 else float("nan")
    return slope, stderr


@dataclass
class SimReport:
    """Per-n Monte Carlo error statistics with fitted log-log slopes."""

    n_values: list[int]
    sup_z_mse: list[float]
    x_mse: list[float]
    x_gamma_mse: list[float] | None
    gap_estimates: list[float] | None
    slope: float | None
    slope_stderr: float | None
    extra_slopes: dict = field(default_factory=dict)
    exact_match: bool = False


def _solve_equilibrium(regime, dist, params, grid, tol=1e-11):
    if regime == Regime.EXPONENTIAL:
        return exponential.solve(dist, params, grid, tol=tol)
    return power.solve(dist, params, grid, tol=max(tol, 1e-11))


def convergence_study(
    regime: str,
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    n_values,
    replications: int = 64,
    seed: int = 0,
    threads: int = 1,
    include_gaps: bool = False,
    gap_deviations=None,
    eq=None,
) -> SimReport:
    """Estimate sup_t E|Zbar_n - Zbar|^2 and E|Xbar_n - Xbar|^2 per n.

    The expectation is a plain average over ``replications`` independent
    cohorts; the sup runs over grid nodes.  In the power regime the
    gamma-transformed terminal error E|Xbar_n^gamma - Xbar^gamma|^2 with
    gamma = -theta_k p_k is tracked as a class-weighted average.  Slopes
    come from OLS in log-log space.
    """
    n_values = sorted({int(n) for n in n_values})
    if len(n_values) < 3:
        raise ValueError("need at least 3 distinct n values")
    if replications < 30:
        raise ValueError("need at least 30 replications")
    if eq is None:
        eq = _solve_equilibrium(regime, dist, params, grid)
    zbar, xbar = eq.zbar.values, eq.xbar_T
    simulate = simulate_exp_cohort if regime == Regime.EXPONENTIAL else simulate_power_cohort
    gammas = np.array([-c.theta * c.risk for c in dist.classes])
    weights = np.asarray(dist.weights)

    sup_z, x_mse, xg_mse, gaps = [], [], [], []
    for n in n_values:
        assignment = assign_classes(n, dist)

        def one_rep(r: int):
            c = simulate(assignment, dist, eq, params, grid, seed, r)
            return c.zbar_n, c.xbar_n_T

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one_rep, range(replications)))
        else:
            results = [one_rep(r) for r in range(replications)]
        z_paths = np.array([zr for zr, _ in results])
        x_terms = np.array([xr for _, xr in results])

        sq_err = (z_paths - zbar) ** 2
        sup_z.append(float(sq_err.mean(axis=0).max()))
        x_mse.append(float(((x_terms - xbar) ** 2).mean()))
        if regime == Regime.POWER:
            per_class = [
                float((((x_terms**g) - xbar**g) ** 2).mean()) for g in gammas
            ]
            xg_mse.append(float(weights @ per_class))
        if include_gaps:
            probe = nash_gap_probe(
                regime, dist, params, grid, eq, n,
                deviations=gap_deviations, replications=min(replications, 32), seed=seed,
            )
            gaps.append(probe.max_gap)

    fit = fit_loglog_slope(n_values, sup_z)
    report = SimReport(
        n_values=n_values,
        sup_z_mse=sup_z,
        x_mse=x_mse,
        x_gamma_mse=xg_mse if regime == Regime.POWER else None,
        gap_estimates=gaps if include_gaps else None,
        slope=fit[0] if fit else None,
        slope_stderr=fit[1] if fit else None,
        exact_match=fit is None,
    )
    for name, series in (("x_mse", x_mse), ("x_gamma_mse", xg_mse or None)):
        if series:
            f = fit_loglog_slope(n_values, series)
            if f:
                report.extra_slopes[name] = {"slope": f[0], "stderr": f[1]}
    return report


# ---------------------------------------------------------------------------
# objectives and the deviation probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    """A perturbed candidate: investment scaled, consumption tilted.

    invest_scale multiplies the candidate investment control.  The tilt is
    additive in units of the candidate's own typical consumption in the
    exponential regime, and multiplicative (c* (1 + tilt)) in the power
    regime, keeping fractions nonnegative for tilt >= -1.
    """

    invest_scale: float = 1.0
    consume_tilt: float = 0.0

    @property
    def is_candidate(self) -> bool:
        return self.invest_scale == 1.0 and self.consume_tilt == 0.0


DEFAULT_DEVIATIONS = tuple(
    Deviation(m, tau)
    for m in (0.5, 0.8, 1.0, 1.25, 2.0)
    for tau in (-0.2, -0.1, 0.0, 0.1, 0.2)
)


def exp_running_utility(args: np.ndarray, beta: float, grid: TimeGrid) -> np.ndarray:
    """Trapezoid of -exp(-y/beta) over [0, T] along rows of args."""
    u = -np.exp(-np.asarray(args) / beta)
    return cumtrapz(u.T, grid.dt).T[..., -1] if u.ndim > 1 else cumtrapz(u, grid.dt)[-1]


def power_running_utility(args: np.ndarray, p: float, grid: TimeGrid) -> np.ndarray:
    """Trapezoid of y^p / p over [0, T] along rows of args; y must be > 0."""
    args = np.asarray(args)
    bad = int(np.sum(np.any(args <= 0, axis=-1))) if args.ndim > 1 else int(np.any(args <= 0))
    if bad:
        raise ValueError(f"nonpositive utility argument on {bad} path(s)")
    u = args**p / p
    return cumtrapz(u.T, grid.dt).T[..., -1] if u.ndim > 1 else cumtrapz(u, grid.dt)[-1]


def _exp_agent_paths(cls, params, grid, zbar, xbar, dev: Deviation, w_paths: np.ndarray, tilt_scale: float):
    """Wealth and consumption of one exponential-regime agent under a deviation."""
    tilt = dev.consume_tilt * tilt_scale
    drift = exponential.mean_wealth_path(
        cls, params, grid, zbar, xbar, invest_scale=dev.invest_scale, consume_tilt=tilt
    )
    horizon = grid.T + 1.0 - grid.nodes
    vol = dev.invest_scale * cls.mu / cls.sigma * cls.risk
    wealth = drift + horizon * vol * w_paths
    cons = exponential.consumption_at(cls, params, grid, zbar, xbar, wealth) + tilt
    return wealth, cons


def _power_agent_paths(cls, params, grid, cfrac_k, w_paths, dev: Deviation):
    """Wealth and spending of one power-regime agent under a deviation."""
    pi = dev.invest_scale * cls.mu / ((1.0 - cls.risk) * cls.sigma**2)
    c_dev = (1.0 + dev.consume_tilt) * cfrac_k
    drift = cumtrapz(np.full(grid.n_nodes, pi * cls.mu - 0.5 * cls.sigma**2 * pi**2) - c_dev, grid.dt)
    log_wealth = math.log(params.x0) + drift + pi * cls.sigma * w_paths
    wealth = np.exp(log_wealth)
    return wealth, c_dev * wealth, log_wealth


def _exp_tilt_scale(cls, params, grid, zbar, xbar) -> float:
    """Typical candidate consumption: time average of C*(t, E[X*_t])."""
    f = exponential.mean_wealth_path(cls, params, grid, zbar, xbar)
    c = exponential.consumption_at(cls, params, grid, zbar, xbar, f)
    return abs(cumtrapz(c, grid.dt)[-1]) / grid.T


def estimate_objective(
    regime: str,
    cls_index: int,
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    eq,
    deviation: Deviation,
    zbar_bench: np.ndarray,
    xbar_bench: float,
    replications: int,
    seed: int,
    agent: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of one agent's objective.

    The agent plays the (possibly deviated) candidate of class
    ``cls_index`` and is scored against the *fixed* benchmark pair
    (zbar_bench, xbar_bench) — e.g. the mean-field benchmarks.
    """
    cls = dist.classes[cls_index]
    zbar, xbar = eq.zbar.values, eq.xbar_T
    vals = np.empty(replications)
    if regime == Regime.EXPONENTIAL:
        tilt_scale = _exp_tilt_scale(cls, params, grid, zbar, xbar)
        for r in range(replications):
            w = _brownian(rng.normal_increments(seed, r, agent, grid.n_steps)[None, :], grid.dt)[0]
            wealth, cons = _exp_agent_paths(cls, params, grid, zbar, xbar, deviation, w, tilt_scale)
            running = exp_running_utility(cons - cls.theta * zbar_bench, cls.risk, grid)
            terminal = -math.exp(-(wealth[-1] - cls.theta_term * xbar_bench) / cls.risk)
            vals[r] = running + terminal
    else:
        cp = power.class_paths(eq, dist, params)
        p = cls.risk
        for r in range(replications):
            w = _brownian(rng.normal_increments(seed, r, agent, grid.n_steps)[None, :], grid.dt)[0]
            _, spend, logw = _power_agent_paths(cls, params, grid, cp.c_frac[cls_index], w, deviation)
            running = power_running_utility(spend / zbar_bench**cls.theta, p, grid)
            terminal = math.exp(p * logw[-1]) / (p * xbar_bench ** (cls.theta_term * p))
            vals[r] = running + terminal
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replications))


@dataclass(frozen=True)
class GapProbe:
    deviations: tuple[Deviation, ...]
    gaps: np.ndarray            # replication-averaged J(dev) - J(candidate)
    max_gap: float              # max over the family (candidate included, so >= 0)


def nash_gap_probe(
    regime: str,
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    eq,
    n: int,
    deviations=None,
    replications: int = 32,
    seed: int = 0,
) -> GapProbe:
    """Deviation gains of agent 0 against the empirical cohort benchmark.

    Agents 1..n-1 stay on the candidate; agent 0 tries each family member
    with the same Brownian path (common random numbers), so the candidate
    itself scores a gap of exactly zero.
    """
    deviations = tuple(deviations) if deviations is not None else DEFAULT_DEVIATIONS
    assignment = assign_classes(n, dist)
    cls_index = int(assignment.labels[0])
    cls = dist.classes[cls_index]
    zbar, xbar = eq.zbar.values, eq.xbar_T
    t = grid.nodes
    decay = np.exp(-params.delta * t)
    growth = params.delta * np.exp(params.delta * t)
    is_exp = regime == Regime.EXPONENTIAL

    if is_exp:
        tilt_scale = _exp_tilt_scale(cls, params, grid, zbar, xbar)
    else:
        cp = power.class_paths(eq, dist, params)

    gaps = np.zeros(len(deviations))
    for r in range(replications):
        cohort = (simulate_exp_cohort if is_exp else simulate_power_cohort)(
            assignment, dist, eq, params, grid, seed, r, keep_paths=True
        )
        # aggregates over agents 1..n-1 (candidate players)
        if is_exp:
            others_c = cohort.consumption[1:].sum(axis=0)
            others_x_T = cohort.wealth[1:, -1].sum()
        else:
            others_c = cohort.consumption[1:].sum(axis=0)   # spending rates
            others_logx_T = np.log(cohort.wealth[1:, -1]).sum()
        w0 = _brownian(rng.normal_increments(seed, r, 0, grid.n_steps)[None, :], grid.dt)[0]

        j_vals = np.empty(len(deviations))
        for d, dev in enumerate(deviations):
            if is_exp:
                wealth, cons = _exp_agent_paths(cls, params, grid, zbar, xbar, dev, w0, tilt_scale)
                z_n = decay * (params.z0 + cumtrapz(growth * (others_c + cons) / n, grid.dt))
                x_n = (others_x_T + wealth[-1]) / n
                running = exp_running_utility(cons - cls.theta * z_n, cls.risk, grid)
                terminal = -math.exp(-(wealth[-1] - cls.theta_term * x_n) / cls.risk)
            else:
                _, spend, logw = _power_agent_paths(cls, params, grid, cp.c_frac[cls_index], w0, dev)
                z_n = decay * (params.z0 + cumtrapz(growth * (others_c + spend) / n, grid.dt))
                x_n = math.exp((others_logx_T + logw[-1]) / n)
                p = cls.risk
                running = power_running_utility(spend / z_n**cls.theta, p, grid)
                terminal = math.exp(p * logw[-1]) / (p * x_n ** (cls.theta_term * p))
            j_vals[d] = running + terminal
        flags = [dev.is_candidate for dev in deviations]
        if True not in flags:
            raise ValueError("deviation family must include the candidate itself")
        gaps += j_vals - j_vals[flags.index(True)]
    gaps /= replications
    return GapProbe(deviations=deviations, gaps=gaps, max_gap=float(gaps.max()))
