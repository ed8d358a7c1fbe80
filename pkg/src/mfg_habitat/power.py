"""Power-utility mean-field equilibrium.

A representative agent with utility y^p / p scores her consumption rate
against the population habit level, (c X / Zbar^theta)^p / p, and her
terminal wealth against the population geometric-mean terminal wealth,
(X_T / Xbar_T^theta_term)^p / p.  Given (Zbar, Xbar_T) the best response is

    pi*(t) = mu / ((1 - p) sigma^2)                (constant fraction)
    c*(t)  = Zbar_t^(theta p / (p-1)) g(t)^(1/(p-1))

with the value-function factor

    g(t) = ( e^{a (T-t)} Xbar_T^{-p theta_term / (1-p)}
             + e^{-a t} int_t^T e^{a s} Zbar_s^{theta p/(p-1)} ds )^{1-p},
    a    = mu^2 p / (2 sigma^2 (1-p)^2).

The equilibrium couples a path fixed point (Zbar reproduces the mean
spending it induces) with a scalar fixed point for Xbar_T.  Solving happens
in hat space, Zhat_t = e^{delta t} Zbar_t, where the habit update is a plain
forward integral with computable a-priori bounds: z0 <= Zhat_t <= M(t) and
C0, C1 <= Xbar_T <= C2.  The scalar equation for Xbar_T is strictly
monotone, so an exact bisection is nested inside a damped outer iteration
on Zhat, with iterates clipped into the invariant box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponential import NonConvergence
from .grids import GridPath, TimeGrid, cumtrapz, tail_cumtrapz
from .model import AgentClass, MarketParams, TypeDistribution


class BracketFailure(RuntimeError):
    def __init__(self, lo: float, f_lo: float, hi: float, f_hi: float):
        super().__init__(
            f"bisection bracket failure: f({lo:.6g})={f_lo:.6g}, f({hi:.6g})={f_hi:.6g}"
        )
        self.endpoints = (lo, hi)
        self.values = (f_lo, f_hi)


@dataclass(frozen=True)
class PowerBounds:
    """A-priori bounds for the hat-space system.

    m_path is the dominating line M(t) = E K t + z0 for Zhat; c2 bounds
    Xbar_T above, c0 and c1 below (c0 from the habit-dominated chain, c1
    from the scalar root equation with the conservative unweighted D_k).
    """

    c0: float
    c1: float
    c2: float
    e_const: float
    m_path: GridPath
    beta_k: tuple[float, ...]


@dataclass(frozen=True)
class PowerEquilibrium:
    zbar: GridPath
    zhat: GridPath
    xbar_T: float
    residual: float
    iterations: int
    bounds: PowerBounds


@dataclass(frozen=True)
class _ClassConsts:
    a: float            # mu^2 p / (2 sigma^2 (1-p)^2)
    omega: float        # theta p delta / (1 - p), habit-exponent growth rate
    chi: float          # theta p / (p - 1) < 0, habit exponent
    gamma_term: float   # p theta_term / (1 - p) >= 0, wealth exponent
    beta: float         # delta (1 + theta p - p) / (1 - p)
    m1: float           # mu^2 / ((1-p) sigma^2), mean-wealth drift rate
    m2: float           # mu^2 (1-2p) / (2 sigma^2 (1-p)^2), mean-log drift rate


def _consts(cls: AgentClass, delta: float) -> _ClassConsts:
    p, mu, sg = cls.risk, cls.mu, cls.sigma
    one_m_p = 1.0 - p
    return _ClassConsts(
        a=0.5 * mu**2 / sg**2 * p / one_m_p**2,
        omega=cls.theta * p * delta / one_m_p,
        chi=cls.theta * p / (p - 1.0),
        gamma_term=p * cls.theta_term / one_m_p,
        beta=delta / one_m_p * (1.0 + cls.theta * p - p),
        m1=mu**2 / (one_m_p * sg**2),
        m2=0.5 * mu**2 / sg**2 * (1.0 - 2.0 * p) / one_m_p**2,
    )


def _expm1_over(r: float, T: float) -> float:
    """int_0^T e^{r s} ds, stable near r = 0."""
    if abs(r) < 1e-14:
        return T
    return math.expm1(r * T) / r


def constants(dist: TypeDistribution, params: MarketParams, grid: TimeGrid) -> PowerBounds:
    """A-priori bounds: C2, E, M(t), C1 (bisection), C0 (quadrature)."""
    params.validate("power")
    dist.validate("power")
    T, delta, x0, z0 = params.T, params.delta, params.x0, params.z0
    cc = [_consts(c, delta) for c in dist.classes]
    K = dist.n_classes

    log_c2 = math.log(x0) + sum(w * c.m2 * T for c, w in zip(cc, dist.weights))
    c2 = math.exp(log_c2)

    # E in log space: the inner max over t is attained at t = T (positive rate)
    log_e = math.log(delta) + math.log(x0) + max(
        -c.a * T + c.chi * math.log(z0) + c.gamma_term * log_c2
        + (c.beta + c.a + c.m1) * T
        for c in cc
    )
    e_const = math.exp(log_e)
    m_path = GridPath(grid, e_const * K * grid.nodes + z0)

    # C1: root of x = C2 exp(-sum_k D_k x^gamma_k)
    d_k = [z0**c.chi * math.exp(-c.a * T) * _expm1_over(c.omega + c.a, T) for c in cc]

    def c1_gap(x: float) -> float:
        return c2 * math.exp(-sum(d * x**c.gamma_term for d, c in zip(d_k, cc))) - x

    hi, f_hi = c2, c1_gap(c2)
    lo = c2
    f_lo = f_hi
    for _ in range(2000):
        lo *= 0.5
        f_lo = c1_gap(lo)
        if f_lo > 0:
            break
    else:
        raise BracketFailure(lo, f_lo, hi, f_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if c1_gap(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * c2:
            break
    # shade the certified bound: in near-degenerate scenarios (consumption
    # integral ~1e-14) the root equation coincides with the terminal
    # consistency to rounding level, and a bound must stay on the safe side
    c1 = 0.5 * (lo + hi) * (1.0 - 1e-12)

    # C0: habit-dominated lower bound.  The outer integrand grows like
    # 1/(T-s) near s = T (its continuum integral diverges, making the
    # continuum C0 equal 0), so the outer trapezoid runs over nodes
    # 0..N-1; the result is a small positive valid lower bound.
    mT = float(m_path.values[-1])
    outer_total = 0.0
    nodes = grid.nodes
    for c in cc:
        u = np.exp(c.a * (nodes - T) + c.omega * nodes) * mT**c.chi
        tail_u = tail_cumtrapz(u, grid.dt)
        with np.errstate(divide="ignore"):
            inner = np.exp(c.a * (T - nodes)) * tail_u
            integrand = np.exp(c.omega * nodes) * z0**c.chi / inner
        seg = integrand[:-1]
        outer_total += grid.dt * (seg.sum() - 0.5 * (seg[0] + seg[-1]))
    # exp can underflow for strongly heterogeneous classes; any positive
    # number below the true root is still a valid lower bound
    c0 = max(c2 * math.exp(-outer_total), 2.2250738585072014e-308)

    return PowerBounds(c0=c0, c1=c1, c2=c2, e_const=e_const, m_path=m_path,
                       beta_k=tuple(c.beta for c in cc))


# ---------------------------------------------------------------------------
# hat-space evaluation
# ---------------------------------------------------------------------------

def _hat_tails(dist: TypeDistribution, params: MarketParams, grid: TimeGrid, zhat: np.ndarray) -> list[np.ndarray]:
    """Per class: R_k(t) = int_t^T e^{a_k (s-T)} e^{omega_k s} Zhat_s^chi_k ds."""
    nodes, T = grid.nodes, grid.T
    tails = []
    for cls in dist.classes:
        c = _consts(cls, params.delta)
        u = np.exp(c.a * (nodes - T) + c.omega * nodes) * zhat**c.chi
        tails.append(tail_cumtrapz(u, grid.dt))
    return tails


def _cfrac_from_tails(
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    zhat: np.ndarray,
    tails: list[np.ndarray],
    xbar: float,
) -> np.ndarray:
    """Consumption fractions c*_k(t) = e^{omega t} Zhat^chi Ghat_k(t), shape (K, N+1)."""
    nodes, T = grid.nodes, grid.T
    out = np.empty((dist.n_classes, grid.n_nodes))
    log_x = math.log(xbar)
    for k, cls in enumerate(dist.classes):
        c = _consts(cls, params.delta)
        # Ghat_k(t) = e^{a (t-T)} / (xbar^{-gamma_term} + R_k(t))
        ghat = np.exp(c.a * (nodes - T)) / (math.exp(-c.gamma_term * log_x) + tails[k])
        out[k] = np.exp(c.omega * nodes) * zhat**c.chi * ghat
    return out


def _mean_wealth_from_cfrac(
    dist: TypeDistribution, params: MarketParams, grid: TimeGrid, cfrac: np.ndarray
) -> np.ndarray:
    """f_k(t) = x0 exp(m1_k t - int_0^t c*_k ds), shape (K, N+1)."""
    out = np.empty_like(cfrac)
    for k, cls in enumerate(dist.classes):
        c = _consts(cls, params.delta)
        out[k] = params.x0 * np.exp(c.m1 * grid.nodes - cumtrapz(cfrac[k], grid.dt))
    return out


def _xbar_rhs(dist: TypeDistribution, grid: TimeGrid, cfrac: np.ndarray, c2: float) -> float:
    """C2 exp(-sum_k F_k int_0^T c*_k dt) for the terminal consistency."""
    total = sum(
        w * cumtrapz(cfrac[k], grid.dt)[-1] for k, w in enumerate(dist.weights)
    )
    return c2 * math.exp(-total)


def xbar_given_zhat(
    zhat: GridPath,
    dist: TypeDistribution,
    params: MarketParams,
    tol: float = 1e-12,
    bounds: PowerBounds | None = None,
) -> float:
    """Unique root of the terminal-wealth consistency at a fixed hat path.

    The left side is increasing and the right side strictly decreasing in
    Xbar_T, so bisection on [min(C0, C1)/2, C2] is exact.
    """
    grid = zhat.grid
    if np.any(zhat.values < params.z0 * (1 - 1e-12)):
        raise ValueError("zhat must dominate z0 pointwise")
    if bounds is None:
        bounds = constants(dist, params, grid)
    tails = _hat_tails(dist, params, grid, zhat.values)
    return _xbar_bisect(dist, params, grid, zhat.values, tails, bounds, tol)


def _xbar_bisect(dist, params, grid, zhat, tails, bounds: PowerBounds, tol: float) -> float:
    def rhs(x: float) -> float:
        cfrac = _cfrac_from_tails(dist, params, grid, zhat, tails, x)
        return _xbar_rhs(dist, grid, cfrac, bounds.c2)

    # c0 can underflow to 0 when M(T) is huge; c1 is always a positive bound
    positive_lower = [b for b in (bounds.c0, bounds.c1) if b > 0]
    lo = 0.5 * min(positive_lower)
    hi = bounds.c2
    tol = min(tol, 1e-12 * bounds.c2)
    f_lo, f_hi = lo - rhs(lo), hi - rhs(hi)
    if not (f_lo < 0 <= f_hi):
        raise BracketFailure(lo, f_lo, hi, f_hi)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket at ulp width
            break
        if mid - rhs(mid) < 0:
            lo = mid
        else:
            hi = mid
    # guarded fixed-point polish: the map is decreasing, so accept a step
    # only while it shrinks the residual (tight roots keep the a-priori
    # bound comparisons exact at floating-point level)
    x = 0.5 * (lo + hi)
    resid = abs(x - rhs(x))
    for _ in range(4):
        x_new = rhs(x)
        r_new = abs(x_new - rhs(x_new))
        if not (r_new < resid):
            break
        x, resid = x_new, r_new
    return x


def solve(
    dist: TypeDistribution,
    params: MarketParams,
    grid: TimeGrid,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    damping: float = 0.5,
    initial_iterate: str = "z0",
) -> PowerEquilibrium:
    """Damped outer iteration on Zhat with an exact inner root for Xbar_T.

    Each sweep solves the scalar consistency exactly at the current hat
    path, forward-integrates the habit update, damps, and clips into the
    invariant box [z0, M(t)].  Existence is known but uniqueness is not:
    the returned point is the one reached from the chosen initial iterate
    ("z0" for Zhat ≡ z0, "mtop" for Zhat = M(t)).
    """
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    params.validate("power")
    dist.validate("power")
    bounds = constants(dist, params, grid)
    m_vals = bounds.m_path.values

    if initial_iterate == "z0":
        zhat = np.full(grid.n_nodes, params.z0)
    elif initial_iterate == "mtop":
        zhat = m_vals.copy()
    else:
        raise ValueError(f"unknown initial_iterate {initial_iterate!r}")

    inner_tol = min(tol * 1e-2, 1e-12)
    t = grid.nodes
    delta = params.delta
    weights = np.asarray(dist.weights)

    iterations = 0
    change = math.inf
    for iterations in range(1, max_iter + 1):
        tails = _hat_tails(dist, params, grid, zhat)
        xbar = _xbar_bisect(dist, params, grid, zhat, tails, bounds, inner_tol)
        cfrac = _cfrac_from_tails(dist, params, grid, zhat, tails, xbar)
        mean_wealth = _mean_wealth_from_cfrac(dist, params, grid, cfrac)
        spend = weights @ (cfrac * mean_wealth)
        phi2 = params.z0 + cumtrapz(delta * np.exp(delta * t) * spend, grid.dt)
        z_new = np.clip((1.0 - damping) * zhat + damping * phi2, params.z0, m_vals)
        change = float(np.max(np.abs(z_new - zhat)))
        zhat = z_new
        if change < tol:
            break
    if change >= tol:
        raise NonConvergence(iterations, change)

    # residual audit against the original (unhatted) system
    tails = _hat_tails(dist, params, grid, zhat)
    xbar = _xbar_bisect(dist, params, grid, zhat, tails, bounds, inner_tol)
    cfrac = _cfrac_from_tails(dist, params, grid, zhat, tails, xbar)
    mean_wealth = _mean_wealth_from_cfrac(dist, params, grid, cfrac)
    zbar = np.exp(-delta * t) * zhat
    spend = weights @ (cfrac * mean_wealth)
    z_audit = np.exp(-delta * t) * (
        params.z0 + cumtrapz(delta * np.exp(delta * t) * spend, grid.dt)
    )
    resid_z = float(np.max(np.abs(z_audit - zbar)))
    resid_x = abs(xbar - _xbar_rhs(dist, grid, cfrac, bounds.c2))
    return PowerEquilibrium(
        zbar=GridPath(grid, zbar),
        zhat=GridPath(grid, zhat),
        xbar_T=xbar,
        residual=resid_z + resid_x,
        iterations=iterations,
        bounds=bounds,
    )


@dataclass(frozen=True)
class ClassPaths:
    """Per-class equilibrium curves used by the CSV writer and the simulator."""

    pi_star: np.ndarray         # (K,) constant investment fractions
    c_frac: np.ndarray          # (K, N+1) consumption fractions c*_k(t)
    mean_wealth: np.ndarray     # (K, N+1) f_k(t) = E[X*_t | class k]
    mean_log_wealth: np.ndarray  # (K, N+1) E[log X*_t | class k]
    log_drift: np.ndarray       # (K, N+1) pathwise log-wealth drift integral


def class_paths(eq: PowerEquilibrium, dist: TypeDistribution, params: MarketParams) -> ClassPaths:
    grid = eq.zbar.grid
    tails = _hat_tails(dist, params, grid, eq.zhat.values)
    cfrac = _cfrac_from_tails(dist, params, grid, eq.zhat.values, tails, eq.xbar_T)
    mean_wealth = _mean_wealth_from_cfrac(dist, params, grid, cfrac)
    K = dist.n_classes
    pi = np.empty(K)
    mean_log = np.empty_like(cfrac)
    log_drift = np.empty_like(cfrac)
    for k, cls in enumerate(dist.classes):
        c = _consts(cls, params.delta)
        pi[k] = cls.mu / ((1.0 - cls.risk) * cls.sigma**2)
        consumed = cumtrapz(cfrac[k], grid.dt)
        mean_log[k] = math.log(params.x0) + c.m2 * grid.nodes - consumed
        # pathwise drift: pi mu - sigma^2 pi^2 / 2 - c = m2 - c
        log_drift[k] = c.m2 * grid.nodes - consumed
    return ClassPaths(pi_star=pi, c_frac=cfrac, mean_wealth=mean_wealth,
                      mean_log_wealth=mean_log, log_drift=log_drift)


# ---------------------------------------------------------------------------
# pointwise operations (spec-facing, scalar t on grid nodes)
# ---------------------------------------------------------------------------

def _check_positive(zbar: GridPath, xbar_T: float) -> None:
    if np.any(zbar.values <= 0):
        raise ValueError("zbar must be strictly positive in the power regime")
    if not (xbar_T > 0):
        raise ValueError(f"xbar_T must be > 0, got {xbar_T}")


def g_factor(t: float, cls: AgentClass, params: MarketParams, zbar: GridPath, xbar_T: float) -> float:
    """Value-function factor g(t) from the unhatted habit path."""
    _check_positive(zbar, xbar_T)
    grid = zbar.grid
    j = grid.index_of(t)
    c = _consts(cls, params.delta)
    u = np.exp(c.a * (grid.nodes - grid.T)) * zbar.values**c.chi
    tail = tail_cumtrapz(u, grid.dt)[j]
    bracket = xbar_T ** (-c.gamma_term) + tail
    # g = (e^{a(T-t)} * bracket)^{1-p}
    return float(math.exp(c.a * (grid.T - t) * (1.0 - cls.risk)) * bracket ** (1.0 - cls.risk))


def strategy(t: float, cls: AgentClass, params: MarketParams, zbar: GridPath, xbar_T: float) -> tuple[float, float]:
    """(investment fraction, consumption fraction) at a grid node."""
    grid = zbar.grid
    j = grid.index_of(t)
    pi = cls.mu / ((1.0 - cls.risk) * cls.sigma**2)
    g = g_factor(t, cls, params, zbar, xbar_T)
    c = _consts(cls, params.delta)
    cons = float(zbar.values[j] ** c.chi * g ** (1.0 / (cls.risk - 1.0)))
    return pi, cons


def hat_G(t: float, cls: AgentClass, params: MarketParams, zhat: GridPath, xbar_T: float) -> float:
    """Ghat_k(t) of the hat-space system at a grid node."""
    if np.any(zhat.values < params.z0 * (1 - 1e-12)):
        raise ValueError("zhat must dominate z0 pointwise")
    if not (xbar_T > 0):
        raise ValueError(f"xbar_T must be > 0, got {xbar_T}")
    grid = zhat.grid
    j = grid.index_of(t)
    c = _consts(cls, params.delta)
    u = np.exp(c.a * (grid.nodes - grid.T) + c.omega * grid.nodes) * zhat.values**c.chi
    tail = tail_cumtrapz(u, grid.dt)[j]
    return float(math.exp(c.a * (t - grid.T)) / (xbar_T ** (-c.gamma_term) + tail))


def hat_f(t: float, cls: AgentClass, params: MarketParams, zhat: GridPath, xbar_T: float) -> float:
    """fhat_k(t) = E[X*_t | class k] of the hat-space system at a grid node."""
    grid = zhat.grid
    j = grid.index_of(t)
    c = _consts(cls, params.delta)
    u = np.exp(c.a * (grid.nodes - grid.T) + c.omega * grid.nodes) * zhat.values**c.chi
    tails = tail_cumtrapz(u, grid.dt)
    ghat = np.exp(c.a * (grid.nodes - grid.T)) / (xbar_T ** (-c.gamma_term) + tails)
    integrand = np.exp(c.omega * grid.nodes) * zhat.values**c.chi * ghat
    return float(params.x0 * math.exp(c.m1 * t - cumtrapz(integrand, grid.dt)[j]))


def mean_log_wealth(t: float, cls: AgentClass, params: MarketParams, zbar: GridPath, xbar_T: float) -> float:
    """E[log X*_t | class k] from the unhatted habit path at a grid node."""
    _check_positive(zbar, xbar_T)
    grid = zbar.grid
    j = grid.index_of(t)
    c = _consts(cls, params.delta)
    u = np.exp(c.a * (grid.nodes - grid.T)) * zbar.values**c.chi
    tails = tail_cumtrapz(u, grid.dt)
    gk = np.exp(c.a * (grid.nodes - grid.T)) / (xbar_T ** (-c.gamma_term) + tails)
    cons = zbar.values**c.chi * gk
    return float(math.log(params.x0) + c.m2 * t - cumtrapz(cons, grid.dt)[j])
