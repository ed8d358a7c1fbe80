import math

import numpy as np
import pytest

from mfg_habitat import exponential as expm
from mfg_habitat.exponential import NonConvergence
from mfg_habitat.grids import GridPath, TimeGrid, cumtrapz, tail_cumtrapz
from mfg_habitat.model import AgentClass, MarketParams, TypeDistribution, homogeneous

PARAMS = MarketParams(T=1.0, delta=0.1, x0=5.0, z0=1.0)


def unit_risk(theta):
    # (mu/sigma)^2 * beta = 1
    return AgentClass(mu=0.2, sigma=0.2, risk=1.0, theta=theta)


class TestValueCoeffs:
    def test_a_at_terminal(self):
        g = TimeGrid(1.0, 100)
        z = GridPath.constant(g, 1.0)
        c = expm.value_coeffs(1.0, AgentClass(0.2, 0.2, 2.0, 1.0), PARAMS, z, 5.0)
        assert c.a == pytest.approx(-0.5, abs=1e-14)

    def test_a_at_zero(self):
        g = TimeGrid(1.0, 100)
        z = GridPath.constant(g, 1.0)
        c = expm.value_coeffs(0.0, AgentClass(0.2, 0.2, 2.0, 1.0), PARAMS, z, 5.0)
        assert c.a == pytest.approx(-0.25, abs=1e-14)

    def test_b_terminal_condition(self):
        g = TimeGrid(1.0, 100)
        z = GridPath(g, 1.0 + np.sin(g.nodes))
        cls = AgentClass(0.3, 0.25, 1.7, 0.8)
        c = expm.value_coeffs(1.0, cls, PARAMS, z, xbar_T=4.2)
        assert c.b == pytest.approx(0.8 * 4.2 / 1.7, abs=1e-12)

    def test_a_negative_everywhere(self):
        g = TimeGrid(1.0, 50)
        z = GridPath.constant(g, 1.0)
        cls = AgentClass(0.2, 0.2, 0.5, 1.0)
        assert all(
            expm.value_coeffs(t, cls, PARAMS, z, 1.0).a < 0 for t in np.linspace(0, 1, 21)
        )

    def test_time_domain(self):
        g = TimeGrid(1.0, 10)
        z = GridPath.constant(g, 1.0)
        with pytest.raises(ValueError):
            expm.value_coeffs(1.5, unit_risk(1.0), PARAMS, z, 1.0)


class TestStrategy:
    def test_investment_example(self):
        g = TimeGrid(1.0, 100)
        z = GridPath.constant(g, 1.0)
        pi, _ = expm.strategy(0.0, 3.0, unit_risk(1.0), PARAMS, z, 5.0)
        assert pi == pytest.approx(10.0, abs=1e-12)

    def test_investment_affine_decreasing_in_t(self):
        g = TimeGrid(1.0, 100)
        z = GridPath(g, 1.0 + g.nodes)
        cls = AgentClass(0.25, 0.2, 0.7, 0.6)
        ts = np.linspace(0, 1, 11)
        pis = [expm.strategy(t, 0.0, cls, PARAMS, z, 2.0)[0] for t in ts]
        slopes = np.diff(pis) / np.diff(ts)
        assert np.allclose(slopes, -cls.risk * cls.mu / cls.sigma**2, atol=1e-10)
        # independent of wealth and benchmarks
        assert expm.strategy(0.3, 99.0, cls, PARAMS, z, -7.0)[0] == pytest.approx(pis[3], abs=1e-9)

    def test_consumption_terminal(self):
        g = TimeGrid(1.0, 100)
        z = GridPath(g, 2.0 - g.nodes)
        cls = AgentClass(0.2, 0.2, 1.0, 0.6)
        _, c = expm.strategy(1.0, 4.0, cls, PARAMS, z, 3.0)
        assert c == pytest.approx(4.0 - 0.6 * 3.0 + 0.6 * 1.0, abs=1e-12)

    def test_theta_zero_terminal_consumption_is_wealth(self):
        g = TimeGrid(1.0, 100)
        z = GridPath.constant(g, 5.0)
        _, c = expm.strategy(1.0, 2.5, unit_risk(0.0), PARAMS, z, 9.0)
        assert c == pytest.approx(2.5, abs=1e-12)


class TestMeanConsumption:
    def test_hand_evaluated_reduction_at_zero(self):
        # constant habit 1, E[theta]=1, T=1, x0=5, Xbar=5.75 -> 0.5
        g = TimeGrid(1.0, 2000)
        z = GridPath.constant(g, 1.0)
        out = expm.mean_consumption(0.0, homogeneous(unit_risk(1.0)), PARAMS, z, 5.75)
        assert out == pytest.approx(0.5, abs=1e-9)

    def test_general_t0_formula(self):
        g = TimeGrid(1.0, 500)
        z = GridPath(g, 1.0 + 0.3 * g.nodes)
        dist = TypeDistribution([unit_risk(1.0), unit_risk(0.5)], [0.25, 0.75])
        xbar = 4.0
        got = expm.mean_consumption(0.0, dist, PARAMS, z, xbar)
        e_th = 0.25 * 1.0 + 0.75 * 0.5
        tail = tail_cumtrapz(z.values, g.dt)[0]
        want = (5.0 - e_th * xbar) / 2.0 + e_th * z.values[0] - e_th / 2.0 * tail + 0.25 * (2 - 0.5)
        assert got == pytest.approx(want, abs=1e-12)

    def test_theta_zero_closed_form_and_zbar_independence(self):
        g = TimeGrid(1.0, 20000)
        dist = homogeneous(unit_risk(0.0))
        za = GridPath.constant(g, 1.0)
        zb = GridPath(g, 3.0 + np.sin(5 * g.nodes))
        for t in (0.0, 0.5, 1.0):
            a = expm.mean_consumption(t, dist, PARAMS, za, 4.0)
            b = expm.mean_consumption(t, dist, PARAMS, zb, -1.0)
            want = 5.0 / 2.0 + 0.25 * (2.0 + 2.0 * t - 0.5)
            assert a == pytest.approx(b, abs=1e-13)
            assert a == pytest.approx(want, abs=1e-7)


class TestGSource:
    def test_theta_zero_plugin(self):
        g = TimeGrid(1.0, 100)
        z = GridPath.constant(g, 1.0)
        out = expm.g_source(0.0, z, homogeneous(unit_risk(0.0)), PARAMS)
        assert out == pytest.approx(2.875, abs=1e-12)

    def test_constant_habit_kernel_identity(self):
        # integral of (T-s) z / (T+1-s)^2 - z / (T+1-s) over [0, T] is -z T/(T+1)
        for z_level in (1.0, 3.7):
            g = TimeGrid(1.0, 40000)
            s = g.nodes
            integrand = (1.0 - s) * z_level / (2.0 - s) ** 2 - z_level / (2.0 - s)
            got = cumtrapz(integrand, g.dt)[-1]
            assert got == pytest.approx(-z_level / 2.0, abs=1e-9)

    def test_matches_mean_consumption_identity(self):
        g = TimeGrid(1.0, 300)
        z = GridPath(g, 1.0 + 0.2 * np.cos(g.nodes))
        dist = TypeDistribution([unit_risk(1.0), unit_risk(0.4)], [0.5, 0.5])
        xbar = expm.decoupled_xbar(dist, PARAMS, g, z.values)
        for t in (0.0, 0.27, 1.0):
            g_val = expm.g_source(t, z, dist, PARAMS)
            c_val = expm.mean_consumption(t, dist, PARAMS, z, xbar)
            e_th = dist.mean(lambda c: c.theta)
            j = g.index_of(t)
            assert g_val == pytest.approx(c_val - e_th * z.values[j], abs=1e-12)


class TestDecoupledXbar:
    def test_constant_habit_probe(self):
        g = TimeGrid(1.0, 200000)
        xbar = expm.decoupled_xbar(homogeneous(unit_risk(1.0)), PARAMS, g, np.ones(g.n_nodes))
        assert xbar == pytest.approx(5.75, abs=1e-9)

    def test_constant_habit_general_formula(self):
        g = TimeGrid(1.0, 100000)
        dist = TypeDistribution([unit_risk(0.8), unit_risk(0.5)], [0.5, 0.5])
        z_level = 2.3
        got = expm.decoupled_xbar(dist, PARAMS, g, np.full(g.n_nodes, z_level))
        e_th = 0.65
        want = (5.0 + 0.25 * 7.0 - e_th * z_level) / ((1 - e_th) + 1.0)
        assert got == pytest.approx(want, abs=1e-8)

    def test_theta_zero_independent_of_habit(self):
        g = TimeGrid(1.0, 50000)
        dist = homogeneous(unit_risk(0.0))
        a = expm.decoupled_xbar(dist, PARAMS, g, np.ones(g.n_nodes))
        b = expm.decoupled_xbar(dist, PARAMS, g, 10 + np.sin(g.nodes))
        assert a == pytest.approx(b, abs=1e-13)
        assert a == pytest.approx((5.0 + 0.25 * 7.0) / 2.0, abs=1e-8)


class TestPhi:
    def test_starts_at_initial_habit(self):
        g = TimeGrid(1.0, 64)
        z = GridPath(g, 1.0 + g.nodes**2)
        out = expm.phi(z, homogeneous(unit_risk(0.9)), PARAMS)
        assert out.values[0] == PARAMS.z0

    def test_frozen_habit_when_delta_zero(self):
        g = TimeGrid(1.0, 64)
        params = MarketParams(T=1.0, delta=0.0, x0=5.0, z0=1.0)
        z = GridPath(g, 1.0 + g.nodes)
        out = expm.phi(z, homogeneous(unit_risk(1.0)), params)
        assert np.allclose(out.values, 1.0, atol=1e-15)

    def test_pure_function(self):
        g = TimeGrid(1.0, 64)
        z = GridPath(g, 1.0 + 0.5 * g.nodes)
        dist = homogeneous(unit_risk(0.7))
        a = expm.phi(z, dist, PARAMS)
        b = expm.phi(z, dist, PARAMS)
        assert np.array_equal(a.values, b.values)


def theta0_oracle(t):
    """Exact solution of dZ = -0.1 Z dt + 0.1 (2.875 + 0.5 t) dt, Z(0) = 1."""
    return -2.125 + 0.5 * t + 3.125 * np.exp(-0.1 * t)


class TestSolve:
    def test_theta_zero_linear_ode_oracle(self):
        g = TimeGrid(1.0, 2000)
        eq = expm.solve(homogeneous(unit_risk(0.0)), PARAMS, g, tol=1e-12)
        assert np.max(np.abs(eq.zbar.values - theta0_oracle(g.nodes))) < 1e-6

    def test_scenario_scale_converges(self):
        g = TimeGrid(1.0, 1000)
        eq = expm.solve(homogeneous(unit_risk(1.0)), PARAMS, g, tol=1e-12, max_iter=200)
        assert eq.residual < 1e-10
        assert eq.iterations < 200
        assert eq.zbar.values[0] == PARAMS.z0
        # golden value from this run, validated by the grid-refinement check
        assert eq.xbar_T == pytest.approx(5.7666681672699, abs=1e-9)

    def test_consistency_identity_at_convergence(self):
        g = TimeGrid(1.0, 500)
        dist = TypeDistribution([unit_risk(1.0), unit_risk(0.6)], [0.4, 0.6])
        eq = expm.solve(dist, PARAMS, g, tol=1e-13, max_iter=500)
        mean_c = expm.mean_consumption_path(dist, PARAMS, g, eq.zbar.values, eq.xbar_T)
        t = g.nodes
        audit = np.exp(-0.1 * t) * (1.0 + cumtrapz(0.1 * np.exp(0.1 * t) * mean_c, g.dt))
        assert np.max(np.abs(audit - eq.zbar.values)) < 1e-12

    def test_terminal_consistency(self):
        g = TimeGrid(1.0, 400)
        dist = TypeDistribution([unit_risk(0.9), unit_risk(0.3)], [0.5, 0.5])
        eq = expm.solve(dist, PARAMS, g, tol=1e-12)
        mean_f = sum(
            w * expm.mean_wealth(1.0, c, PARAMS, eq.zbar, eq.xbar_T)
            for c, w in zip(dist.classes, dist.weights)
        )
        assert eq.xbar_T == pytest.approx(mean_f, abs=1e-11)

    def test_grid_refinement_second_order(self):
        sols = [
            expm.solve(homogeneous(unit_risk(1.0)), PARAMS, TimeGrid(1.0, n), tol=1e-13).zbar.values
            for n in (250, 500, 1000)
        ]
        d1 = np.max(np.abs(sols[0] - sols[1][::2]))
        d2 = np.max(np.abs(sols[1] - sols[2][::2]))
        assert 3.0 < d1 / d2 < 5.0

    def test_picard_changes_eventually_geometric(self):
        g = TimeGrid(1.0, 200)
        dist = homogeneous(unit_risk(1.0))
        z = np.full(g.n_nodes, PARAMS.z0)
        changes = []
        for _ in range(8):
            z_new, _ = expm.phi_map(dist, PARAMS, g, z)
            changes.append(np.max(np.abs(z_new - z)))
            z = z_new
        tail = changes[2:]
        assert all(b < a for a, b in zip(tail, tail[1:]))
        ratios = [b / a for a, b in zip(tail, tail[1:])]
        assert max(ratios) < 0.9

    def test_nonconvergence_raises(self):
        g = TimeGrid(1.0, 100)
        with pytest.raises(NonConvergence) as info:
            expm.solve(homogeneous(unit_risk(1.0)), PARAMS, g, tol=1e-14, max_iter=2)
        assert info.value.iterations == 2

    def test_input_validation(self):
        g = TimeGrid(1.0, 100)
        with pytest.raises(ValueError):
            expm.solve(homogeneous(unit_risk(1.0)), PARAMS, g, tol=0.0)
        with pytest.raises(ValueError):
            expm.solve(homogeneous(unit_risk(1.0)), PARAMS, g, max_iter=0)


class TestMeanWealth:
    def test_initial_condition(self):
        g = TimeGrid(1.0, 128)
        z = GridPath(g, 1.0 + g.nodes)
        assert expm.mean_wealth(0.0, unit_risk(0.8), PARAMS, z, 3.0) == pytest.approx(5.0, abs=1e-13)

    def test_theta_zero_independent_quadrature(self):
        g = TimeGrid(1.0, 400)
        z = GridPath(g, 2.0 + np.cos(g.nodes))
        cls = AgentClass(mu=0.3, sigma=0.2, risk=0.7, theta=0.0)
        r = (cls.mu / cls.sigma) ** 2 * cls.risk
        s = g.nodes
        integrand = 0.25 * r / (2.0 - s) ** 2 + 0.75 * r
        for t in (0.25, 1.0):
            j = g.index_of(t)
            want = 5.0 * (2.0 - t) / 2.0 + (2.0 - t) * np.trapezoid(integrand[: j + 1], dx=g.dt)
            got = expm.mean_wealth(t, cls, PARAMS, z, 77.0)
            assert got == pytest.approx(want, abs=1e-10)
