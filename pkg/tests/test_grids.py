import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfg_habitat.grids import (
    GridPath,
    TimeGrid,
    cumtrapz,
    cumulative_tail_integral,
    tail_cumtrapz,
    trapezoid_integral,
)


def grid01(n=100):
    return TimeGrid(T=1.0, n_steps=n)


class TestTimeGrid:
    def test_nodes(self):
        g = grid01(4)
        assert np.allclose(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert g.dt == 0.25
        assert g.n_nodes == 5

    def test_nodes_strictly_increasing_uniform(self):
        g = TimeGrid(T=2.5, n_steps=37)
        d = np.diff(g.nodes)
        assert np.all(d > 0)
        assert np.allclose(d, g.dt)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.5

    def test_invalid(self):
        with pytest.raises(ValueError):
            TimeGrid(T=1.0, n_steps=1)
        with pytest.raises(ValueError):
            TimeGrid(T=0.0, n_steps=10)

    def test_index_of(self):
        g = grid01(10)
        assert g.index_of(0.3) == 3
        assert g.index_of(1.0) == 10
        with pytest.raises(ValueError):
            g.index_of(0.31)


class TestGridPath:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            GridPath(grid01(10), np.zeros(10))

    def test_nonfinite_rejected(self):
        v = np.zeros(11)
        v[3] = np.nan
        with pytest.raises(ValueError):
            GridPath(grid01(10), v)


class TestTrapezoid:
    def test_constant(self):
        path = GridPath.constant(grid01(), 2.0)
        assert trapezoid_integral(path) == pytest.approx(2.0, abs=1e-14)

    def test_identity_exact(self):
        g = grid01()
        path = GridPath(g, g.nodes)
        assert trapezoid_integral(path) == pytest.approx(0.5, abs=1e-14)

    def test_empty_interval(self):
        path = GridPath.constant(grid01(), 3.0)
        assert trapezoid_integral(path, 7, 7) == 0.0

    def test_index_errors(self):
        path = GridPath.constant(grid01(10), 1.0)
        with pytest.raises(IndexError):
            trapezoid_integral(path, 5, 3)
        with pytest.raises(IndexError):
            trapezoid_integral(path, 0, 11)

    @given(
        a=st.floats(-5, 5),
        b=st.floats(-5, 5),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, a, b, seed):
        g = grid01(64)
        r = np.random.default_rng(seed)
        f, h = r.normal(size=g.n_nodes), r.normal(size=g.n_nodes)
        lhs = trapezoid_integral(GridPath(g, a * f + b * h))
        rhs = a * trapezoid_integral(GridPath(g, f)) + b * trapezoid_integral(GridPath(g, h))
        assert lhs == pytest.approx(rhs, abs=1e-11)


class TestTailIntegral:
    def test_constant_one(self):
        g = grid01()
        out = cumulative_tail_integral(GridPath.constant(g, 1.0))
        assert np.allclose(out.values, 1.0 - g.nodes, atol=1e-14)

    def test_last_entry_zero(self):
        g = grid01(37)
        r = np.random.default_rng(5)
        out = cumulative_tail_integral(GridPath(g, r.normal(size=g.n_nodes)))
        assert out.values[-1] == 0.0

    def test_identity_path(self):
        g = grid01()
        out = cumulative_tail_integral(GridPath(g, g.nodes))
        assert np.allclose(out.values, (1.0 - g.nodes**2) / 2.0, atol=1e-14)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_decrement_is_cell_trapezoid(self, seed):
        g = grid01(33)
        v = np.random.default_rng(seed).normal(size=g.n_nodes)
        tail = tail_cumtrapz(v, g.dt)
        cell = 0.5 * g.dt * (v[:-1] + v[1:])
        assert np.allclose(tail[:-1] - tail[1:], cell, atol=1e-12)

    def test_forward_plus_tail_is_total(self):
        g = grid01(21)
        v = np.sin(np.linspace(0, 3, g.n_nodes))
        total = trapezoid_integral(GridPath(g, v))
        assert np.allclose(cumtrapz(v, g.dt) + tail_cumtrapz(v, g.dt), total, atol=1e-13)
