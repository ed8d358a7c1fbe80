"""Uniform time grids, grid-sampled paths and trapezoid quadrature.

Everything downstream (both equilibrium solvers and the cohort simulator)
integrates with the composite trapezoid rule on a shared uniform grid, so
all quadrature errors are O(N^-2) and cancel between routes that use the
same integrand samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j T / N, j = 0..N."""

    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")
        if not (self.T > 0):
            raise ValueError(f"T must be > 0, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the node equal to ``t``; raises if t is not a node."""
        j = int(round(t / self.dt))
        if j < 0 or j > self.n_steps or abs(j * self.dt - t) > tol * max(1.0, self.T):
            raise ValueError(f"t={t} is not a node of the grid (T={self.T}, N={self.n_steps})")
        return j


@dataclass(frozen=True)
class GridPath:
    """A real-valued function sampled on a TimeGrid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"path length {values.shape} does not match grid with {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path contains non-finite entries")

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "GridPath":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def __len__(self) -> int:
        return len(self.values)


def trapezoid_integral(path: GridPath, from_index: int = 0, to_index: int | None = None) -> float:
    """Trapezoid value of the path integral over [t_from, t_to].

    Exact for integrands that are piecewise linear between grid nodes.
    """
    v = path.values
    n = path.grid.n_steps
    if to_index is None:
        to_index = n
    if not (0 <= from_index <= to_index <= n):
        raise IndexError(f"invalid index range [{from_index}, {to_index}] for N={n}")
    if from_index == to_index:
        return 0.0
    seg = v[from_index : to_index + 1]
    return float(path.grid.dt * (seg.sum() - 0.5 * (seg[0] + seg[-1])))


def cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoid integral from node 0 along axis 0; output[0] = 0."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0, out=out[1:])
    return out


def tail_cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid integral from each node to the final node; output[-1] = 0."""
    forward = cumtrapz(values, dt)
    return forward[-1] - forward


def cumulative_tail_integral(path: GridPath) -> GridPath:
    """Path of tail integrals I(t_j) = integral of the path over [t_j, T]."""
    return GridPath(path.grid, tail_cumtrapz(path.values, path.grid.dt))
