"""Counter-based Gaussian increment streams for reproducible Monte Carlo.

Each (seed, replication, agent) triple keys an independent Philox counter
stream, so a cohort simulation produces bit-identical noise no matter how
replications or agents are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

_U32 = 2**32
_U64 = 2**64


def philox_key(seed: int, replication: int, agent: int) -> np.ndarray:
    """128-bit Philox key packing (seed, replication, agent)."""
    if not (0 <= seed < _U64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not (0 <= replication < _U32):
        raise ValueError(f"replication must be in [0, 2^32), got {replication}")
    if not (0 <= agent < _U32):
        raise ValueError(f"agent must be in [0, 2^32), got {agent}")
    hi = np.uint64(replication) << np.uint64(32) | np.uint64(agent)
    return np.array([np.uint64(seed), hi], dtype=np.uint64)


def stream(seed: int, replication: int = 0, agent: int = 0) -> np.random.Generator:
    """Deterministic generator of i.i.d. draws keyed by (seed, replication, agent)."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed, replication, agent)))


def normal_increments(seed: int, replication: int, agent: int, n: int) -> np.ndarray:
    """n i.i.d. standard normal draws from the keyed stream."""
    return stream(seed, replication, agent).standard_normal(n)


def brownian_path(seed: int, replication: int, agent: int, n_steps: int, dt: float) -> np.ndarray:
    """Brownian motion sampled on the grid; W[0] = 0, length n_steps + 1."""
    xi = normal_increments(seed, replication, agent, n_steps)
    w = np.empty(n_steps + 1)
    w[0] = 0.0
    np.cumsum(np.sqrt(dt) * xi, out=w[1:])
    return w
