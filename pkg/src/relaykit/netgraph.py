"""State-dependent communication graph: adjacency, Laplacian, and connectivity.

Nodes are the concatenation of task-agent and relay-agent positions (tasks
first).  Edge weights are pairwise channel rates, so the graph, its Laplacian
and the algebraic connectivity are all functions of the team configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .channel import ChannelParams, ChannelCurve, derive_curve, rate

# lambda2 above this counts as connected; below it is eigen-solver noise.
CONNECTIVITY_TOL = 1e-8

_POWER_RESOLUTION_DBM = 0.01


@dataclass(frozen=True)
class TeamConfig:
    """Planar positions of the team: N task agents and M relay agents."""

    task_positions: np.ndarray
    comm_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        tasks = np.atleast_2d(np.asarray(self.task_positions, dtype=float))
        comms = np.asarray(self.comm_positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "task_positions", tasks)
        object.__setattr__(self, "comm_positions", comms)
        if tasks.shape[0] < 2 or tasks.shape[1] != 2:
            raise ValueError(f"need at least 2 task agents in the plane, got shape {tasks.shape}")
        if not (np.isfinite(tasks).all() and np.isfinite(comms).all()):
            raise ValueError("positions must be finite")

    @property
    def n_tasks(self) -> int:
        return self.task_positions.shape[0]

    @property
    def n_comm(self) -> int:
        return self.comm_positions.shape[0]

    @property
    def positions(self) -> np.ndarray:
        """All node positions, tasks first."""
        return np.vstack([self.task_positions, self.comm_positions])


@dataclass(frozen=True)
class RateGraph:
    """Symmetric weighted adjacency of pairwise rates in [0, 1]."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be square, got shape {w.shape}")
        if not np.allclose(w, w.T, atol=1e-12):
            raise ValueError("weights must be symmetric")
        if np.abs(np.diag(w)).max(initial=0.0) > 0.0:
            raise ValueError("weights must have a zero diagonal")
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("weights must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def adjacency(config: TeamConfig, curve: ChannelCurve) -> RateGraph:
    """Rate-weighted adjacency over the concatenated node list."""
    pos = config.positions
    d = pairwise_distances(pos)
    w = rate(d, curve)
    np.fill_diagonal(w, 0.0)
    return RateGraph(weights=w)


def laplacian(g: RateGraph) -> np.ndarray:
    """Weighted graph Laplacian diag(A 1) - A."""
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def algebraic_connectivity(g: RateGraph) -> float:
    """Second-smallest Laplacian eigenvalue, clamped at zero.

    Positive iff the graph is connected; small negative values are
    eigen-solver noise and map to 0.
    """
    if g.size < 2:
        raise ValueError("algebraic connectivity needs at least 2 nodes")
    vals = np.linalg.eigvalsh(laplacian(g))
    return max(float(vals[1]), 0.0)


def is_connected(g: RateGraph) -> bool:
    """Graph traversal over strictly-positive-weight edges."""
    if g.size <= 1:
        return True
    sparse = csr_matrix(g.weights > 0.0)
    n_comp, _ = connected_components(sparse, directed=False)
    return n_comp == 1


def _connected_at_power(config: TeamConfig, params: ChannelParams, power_dbm: float) -> bool:
    curve = derive_curve(params.with_power(power_dbm))
    return is_connected(adjacency(config, curve))


def min_connecting_power(
    config: TeamConfig, params: ChannelParams, p_max: float
) -> float | None:
    """Least transmit power in [default, p_max] that connects the team.

    Connectivity is monotone in transmit power (the cutoff distance grows
    with it), so the threshold is found by bisection to 0.01 dBm.  Returns
    the default power unchanged if already connected, None if the team is
    still disconnected at p_max.
    """
    p_lo = params.transmit_power_dbm
    if p_max < p_lo:
        raise ValueError(f"p_max {p_max} dBm below default power {p_lo} dBm")
    if _connected_at_power(config, params, p_lo):
        return p_lo
    if not _connected_at_power(config, params, p_max):
        return None
    p_hi = p_max
    while p_hi - p_lo > _POWER_RESOLUTION_DBM:
        mid = 0.5 * (p_lo + p_hi)
        if _connected_at_power(config, params, mid):
            p_hi = mid
        else:
            p_lo = mid
    return p_hi
