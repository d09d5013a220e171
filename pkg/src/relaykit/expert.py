"""Optimization expert for relay placement.

Seeds a feasible team by subdividing over-long minimum-spanning-tree edges,
then iteratively solves a semidefinite program that maximizes a lower bound
gamma on the algebraic connectivity.  Each step linearizes the channel rates
around the current configuration and constrains relay motion to a trust
region where that linearization is valid; steps are accepted only if the
true algebraic connectivity does not decrease.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import minimum_spanning_tree

from .channel import ChannelCurve, rate_gradient
from .netgraph import (
    CONNECTIVITY_TOL,
    RateGraph,
    TeamConfig,
    adjacency,
    algebraic_connectivity,
    pairwise_distances,
)

# A step may lower the true lambda2 by at most this much and still be accepted.
ACCEPT_SLACK = 1e-6
_MAX_TRUST_HALVINGS = 5
_GOOD_STATUSES = ("Solved", "AlmostSolved")


class SdpSolverError(RuntimeError):
    """The SDP subproblem could not be solved at the current trust region."""


class InfeasibleInitError(ValueError):
    """The seed configuration is disconnected; the expert cannot start."""


@dataclass(frozen=True)
class ExpertParams:
    trust_region_m: float = 2.5
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    stall_iterations: int = 2

    def __post_init__(self):
        if not self.trust_region_m > 0:
            raise ValueError("trust_region_m must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class ExpertSolution:
    comm_positions: np.ndarray
    gamma: float
    lambda2: float
    iterations: int
    gamma_trace: list[float] = field(default_factory=list)


def orthonormal_complement_basis(n: int) -> np.ndarray:
    """n x (n-1) orthonormal basis of the subspace orthogonal to the ones vector.

    Built from the Householder reflector that maps 1/sqrt(n) onto the first
    coordinate axis, so the result is deterministic for fixed n.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 nodes, got {n}")
    u = np.full(n, 1.0 / np.sqrt(n))
    v = u - np.eye(n)[0]
    h = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    return h[:, 1:]


def mst_feasible_init(task_positions: np.ndarray, curve: ChannelCurve) -> np.ndarray:
    """Relay positions subdividing MST edges longer than the cutoff distance.

    Each edge of length l gets ceil(l / d_c) - 1 equally spaced relays; the
    resulting spacing is strictly below d_c so every chain edge carries a
    positive rate and the augmented team is connected.
    """
    tasks = np.atleast_2d(np.asarray(task_positions, dtype=float))
    if tasks.shape[0] < 2:
        raise ValueError("need at least 2 task agents")
    d_c = curve.cutoff_distance_m
    dist = pairwise_distances(tasks)
    mst = minimum_spanning_tree(dist).tocoo()
    relays = []
    for i, j in zip(mst.row, mst.col):
        length = dist[i, j]
        k = int(np.ceil(length / d_c)) - 1
        if k >= 0 and length / (k + 1) >= d_c:
            # exact multiple of d_c: spacing d_c has rate exactly 0
            k += 1
        for step in range(1, k + 1):
            t = step / (k + 1)
            relays.append((1.0 - t) * tasks[i] + t * tasks[j])
    if not relays:
        return np.zeros((0, 2))
    return np.asarray(relays)


def _lmi_coefficients(config: TeamConfig, curve: ChannelCurve):
    """Constant data of the linearized connectivity LMI.

    Returns (m0, t_mats, graph): the projected Laplacian at the current
    configuration, and per relay-coordinate the constant symmetric matrix by
    which its displacement perturbs that projection.
    """
    pos = config.positions
    n = pos.shape[0]
    n_tasks = config.n_tasks
    graph = adjacency(config, curve)
    p_basis = orthonormal_complement_basis(n)

    def project(mat: np.ndarray) -> np.ndarray:
        lap = np.diag(mat.sum(axis=1)) - mat
        out = p_basis.T @ lap @ p_basis
        return 0.5 * (out + out.T)

    m0 = project(graph.weights)
    t_mats = []
    for r in range(config.n_comm):
        i = n_tasks + r
        grads = np.zeros((n, 2))
        for j in range(n):
            if j != i:
                grads[j] = rate_gradient(pos[i], pos[j], curve)
        for k in range(2):
            s = np.zeros((n, n))
            s[i, :] = grads[:, k]
            s[:, i] = grads[:, k]
            t_mats.append(project(s))
    return m0, t_mats, graph


def _svec(mat: np.ndarray) -> np.ndarray:
    """Column-stacked upper triangle with sqrt(2)-scaled off-diagonals (the
    conic solver's vectorization of symmetric matrices)."""
    n = mat.shape[0]
    rows, cols = np.triu_indices(n)
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    vals = mat[rows, cols].astype(float)
    vals[rows != cols] *= np.sqrt(2.0)
    return vals


def _solve_cone(p_mat, q, a_mat, b_vec, cones):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    # tighter-than-default gaps keep repeat runs (and translated copies of
    # the same geometry) on the same iterate sequence
    settings.tol_gap_abs = 1e-12
    settings.tol_gap_rel = 1e-12
    settings.tol_feas = 1e-12
    solver = clarabel.DefaultSolver(
        sparse.csc_matrix(p_mat), q, sparse.csc_matrix(a_mat), b_vec, cones, settings
    )
    solution = solver.solve()
    ok = str(solution.status) in _GOOD_STATUSES
    return (np.asarray(solution.x) if ok else None), solution.status


def sdp_step(
    config: TeamConfig, curve: ChannelCurve, params: ExpertParams
) -> tuple[np.ndarray, float]:
    """One trust-region SDP step over the relay positions.

    Maximizes gamma subject to the linearized Laplacian LMI and a
    per-coordinate displacement bound of trust_region_m, then re-solves for
    the minimum-norm displacement achieving that gamma.  The tie-break
    matters: the gamma-optimal face is usually degenerate and an arbitrary
    maximizer can wander to the trust-region boundary where the
    linearization is worthless.  Returns the new relay positions and gamma
    (at least the incumbent lambda2 up to solver tolerance).
    """
    m = config.n_comm
    if m == 0:
        g = adjacency(config, curve)
        return config.comm_positions.copy(), algebraic_connectivity(g)

    m0, t_mats, _ = _lmi_coefficients(config, curve)
    n = config.n_tasks + m

    # Conic form over x = (delta_flat[, gamma]): slack of the PSD block is
    # s = svec(M0) + sum_j delta_j svec(T_j) - gamma svec(I), so the LMI
    # M0 + sum delta_j T_j >= gamma I holds iff s is in the PSD cone.
    box = np.zeros((4 * m, 2 * m))
    for j in range(2 * m):
        box[2 * j, j] = 1.0
        box[2 * j + 1, j] = -1.0
    b_box = np.full(4 * m, params.trust_region_m)
    t_cols = np.column_stack([-_svec(t) for t in t_mats])
    eye_col = _svec(np.eye(n - 1))
    cones = [clarabel.NonnegativeConeT(4 * m), clarabel.PSDTriangleConeT(n - 1)]

    a_mat = np.vstack(
        [
            np.hstack([box, np.zeros((4 * m, 1))]),
            np.hstack([t_cols, eye_col[:, None]]),
        ]
    )
    b_vec = np.concatenate([b_box, _svec(m0)])
    q = np.zeros(2 * m + 1)
    q[-1] = -1.0
    x, status = _solve_cone(sparse.csc_matrix((2 * m + 1, 2 * m + 1)), q, a_mat, b_vec, cones)
    if x is None:
        raise SdpSolverError(f"SDP step failed: solver status {status}")
    gamma = float(x[2 * m])

    # Phase 2: with gamma pinned just below its optimum, the least motion
    # that certifies it.
    gamma_fixed = gamma - max(1e-9, 1e-7 * abs(gamma))
    a2 = np.vstack([box, t_cols])
    b2 = np.concatenate([b_box, _svec(m0 - gamma_fixed * np.eye(n - 1))])
    x2, _ = _solve_cone(2.0 * np.eye(2 * m), np.zeros(2 * m), a2, b2, cones)
    delta = x2 if x2 is not None else x[: 2 * m]
    return config.comm_positions + delta.reshape(m, 2), gamma


def optimize(
    task_positions: np.ndarray,
    curve: ChannelCurve,
    params: ExpertParams | None = None,
    init: np.ndarray | None = None,
) -> ExpertSolution:
    """Locally maximize algebraic connectivity over relay positions.

    Starts from ``init`` (or the MST-feasible seed) and repeats sdp_step.
    After each step the true lambda2 is re-evaluated; a step that lowers it
    by more than ACCEPT_SLACK is retried with a halved trust region (up to
    5 halvings).  Stops after stall_iterations consecutive iterations with
    |lambda2 change| below convergence_tol, or at max_iterations.
    """
    if params is None:
        params = ExpertParams()
    tasks = np.atleast_2d(np.asarray(task_positions, dtype=float))
    comm = mst_feasible_init(tasks, curve) if init is None else np.asarray(init, dtype=float).reshape(-1, 2)
    config = TeamConfig(tasks, comm)

    lam = algebraic_connectivity(adjacency(config, curve))
    if lam <= CONNECTIVITY_TOL:
        raise InfeasibleInitError(
            f"initial configuration is disconnected (lambda2 = {lam:.3e})"
        )

    trace = [lam]
    gamma = lam
    iterations = 0
    stall = 0
    if config.n_comm > 0:
        for _ in range(params.max_iterations):
            trial = params
            accepted = None
            for _ in range(_MAX_TRUST_HALVINGS + 1):
                try:
                    new_comm, step_gamma = sdp_step(config, curve, trial)
                except SdpSolverError:
                    trial = dataclasses.replace(trial, trust_region_m=trial.trust_region_m / 2)
                    continue
                new_lam = algebraic_connectivity(
                    adjacency(TeamConfig(tasks, new_comm), curve)
                )
                if new_lam >= lam - ACCEPT_SLACK:
                    accepted = (new_comm, step_gamma, new_lam)
                    break
                trial = dataclasses.replace(trial, trust_region_m=trial.trust_region_m / 2)
            if accepted is None:
                break  # no acceptable step even at the smallest trust region
            new_comm, gamma, new_lam = accepted
            config = TeamConfig(tasks, new_comm)
            iterations += 1
            trace.append(new_lam)
            stall = stall + 1 if abs(new_lam - lam) < params.convergence_tol else 0
            lam = new_lam
            if stall >= params.stall_iterations:
                break

    return ExpertSolution(
        comm_positions=config.comm_positions,
        gamma=float(gamma),
        lambda2=float(lam),
        iterations=iterations,
        gamma_trace=trace,
    )
