import numpy as np
import pytest

from relaykit.channel import ChannelParams, derive_curve, rate
from relaykit.expert import (
    ExpertParams,
    InfeasibleInitError,
    mst_feasible_init,
    optimize,
    orthonormal_complement_basis,
    sdp_step,
)
from relaykit.netgraph import (
    CONNECTIVITY_TOL,
    TeamConfig,
    adjacency,
    algebraic_connectivity,
)


@pytest.fixture(scope="module")
def curve():
    return derive_curve(ChannelParams())


def lam2(tasks, comm, curve):
    return algebraic_connectivity(adjacency(TeamConfig(tasks, comm), curve))


class TestComplementBasis:
    def test_orthonormal_and_kills_ones(self):
        for n in (2, 3, 5, 9):
            p = orthonormal_complement_basis(n)
            assert p.shape == (n, n - 1)
            assert np.allclose(p.T @ p, np.eye(n - 1), atol=1e-12)
            assert np.allclose(p.T @ np.ones(n), 0.0, atol=1e-12)

    def test_deterministic(self):
        assert np.array_equal(
            orthonormal_complement_basis(6), orthonormal_complement_basis(6)
        )

    def test_rejects_single_node(self):
        with pytest.raises(ValueError):
            orthonormal_complement_basis(1)

    def test_projection_preserves_positive_spectrum(self, curve):
        # the projected Laplacian drops exactly the trivial zero eigenvalue
        cfg = TeamConfig(task_positions=[[0.0, 0.0], [20.0, 0.0], [5.0, 12.0]])
        g = adjacency(cfg, curve)
        lap = np.diag(g.weights.sum(axis=1)) - g.weights
        p = orthonormal_complement_basis(3)
        proj = p.T @ lap @ p
        full = np.sort(np.linalg.eigvalsh(lap))
        reduced = np.sort(np.linalg.eigvalsh(proj))
        assert np.allclose(full[1:], reduced, atol=1e-10)


class TestMstInit:
    def test_no_relays_when_edges_short(self, curve):
        tasks = np.array([[0.0, 0.0], [20.0, 0.0], [10.0, 15.0]])
        assert mst_feasible_init(tasks, curve).shape == (0, 2)

    def test_single_long_edge_gets_midpoint(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [1.67 * d_c, 0.0]])
        relays = mst_feasible_init(tasks, curve)
        assert relays.shape == (1, 2)
        assert np.allclose(relays[0], [0.835 * d_c, 0.0], atol=1e-9)

    def test_two_and_a_half_cutoffs_get_two_relays(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.5 * d_c, 0.0]])
        relays = mst_feasible_init(tasks, curve)
        assert relays.shape == (2, 2)
        xs = np.sort(relays[:, 0])
        assert np.allclose(xs, [2.5 * d_c / 3, 2 * 2.5 * d_c / 3], atol=1e-9)

    def test_exact_multiple_adds_extra_relay(self, curve):
        # spacing exactly at the cutoff carries zero rate, so the chain
        # must subdivide one level further
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.0 * d_c, 0.0]])
        relays = mst_feasible_init(tasks, curve)
        assert relays.shape == (2, 2)
        assert lam2(tasks, relays, curve) > CONNECTIVITY_TOL

    def test_random_teams_always_connected(self, curve):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(2, 7))
            tasks = rng.uniform(-120.0, 120.0, size=(n, 2))
            relays = mst_feasible_init(tasks, curve)
            assert lam2(tasks, relays, curve) > CONNECTIVITY_TOL


class TestSdpStep:
    def test_no_relays_short_circuits(self, curve):
        cfg = TeamConfig(task_positions=[[0.0, 0.0], [15.0, 0.0]])
        pos, gamma = sdp_step(cfg, curve, ExpertParams())
        assert pos.shape == (0, 2)
        assert gamma == pytest.approx(
            algebraic_connectivity(adjacency(cfg, curve)), abs=1e-12
        )

    def test_respects_trust_region(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.5 * d_c, 0.0], [1.2 * d_c, 1.8 * d_c]])
        relays = mst_feasible_init(tasks, curve)
        cfg = TeamConfig(tasks, relays)
        for delta_max in (2.5, 0.7):
            params = ExpertParams(trust_region_m=delta_max)
            new_pos, _ = sdp_step(cfg, curve, params)
            assert np.max(np.abs(new_pos - relays)) <= delta_max + 1e-6

    def test_gamma_at_least_incumbent(self, curve):
        # zero displacement is always feasible, so the certified bound can
        # never fall below the current connectivity
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [1.8 * d_c, 0.6 * d_c]])
        relays = mst_feasible_init(tasks, curve)
        cfg = TeamConfig(tasks, relays)
        lam = algebraic_connectivity(adjacency(cfg, curve))
        _, gamma = sdp_step(cfg, curve, ExpertParams())
        assert gamma >= lam - 1e-7

    def test_stationary_at_symmetric_optimum(self, curve):
        # relay already at the midpoint of two tasks: the linearized model
        # sees no improvement and the minimum-norm step stays put
        d_c = curve.cutoff_distance_m
        half = 0.835 * d_c
        tasks = np.array([[-half, 0.0], [half, 0.0]])
        cfg = TeamConfig(tasks, np.array([[0.0, 0.0]]))
        new_pos, gamma = sdp_step(cfg, curve, ExpertParams())
        assert np.linalg.norm(new_pos[0]) < 0.05
        assert gamma == pytest.approx(rate(half, curve), abs=1e-5)


class TestOptimize:
    def test_two_task_line_reaches_midpoint(self, curve):
        d_c = curve.cutoff_distance_m
        sep = 1.67 * d_c
        tasks = np.array([[-sep / 2, 0.0], [sep / 2, 0.0]])
        sol = optimize(tasks, curve, init=np.array([[4.0, 3.0]]))
        # the optimum is the midpoint: the only positive-weight edges are
        # relay-task, and the path Laplacian lambda2 equals the weaker rate
        assert np.linalg.norm(sol.comm_positions[0]) < 0.5
        assert sol.lambda2 == pytest.approx(rate(sep / 2, curve), abs=1e-3)
        assert abs(sol.gamma - sol.lambda2) < 5e-3

    def test_improves_over_seed(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.2 * d_c, 0.0], [1.1 * d_c, 2.0 * d_c]])
        seed = mst_feasible_init(tasks, curve)
        seed_lam = lam2(tasks, seed, curve)
        sol = optimize(tasks, curve)
        assert sol.lambda2 >= seed_lam - 1e-9
        assert sol.lambda2 > seed_lam + 1e-3  # strictly better here, not just equal

    def test_trace_monotone_and_counts(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.2 * d_c, 0.0], [1.1 * d_c, 2.0 * d_c]])
        sol = optimize(tasks, curve)
        trace = np.asarray(sol.gamma_trace)
        assert len(trace) == sol.iterations + 1
        assert np.all(np.diff(trace) >= -1e-6)
        assert trace[-1] == pytest.approx(sol.lambda2, abs=1e-12)

    def test_disconnected_init_rejected(self, curve):
        d_c = curve.cutoff_distance_m
        sep = 1.67 * d_c
        tasks = np.array([[-sep / 2, 0.0], [sep / 2, 0.0]])
        with pytest.raises(InfeasibleInitError):
            optimize(tasks, curve, init=np.array([[200.0, 200.0]]))
        with pytest.raises(InfeasibleInitError):
            optimize(tasks, curve, init=np.zeros((0, 2)))

    def test_no_relays_needed_is_a_fixed_point(self, curve):
        tasks = np.array([[0.0, 0.0], [18.0, 0.0]])
        sol = optimize(tasks, curve)
        assert sol.comm_positions.shape == (0, 2)
        assert sol.iterations == 0
        assert sol.lambda2 == pytest.approx(2.0 * rate(18.0, curve), abs=1e-10)

    def test_max_iterations_respected(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.2 * d_c, 0.0], [1.1 * d_c, 2.0 * d_c]])
        sol = optimize(tasks, curve, params=ExpertParams(max_iterations=2))
        assert sol.iterations <= 2

    def test_translation_equivariance(self, curve):
        d_c = curve.cutoff_distance_m
        shift = np.array([12.5, -7.25])
        cases = [
            np.array([[-0.835 * d_c, 0.0], [0.835 * d_c, 0.0]]),
            np.array(
                [
                    [0.0, 0.0],
                    [2.6 * d_c, 0.3 * d_c],
                    [0.9 * d_c, 2.3 * d_c],
                    [-1.4 * d_c, 1.1 * d_c],
                ]
            ),
        ]
        for tasks in cases:
            base = optimize(tasks, curve)
            moved = optimize(tasks + shift, curve)
            assert moved.comm_positions.shape == base.comm_positions.shape
            assert np.allclose(moved.comm_positions, base.comm_positions + shift, atol=1e-3)
            assert moved.lambda2 == pytest.approx(base.lambda2, abs=1e-6)

    def test_translation_invariant_connectivity_on_flat_optimum(self, curve):
        # chains of relays leave lambda2 flat along the chain direction, so
        # final positions may wander within that manifold; the achieved
        # connectivity itself must still match
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.2 * d_c, 0.0], [1.1 * d_c, 2.0 * d_c]])
        shift = np.array([12.5, -7.25])
        base = optimize(tasks, curve)
        moved = optimize(tasks + shift, curve)
        assert moved.lambda2 == pytest.approx(base.lambda2, abs=1e-6)

    def test_deterministic(self, curve):
        d_c = curve.cutoff_distance_m
        tasks = np.array([[0.0, 0.0], [2.2 * d_c, 0.0], [1.1 * d_c, 2.0 * d_c]])
        a = optimize(tasks, curve)
        b = optimize(tasks, curve)
        assert a.iterations == b.iterations
        assert np.array_equal(a.comm_positions, b.comm_positions)
        assert a.lambda2 == b.lambda2


def test_expert_params_validation():
    with pytest.raises(ValueError):
        ExpertParams(trust_region_m=0.0)
    with pytest.raises(ValueError):
        ExpertParams(max_iterations=0)
