"""Dataset generation, scenario suites, statistics, timing, and patrol simulation.

Two interchangeable planners are exercised everywhere: the optimization
expert and the image-based CNN planner.  Both consume task positions and
produce relay positions plus the transmit power required to connect the
team, which is the common currency of every evaluation here.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cnn_runtime
from .channel import ChannelCurve, ChannelParams, derive_curve
from .expert import ExpertParams, mst_feasible_init, optimize
from .imaging import (
    GridSpec,
    IntensityImage,
    RENDER_MARGIN_PX,
    load_png,
    render,
    save_png,
)
from .netgraph import (
    CONNECTIVITY_TOL,
    TeamConfig,
    adjacency,
    algebraic_connectivity,
    min_connecting_power,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
MIN_TASK_SEPARATION_M = 2.5
_MAX_SAMPLING_REJECTIONS = 1000

DEFAULT_P_MAX_DBM = 30.0


class SamplingError(RuntimeError):
    """Task sampling kept violating the separation/margin rules."""


@dataclass(frozen=True)
class DatasetSample:
    """One manifest record: the generating seed, the configurations, and
    the rendered image pair on disk."""

    id: str
    seed: int
    task_positions: np.ndarray
    expert_comm_positions: np.ndarray
    transmit_power_dbm: float
    lambda2: float
    input_image: str
    target_image: str
    meters_per_pixel: float
    resolution_px: int

    def to_json(self) -> str:
        record = {
            "id": self.id,
            "seed": self.seed,
            "task_positions": np.asarray(self.task_positions).tolist(),
            "expert_comm_positions": np.asarray(self.expert_comm_positions).tolist(),
            "transmit_power_dbm": self.transmit_power_dbm,
            "lambda2": self.lambda2,
            "input_image": self.input_image,
            "target_image": self.target_image,
            "meters_per_pixel": self.meters_per_pixel,
            "resolution_px": self.resolution_px,
        }
        return json.dumps(record)

    @staticmethod
    def from_json(line: str) -> "DatasetSample":
        record = json.loads(line)
        return DatasetSample(
            id=record["id"],
            seed=record["seed"],
            task_positions=np.asarray(record["task_positions"], dtype=float).reshape(-1, 2),
            expert_comm_positions=np.asarray(
                record["expert_comm_positions"], dtype=float
            ).reshape(-1, 2),
            transmit_power_dbm=record["transmit_power_dbm"],
            lambda2=record["lambda2"],
            input_image=record["input_image"],
            target_image=record["target_image"],
            meters_per_pixel=record["meters_per_pixel"],
            resolution_px=record["resolution_px"],
        )


@dataclass(frozen=True)
class PlanResult:
    comm_positions: np.ndarray
    power_dbm: float | None
    lambda2: float


class ExpertPlanner:
    """Optimization-based planner; connected at the default power by construction."""

    name = "expert"

    def __init__(
        self,
        params: ChannelParams | None = None,
        expert_params: ExpertParams | None = None,
    ):
        self.params = params or ChannelParams()
        self.expert_params = expert_params or ExpertParams()
        self.curve = derive_curve(self.params)

    def plan(self, task_positions) -> PlanResult:
        solution = optimize(task_positions, self.curve, self.expert_params)
        return PlanResult(
            comm_positions=solution.comm_positions,
            power_dbm=self.params.transmit_power_dbm,
            lambda2=solution.lambda2,
        )


class CnnPlanner:
    """Image planner: render tasks, run the autoencoder, extract relays.

    The grid auto-sizes to the smallest admissible resolution that fits the
    tasks unless a fixed GridSpec is given.
    """

    name = "cnn"

    def __init__(
        self,
        weights: cnn_runtime.ModelWeights,
        params: ChannelParams | None = None,
        grid: GridSpec | None = None,
        p_max: float = DEFAULT_P_MAX_DBM,
        meters_per_pixel: float = 1.25,
    ):
        self.weights = weights
        self.params = params or ChannelParams()
        self.grid = grid
        self.p_max = p_max
        self.meters_per_pixel = meters_per_pixel

    def plan(self, task_positions) -> PlanResult:
        tasks = np.atleast_2d(np.asarray(task_positions, dtype=float))
        grid = self.grid or fit_grid(tasks, self.meters_per_pixel)
        relays, power = cnn_runtime.plan_inference(
            tasks, self.weights, grid, self.params, self.p_max
        )
        if power is None:
            return PlanResult(comm_positions=relays, power_dbm=None, lambda2=0.0)
        curve = derive_curve(self.params.with_power(power))
        lam = algebraic_connectivity(adjacency(TeamConfig(tasks, relays), curve))
        return PlanResult(comm_positions=relays, power_dbm=power, lambda2=lam)


def make_planner(
    kind: str,
    weights_path=None,
    params: ChannelParams | None = None,
    expert_params: ExpertParams | None = None,
    p_max: float = DEFAULT_P_MAX_DBM,
):
    """Planner factory for the CLI: 'expert' or 'cnn' (with a weight file)."""
    if kind == "expert":
        return ExpertPlanner(params=params, expert_params=expert_params)
    if kind == "cnn":
        if weights_path is None:
            raise ValueError("the cnn planner requires a weight file")
        weights = cnn_runtime.load_weights_file(weights_path)
        return CnnPlanner(weights, params=params, p_max=p_max)
    raise ValueError(f"unknown planner kind {kind!r}")


def fit_grid(positions, meters_per_pixel: float = 1.25, margin_px: float = 6.0) -> GridSpec:
    """Smallest admissible grid that contains the positions with margin."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    reach_px = np.abs(pos).max(initial=0.0) / meters_per_pixel
    needed = 2.0 * (reach_px + margin_px) + 1.0
    resolution = 256
    while resolution < needed:
        resolution += 64
    return GridSpec(resolution_px=resolution, meters_per_pixel=meters_per_pixel)


def sample_task_config(
    n: int, grid: GridSpec, seed: int, curve: ChannelCurve | None = None
) -> np.ndarray:
    """Uniform task positions over the centered square of half-side extent/4.

    A draw is rejected wholesale when two tasks come closer than 2.5 m or
    when the MST-augmented team would not fit the render margin.
    """
    if n < 2:
        raise ValueError("need at least 2 task agents")
    if curve is None:
        curve = derive_curve(ChannelParams())
    rng = np.random.default_rng(seed)
    half = grid.extent_m / 4.0
    margin_m = (RENDER_MARGIN_PX + 0.5) * grid.meters_per_pixel
    limit = grid.extent_m / 2.0 - margin_m
    for _ in range(_MAX_SAMPLING_REJECTIONS):
        pts = rng.uniform(-half, half, size=(n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        if dist.min() < MIN_TASK_SEPARATION_M:
            continue
        relays = mst_feasible_init(pts, curve)
        team = np.vstack([pts, relays]) if relays.size else pts
        if np.abs(team).max() > limit:
            continue
        return pts
    raise SamplingError(f"no valid {n}-task draw after {_MAX_SAMPLING_REJECTIONS} attempts")


def generate_sample(
    n: int,
    seed: int,
    out_dir: Path,
    sample_id: str,
    curve: ChannelCurve | None = None,
    expert_params: ExpertParams | None = None,
    grid: GridSpec | None = None,
) -> DatasetSample:
    """Sample tasks, optimize relays, render the image pair, write PNGs."""
    out_dir = Path(out_dir)
    if curve is None:
        curve = derive_curve(ChannelParams())
    if grid is None:
        grid = GridSpec()
    tasks = sample_task_config(n, grid, seed, curve)
    solution = optimize(tasks, curve, expert_params)
    if solution.lambda2 <= CONNECTIVITY_TOL:
        raise RuntimeError(f"optimized team is not connected (lambda2 = {solution.lambda2:.3e})")

    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    input_rel = f"images/{sample_id}_input.png"
    target_rel = f"images/{sample_id}_target.png"
    save_png(render(tasks, grid), out_dir / input_rel)
    save_png(render(solution.comm_positions, grid), out_dir / target_rel)
    return DatasetSample(
        id=sample_id,
        seed=seed,
        task_positions=tasks,
        expert_comm_positions=solution.comm_positions,
        transmit_power_dbm=curve.params.transmit_power_dbm,
        lambda2=solution.lambda2,
        input_image=input_rel,
        target_image=target_rel,
        meters_per_pixel=grid.meters_per_pixel,
        resolution_px=grid.resolution_px,
    )


def generate_dataset(
    out_dir,
    count: int,
    agents_min: int = 2,
    agents_max: int = 6,
    base_seed: int = 0,
    curve: ChannelCurve | None = None,
    expert_params: ExpertParams | None = None,
    grid: GridSpec | None = None,
    progress: bool = False,
) -> list[DatasetSample]:
    """Generate ``count`` samples with per-sample seeds base_seed + index.

    Samples whose optimization fails are discarded and reseeded; the number
    of discards is logged.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    discarded = 0
    for index in range(count):
        seed = base_seed + index
        attempt_seed = seed
        while True:
            rng = np.random.default_rng(attempt_seed)
            n = int(rng.integers(agents_min, agents_max + 1))
            task_seed = int(rng.integers(0, 2**63 - 1))
            try:
                sample = generate_sample(
                    n,
                    task_seed,
                    out_dir,
                    sample_id=f"{index:06d}",
                    curve=curve,
                    expert_params=expert_params,
                    grid=grid,
                )
                break
            except Exception as err:  # discard and reseed
                discarded += 1
                logger.warning("sample %d (seed %d) discarded: %s", index, attempt_seed, err)
                attempt_seed += 0x9E3779B9
        samples.append(sample)
        if progress and (index + 1) % 50 == 0:
            logger.info("generated %d/%d samples", index + 1, count)
    with open(out_dir / MANIFEST_NAME, "w") as handle:
        for sample in samples:
            handle.write(sample.to_json() + "\n")
    if discarded:
        logger.warning("discarded %d samples during generation", discarded)
    return samples


def load_dataset(path) -> list[DatasetSample]:
    path = Path(path)
    with open(path / MANIFEST_NAME) as handle:
        return [DatasetSample.from_json(line) for line in handle if line.strip()]


@dataclass(frozen=True)
class ScenarioRow:
    parameter: float
    planner: str
    n_relays: int
    lambda2: float
    power_dbm: float | None


def run_line_scenario(separations, planner) -> list[ScenarioRow]:
    """Two tasks at (-s/2, 0) and (s/2, 0) for each separation s."""
    rows = []
    for s in separations:
        tasks = np.array([[-s / 2.0, 0.0], [s / 2.0, 0.0]])
        result = planner.plan(tasks)
        rows.append(
            ScenarioRow(
                parameter=float(s),
                planner=planner.name,
                n_relays=result.comm_positions.shape[0],
                lambda2=result.lambda2,
                power_dbm=result.power_dbm,
            )
        )
    return rows


def run_circle_scenario(radii, n_tasks: int, planner) -> list[ScenarioRow]:
    """Tasks equally spaced on a circle of each radius."""
    if n_tasks < 3:
        raise ValueError("circle scenario needs at least 3 tasks")
    angles = 2.0 * math.pi * np.arange(n_tasks) / n_tasks
    rows = []
    for r in radii:
        tasks = np.column_stack([r * np.cos(angles), r * np.sin(angles)])
        result = planner.plan(tasks)
        rows.append(
            ScenarioRow(
                parameter=float(r),
                planner=planner.name,
                n_relays=result.comm_positions.shape[0],
                lambda2=result.lambda2,
                power_dbm=result.power_dbm,
            )
        )
    return rows


@dataclass
class EvalStats:
    """Planner performance over a dataset, mirroring the reference metrics:
    extra transmit power to connect, and relay-count difference versus the
    expert restricted to default-power cases."""

    powers_dbm: list[float] = field(default_factory=list)
    agent_diffs: list[int] = field(default_factory=list)
    unconnected: int = 0

    @property
    def power_mean(self) -> float:
        return float(np.mean(self.powers_dbm)) if self.powers_dbm else math.nan

    @property
    def power_variance(self) -> float:
        return float(np.var(self.powers_dbm)) if self.powers_dbm else math.nan

    @property
    def diff_mean(self) -> float:
        return float(np.mean(self.agent_diffs)) if self.agent_diffs else math.nan

    @property
    def diff_std(self) -> float:
        return float(np.std(self.agent_diffs)) if self.agent_diffs else math.nan

    def power_histogram(self) -> list[tuple[float, float]]:
        """1 dBm bins over the observed power range, masses summing to 1."""
        if not self.powers_dbm:
            return []
        lo = math.floor(min(self.powers_dbm))
        hi = math.floor(max(self.powers_dbm)) + 1
        edges = np.arange(lo, hi + 1, 1.0)
        counts, _ = np.histogram(self.powers_dbm, bins=edges)
        total = counts.sum()
        return [(float(edges[i]), counts[i] / total) for i in range(len(counts))]

    def diff_histogram(self) -> list[tuple[int, float]]:
        """Unit bins of (#planner relays - #expert relays), masses summing to 1."""
        if not self.agent_diffs:
            return []
        lo, hi = min(self.agent_diffs), max(self.agent_diffs)
        bins = list(range(lo, hi + 1))
        total = len(self.agent_diffs)
        return [(b, self.agent_diffs.count(b) / total) for b in bins]


def eval_statistics(samples: list[DatasetSample], planner) -> EvalStats:
    """Run the planner on each sample's tasks and compare with the expert."""
    stats = EvalStats()
    for sample in samples:
        result = planner.plan(sample.task_positions)
        if result.power_dbm is None:
            stats.unconnected += 1
            continue
        stats.powers_dbm.append(result.power_dbm)
        if result.power_dbm <= sample.transmit_power_dbm + 1e-9:
            diff = result.comm_positions.shape[0] - sample.expert_comm_positions.shape[0]
            stats.agent_diffs.append(int(diff))
    return stats


def _bench_instance(total_agents: int, curve: ChannelCurve, rng) -> np.ndarray:
    """Hub-and-spoke task set whose MST augmentation realizes the total.

    One hub task plus k rim tasks; spoke i is (r_i + 0.5) cutoff distances
    long (jittered within the same relay count), so it takes exactly r_i
    relays and the team totals 1 + k + sum(r_i) agents.  k stays at most 5
    so rim-to-rim chords always exceed the spokes and the MST keeps the
    star shape.
    """
    if total_agents < 3:
        raise ValueError("benchmark teams need at least 3 total agents")
    k = min(5, (total_agents - 1) // 2)
    need = total_agents - 1 - k
    base, extra = divmod(need, k)
    counts = [base + (1 if i < extra else 0) for i in range(k)]
    d_c = curve.cutoff_distance_m
    phase = rng.uniform(0.0, 2.0 * math.pi)
    pts = [np.zeros(2)]
    for i, r in enumerate(counts):
        length = (r + 0.5 + rng.uniform(-0.12, 0.12)) * d_c
        angle = phase + 2.0 * math.pi * i / k
        pts.append(length * np.array([math.cos(angle), math.sin(angle)]))
    return np.asarray(pts)


@dataclass(frozen=True)
class BenchRow:
    agents: int
    planner: str
    mean_s: float
    std_s: float


def bench_timing(
    team_sizes,
    trials: int,
    planners,
    params: ChannelParams | None = None,
    seed: int = 0,
) -> list[BenchRow]:
    """Wall-time comparison of planners over controlled team sizes.

    Each row aggregates ``trials`` runs on jittered instances of the given
    total agent count.  Planner work is measured end to end in memory; no
    image or file I/O is inside the timed section.
    """
    if trials < 3:
        raise ValueError("need at least 3 trials")
    params = params or ChannelParams()
    curve = derive_curve(params)
    rows = []
    for size in team_sizes:
        instances = [
            _bench_instance(size, curve, np.random.default_rng(seed + 1000 * size + t))
            for t in range(trials)
        ]
        for name, planner in planners:
            times = []
            for tasks in instances:
                start = time.perf_counter()
                planner.plan(tasks)
                times.append(time.perf_counter() - start)
            rows.append(
                BenchRow(
                    agents=size,
                    planner=name,
                    mean_s=float(np.mean(times)),
                    std_s=float(np.std(times)),
                )
            )
    return rows


class _WaypointWalker:
    """Constant-speed motion along a cyclic polyline."""

    def __init__(self, waypoints: np.ndarray):
        self.waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
        self.position = self.waypoints[0].copy()
        self._next = 1 % len(self.waypoints)

    def advance(self, distance: float) -> np.ndarray:
        remaining = distance
        while remaining > 1e-12 and len(self.waypoints) > 1:
            target = self.waypoints[self._next]
            leg = target - self.position
            leg_len = float(np.linalg.norm(leg))
            if leg_len <= remaining:
                self.position = target.copy()
                self._next = (self._next + 1) % len(self.waypoints)
                remaining -= leg_len
                if leg_len == 0.0:
                    break
            else:
                self.position = self.position + leg * (remaining / leg_len)
                remaining = 0.0
        return self.position.copy()


def square_patrol(n_tasks: int, side_m: float) -> list[np.ndarray]:
    """Per-task cyclic waypoint loops around a square perimeter, with the
    tasks staggered at equal arc-length offsets."""
    h = side_m / 2.0
    corners = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    perimeter = 4.0 * side_m

    def point_at(s: float) -> tuple[np.ndarray, int]:
        s = s % perimeter
        edge = int(s // side_m)
        frac = (s - edge * side_m) / side_m
        a = corners[edge]
        b = corners[(edge + 1) % 4]
        return a + frac * (b - a), (edge + 1) % 4

    loops = []
    for i in range(n_tasks):
        start, next_corner = point_at(i * perimeter / n_tasks)
        loop = [start] + [corners[(next_corner + j) % 4] for j in range(4)]
        loops.append(np.asarray(loop))
    return loops


def greedy_match(relays: np.ndarray, targets: np.ndarray) -> list[int | None]:
    """Greedy minimum-distance assignment of targets to relays.

    Repeatedly pairs the globally closest unmatched (relay, target); returns
    per-relay target indices (None for unassigned relays when targets are
    scarce).  When counts match the result is a permutation.
    """
    n_r, n_t = relays.shape[0], targets.shape[0]
    assignment: list[int | None] = [None] * n_r
    if n_r == 0 or n_t == 0:
        return assignment
    d = np.linalg.norm(relays[:, None, :] - targets[None, :, :], axis=-1)
    free_r = set(range(n_r))
    free_t = set(range(n_t))
    while free_r and free_t:
        best = min(((d[r, t], r, t) for r in free_r for t in free_t))
        _, r, t = best
        assignment[r] = t
        free_r.remove(r)
        free_t.remove(t)
    return assignment


@dataclass(frozen=True)
class PatrolTick:
    t_s: float
    lambda2: float
    task_positions: np.ndarray
    relay_positions: np.ndarray


def simulate_patrol(
    waypoint_loops: list[np.ndarray],
    planner,
    transmit_power_dbm: float,
    duration_s: float,
    task_speed_mps: float = 1.0,
    relay_speed_mps: float = 2.0,
    period_s: float = 0.5,
    params: ChannelParams | None = None,
) -> list[PatrolTick]:
    """Kinematic patrol with a periodic replanning controller.

    Tasks walk their waypoint loops at constant speed.  Every tick the world
    is shrunk by s = d_c(default) / d_c(operating power), the planner plans
    in that default-power world, and the extracted relay targets are scaled
    back; relay agents then move toward their greedily matched targets.
    lambda2 is logged at the operating power for the actual positions.
    """
    if task_speed_mps <= 0 or relay_speed_mps <= 0 or period_s <= 0 or duration_s <= 0:
        raise ValueError("speeds, period, and duration must be positive")
    if len(waypoint_loops) < 2:
        raise ValueError("need at least 2 task agents")
    params = params or ChannelParams()
    op_params = params.with_power(transmit_power_dbm)
    scale = derive_curve(params).cutoff_distance_m / derive_curve(op_params).cutoff_distance_m
    op_curve = derive_curve(op_params)

    walkers = [_WaypointWalker(loop) for loop in waypoint_loops]
    tasks = np.asarray([w.position for w in walkers])
    relays: np.ndarray | None = None

    ticks = []
    steps = int(round(duration_s / period_s))
    for step in range(steps):
        t = step * period_s
        result = planner.plan(tasks * scale)
        targets = (
            result.comm_positions / scale if result.comm_positions.size else np.zeros((0, 2))
        )
        if relays is None:
            # Relays deploy directly at the first plan; the pool size is
            # fixed for the rest of the run.
            relays = targets.copy()
        assignment = greedy_match(relays, targets)
        reach = relay_speed_mps * period_s
        for r, tgt in enumerate(assignment):
            if tgt is None:
                continue
            leg = targets[tgt] - relays[r]
            dist = float(np.linalg.norm(leg))
            relays[r] = targets[tgt] if dist <= reach else relays[r] + leg * (reach / dist)

        lam = algebraic_connectivity(adjacency(TeamConfig(tasks, relays), op_curve))
        ticks.append(
            PatrolTick(
                t_s=t, lambda2=lam, task_positions=tasks.copy(), relay_positions=relays.copy()
            )
        )
        tasks = np.asarray([w.advance(task_speed_mps * period_s) for w in walkers])
    return ticks
