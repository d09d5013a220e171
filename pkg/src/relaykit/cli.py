"""Command-line front end.

Subcommands cover the full workflow: dataset generation, one-shot planning,
canned scenario sweeps, dataset statistics, wall-time benchmarks, patrol
simulation, and a raw forward pass for integrating external training tools.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import cnn_runtime
from .channel import ChannelParams, derive_curve
from .expert import ExpertParams
from .imaging import GridSpec, load_png, save_png
from .pipeline import (
    DEFAULT_P_MAX_DBM,
    bench_timing,
    eval_statistics,
    generate_dataset,
    load_dataset,
    make_planner,
    run_circle_scenario,
    run_line_scenario,
    simulate_patrol,
    square_patrol,
)


def _channel_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("channel")
    group.add_argument("--power-dbm", type=float, default=0.0, help="transmit power (dBm)")
    group.add_argument("--noise-dbm", type=float, default=-70.0, help="noise floor (dBm)")
    group.add_argument("--gain", type=float, default=5.01e-6, help="path gain constant")
    group.add_argument("--exponent", type=float, default=2.52, help="path loss exponent")
    group.add_argument("--rate-cutoff", type=float, default=0.25, help="truncation rate")
    return parser


def _planner_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("planner")
    group.add_argument("--planner", choices=("expert", "cnn"), default="expert")
    group.add_argument("--weights", type=Path, help="weight file for the cnn planner")
    group.add_argument(
        "--p-max", type=float, default=DEFAULT_P_MAX_DBM, help="power search ceiling (dBm)"
    )
    group.add_argument("--max-iterations", type=int, default=100, help="expert iteration cap")
    return parser


def _channel_params(args) -> ChannelParams:
    return ChannelParams(
        transmit_power_dbm=args.power_dbm,
        noise_floor_dbm=args.noise_dbm,
        gain_constant=args.gain,
        path_loss_exponent=args.exponent,
        rate_cutoff=args.rate_cutoff,
    )


def _build_planner(args, params: ChannelParams):
    return make_planner(
        args.planner,
        weights_path=args.weights,
        params=params,
        expert_params=ExpertParams(max_iterations=args.max_iterations),
        p_max=args.p_max,
    )


def _parse_tasks(spec: str) -> np.ndarray:
    """Task positions from a JSON file path or an inline 'x,y;x,y' string."""
    path = Path(spec)
    if path.exists():
        pts = json.loads(path.read_text())
    else:
        pts = [[float(v) for v in pair.split(",")] for pair in spec.split(";") if pair.strip()]
    tasks = np.asarray(pts, dtype=float)
    if tasks.ndim != 2 or tasks.shape[1] != 2:
        raise SystemExit(f"could not parse task positions from {spec!r}")
    return tasks


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_generate_dataset(args) -> int:
    params = _channel_params(args)
    generate_dataset(
        args.out,
        args.count,
        agents_min=args.agents_min,
        agents_max=args.agents_max,
        base_seed=args.seed,
        curve=derive_curve(params),
        expert_params=ExpertParams(max_iterations=args.max_iterations),
        grid=GridSpec(resolution_px=args.resolution, meters_per_pixel=args.meters_per_pixel),
        progress=True,
    )
    print(f"wrote {args.count} samples to {args.out}")
    return 0


def _cmd_plan(args) -> int:
    params = _channel_params(args)
    planner = _build_planner(args, params)
    tasks = _parse_tasks(args.tasks)
    result = planner.plan(tasks)
    out = {
        "comm_positions": result.comm_positions.tolist(),
        "power_dbm": result.power_dbm,
        "lambda2": result.lambda2,
    }
    print(json.dumps(out, indent=2))
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(out, indent=2) + "\n")
    return 0


def _cmd_scenario(args) -> int:
    params = _channel_params(args)
    planner = _build_planner(args, params)
    if args.shape == "line":
        rows = run_line_scenario(_parse_floats(args.values), planner)
        param_name = "separation_m"
    else:
        rows = run_circle_scenario(_parse_floats(args.values), args.n_tasks, planner)
        param_name = "radius_m"
    _write_csv(
        args.out,
        [param_name, "planner", "n_relays", "lambda2", "power_dbm"],
        [
            (r.parameter, r.planner, r.n_relays, f"{r.lambda2:.8g}", r.power_dbm)
            for r in rows
        ],
    )
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_eval_stats(args) -> int:
    params = _channel_params(args)
    planner = _build_planner(args, params)
    samples = load_dataset(args.dataset)
    if args.limit is not None:
        samples = samples[: args.limit]
    stats = eval_statistics(samples, planner)
    out_dir = Path(args.out)
    _write_csv(
        out_dir / "power_histogram.csv",
        ["bin_lo_dbm", "fraction"],
        stats.power_histogram(),
    )
    _write_csv(
        out_dir / "agent_diff_histogram.csv",
        ["diff", "fraction"],
        stats.diff_histogram(),
    )
    summary = {
        "samples": len(samples),
        "unconnected": stats.unconnected,
        "power_mean_dbm": stats.power_mean,
        "power_variance": stats.power_variance,
        "agent_diff_mean": stats.diff_mean,
        "agent_diff_std": stats.diff_std,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_bench(args) -> int:
    params = _channel_params(args)
    planners = []
    for kind in args.planners.split(","):
        kind = kind.strip()
        planner = make_planner(
            kind,
            weights_path=args.weights,
            params=params,
            expert_params=ExpertParams(max_iterations=args.max_iterations),
            p_max=args.p_max,
        )
        planners.append((kind, planner))
    rows = bench_timing(
        [int(v) for v in args.sizes.split(",")], args.trials, planners, params, seed=args.seed
    )
    _write_csv(
        args.out,
        ["agents", "planner", "mean_s", "std_s"],
        [(r.agents, r.planner, f"{r.mean_s:.6f}", f"{r.std_s:.6f}") for r in rows],
    )
    for r in rows:
        print(f"{r.agents:3d} agents  {r.planner:8s} {r.mean_s:8.3f} s +/- {r.std_s:.3f}")
    return 0


def _cmd_simulate(args) -> int:
    # The planner always works in the default-power world; the operating
    # power enters through the world scaling inside simulate_patrol.
    default_params = ChannelParams(
        transmit_power_dbm=0.0,
        noise_floor_dbm=args.noise_dbm,
        gain_constant=args.gain,
        path_loss_exponent=args.exponent,
        rate_cutoff=args.rate_cutoff,
    )
    planner = _build_planner(args, default_params)
    loops = square_patrol(args.n_tasks, args.side)
    ticks = simulate_patrol(
        loops,
        planner,
        transmit_power_dbm=args.power_dbm,
        duration_s=args.duration,
        task_speed_mps=args.task_speed,
        relay_speed_mps=args.relay_speed,
        period_s=args.period,
        params=default_params,
    )
    n_relays = ticks[0].relay_positions.shape[0] if ticks else 0
    header = ["t_s", "lambda2"]
    header += [f"task{i}_{ax}" for i in range(args.n_tasks) for ax in ("x", "y")]
    header += [f"relay{j}_{ax}" for j in range(n_relays) for ax in ("x", "y")]
    rows = []
    for tick in ticks:
        row = [f"{tick.t_s:.3f}", f"{tick.lambda2:.8g}"]
        row += [f"{v:.3f}" for v in tick.task_positions.ravel()]
        row += [f"{v:.3f}" for v in tick.relay_positions.ravel()]
        rows.append(row)
    _write_csv(args.out, header, rows)
    connected = sum(1 for tick in ticks if tick.lambda2 > 1e-8)
    print(
        f"{len(ticks)} ticks, {n_relays} relays, "
        f"connected {connected}/{len(ticks)} ({100.0 * connected / max(len(ticks), 1):.1f}%)"
    )
    return 0


def _cmd_forward(args) -> int:
    from .imaging import IntensityImage

    weights = cnn_runtime.load_weights_file(args.weights)
    image = load_png(args.input, meters_per_pixel=args.meters_per_pixel)
    out = cnn_runtime.forward(image, weights)
    if args.output.suffix == ".npy":
        # raw unclamped float32 values; external tools compare against
        # their own forward pass at full precision, which an 8-bit PNG
        # cannot carry
        np.save(args.output, out.values.astype(np.float32))
    else:
        save_png(IntensityImage(out.grid, out.clamped()), args.output)
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    channel = _channel_parser()
    planner = _planner_parser()
    parser = argparse.ArgumentParser(
        prog="relaykit",
        description="Connectivity-aware relay placement: expert optimizer and CNN planner.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "generate-dataset", parents=[channel], help="render an expert-labeled image dataset"
    )
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--agents-min", type=int, default=2)
    p.add_argument("--agents-max", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=256, help="image side (px)")
    p.add_argument("--meters-per-pixel", type=float, default=1.25)
    p.add_argument("--max-iterations", type=int, default=100, help="expert iteration cap")
    p.set_defaults(func=_cmd_generate_dataset)

    p = sub.add_parser("plan", parents=[channel, planner], help="plan relays for given tasks")
    p.add_argument(
        "--tasks", required=True, help="JSON file of [[x,y],...] or inline 'x,y;x,y' meters"
    )
    p.add_argument("--out", type=Path, help="optional JSON output path")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("scenario", parents=[channel, planner], help="canned geometry sweeps")
    p.add_argument("shape", choices=("line", "circle"))
    p.add_argument(
        "--values", required=True, help="comma-separated separations or radii (meters)"
    )
    p.add_argument("--n-tasks", type=int, default=5, help="tasks on the circle")
    p.add_argument("--out", type=Path, required=True, help="output CSV")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser(
        "eval-stats", parents=[channel, planner], help="planner statistics over a dataset"
    )
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--limit", type=int, help="evaluate only the first N samples")
    p.set_defaults(func=_cmd_eval_stats)

    p = sub.add_parser("bench", parents=[channel], help="planner wall-time benchmark")
    p.add_argument("--sizes", required=True, help="comma-separated total agent counts")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--planners", default="expert", help="comma-separated planner kinds")
    p.add_argument("--weights", type=Path, help="weight file for the cnn planner")
    p.add_argument("--p-max", type=float, default=DEFAULT_P_MAX_DBM)
    p.add_argument(
        "--max-iterations", type=int, default=20, help="expert iteration cap (benchmark mode)"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output CSV")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser(
        "simulate", parents=[channel, planner], help="square patrol with periodic replanning"
    )
    p.add_argument("--n-tasks", type=int, default=4)
    p.add_argument("--side", type=float, default=400.0, help="patrol square side (m)")
    p.add_argument("--duration", type=float, default=60.0, help="simulated seconds")
    p.add_argument("--period", type=float, default=0.5, help="replanning period (s)")
    p.add_argument("--task-speed", type=float, default=1.0, help="task speed (m/s)")
    p.add_argument("--relay-speed", type=float, default=2.0, help="relay speed (m/s)")
    p.add_argument("--out", type=Path, required=True, help="output CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("forward", help="raw autoencoder forward pass on a PNG")
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--meters-per-pixel", type=float, default=1.25)
    p.set_defaults(func=_cmd_forward)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
