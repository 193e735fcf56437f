"""Command-line front door: dataset generation, rollouts, evaluation, and
static SVG rendering. Every command is deterministic given its flags; the
DRIVEGYM_THREADS environment variable caps per-scene parallelism."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .cle import (
    EvaluationError,
    default_plan,
    evaluate,
    format_report,
    load_plan,
    save_report,
)
from .outputs import load_outputs, save_outputs
from .raster import RasterConfig, rasterize, write_pgm
from .scene import DatasetError, load_dataset, save_dataset
from .simulation import (
    POLICIES,
    DrivingEnv,
    EnvConfig,
    env_config_from_dict,
    rollout,
)
from .svg_render import render_scene_svg
from .synthetic import generate_synthetic


def _thread_count() -> int:
    raw = os.environ.get("DRIVEGYM_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_scenes(fn, items):
    """Order-preserving map, threaded when DRIVEGYM_THREADS > 1."""
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_env_config(path: str | None) -> EnvConfig:
    if path is None:
        return EnvConfig()
    with open(path, encoding="utf-8") as handle:
        return env_config_from_dict(json.load(handle))


def _cmd_gen(args: argparse.Namespace) -> int:
    dataset = generate_synthetic(seed=args.seed, n_scenes=args.scenes,
                                 frames_per_scene=args.frames, n_agents=args.agents)
    save_dataset(dataset, args.output)
    print(f"wrote {len(dataset.scenes)} scenes to {args.output}")
    return 0


def _cmd_rollout(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    config = _load_env_config(args.env_config)
    if args.max_steps is not None:
        config = replace(config, max_episode_steps=args.max_steps)
    scene_indices = args.scene if args.scene else list(range(len(dataset.scenes)))

    def run(scene_index: int):
        # One environment and one policy per scene keeps runs independent.
        env = DrivingEnv(dataset, config)
        policy = POLICIES[args.policy](config.action_mode)
        return rollout(env, policy, scene_index)

    outputs = _map_scenes(run, scene_indices)
    save_outputs(outputs, args.output)
    print(f"rolled out {len(outputs)} scenes to {args.output}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    outputs = load_outputs(args.outputs)
    plan = load_plan(args.plan) if args.plan else default_plan()
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report = evaluate(plan, outputs, scene_runner=pool.map)
    else:
        report = evaluate(plan, outputs)
    print(format_report(report))
    report_path = Path(args.outputs).with_suffix(".report.json")
    save_report(report, report_path)
    print(f"\nreport written to {report_path}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    outputs = load_outputs(args.outputs)
    matching = [o for o in outputs if o.scene_id == args.scene_id]
    if not matching:
        known = ", ".join(o.scene_id for o in outputs)
        raise EvaluationError(f"scene {args.scene_id!r} not in outputs (have: {known})")
    dataset = load_dataset(args.dataset)
    render_scene_svg(matching[0], dataset.map, args.output,
                     prediction_scale=args.prediction_scale,
                     marker_interval=args.marker_interval)
    print(f"wrote {args.output}")
    return 0


def _cmd_raster(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    scene = dataset.scenes[args.scene]
    config = RasterConfig(history_frames=args.history)
    raster = rasterize(dataset, scene, args.frame, config=config)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    for channel in range(raster.channels):
        write_pgm(out_dir / f"channel_{channel:02d}.pgm", raster.data[channel])
    print(f"wrote {raster.channels} channels to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivesim",
        description="Driving simulation rollouts and closed-loop evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic scene dataset")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--scenes", type=int, default=10)
    gen.add_argument("--frames", type=int, default=248)
    gen.add_argument("--agents", type=int, default=5)
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(handler=_cmd_gen)

    roll = sub.add_parser("rollout", help="roll a policy over logged scenes")
    roll.add_argument("--dataset", required=True)
    roll.add_argument("--policy", choices=sorted(POLICIES), default="replay")
    roll.add_argument("--env-config", help="environment config JSON file")
    roll.add_argument("--max-steps", type=int, help="override max episode steps")
    roll.add_argument("--scene", type=int, action="append",
                      help="scene index (repeatable; default: all scenes)")
    roll.add_argument("-o", "--output", required=True)
    roll.set_defaults(handler=_cmd_rollout)

    ev = sub.add_parser("eval", help="evaluate rollout outputs against a plan")
    ev.add_argument("--outputs", required=True)
    ev.add_argument("--plan", help="evaluation plan JSON (default: built-in plan)")
    ev.set_defaults(handler=_cmd_eval)

    render = sub.add_parser("render", help="render one rollout as a static SVG")
    render.add_argument("--outputs", required=True)
    render.add_argument("--dataset", required=True, help="dataset file (for the map)")
    render.add_argument("--scene-id", required=True)
    render.add_argument("--prediction-scale", type=float, default=10.0)
    render.add_argument("--marker-interval", type=float, default=2.0,
                        help="marker spacing in seconds")
    render.add_argument("-o", "--output", required=True)
    render.set_defaults(handler=_cmd_render)

    raster = sub.add_parser("raster", help="dump raster channels as PGM images")
    raster.add_argument("--dataset", required=True)
    raster.add_argument("--scene", type=int, default=0)
    raster.add_argument("--frame", type=int, default=0)
    raster.add_argument("--history", type=int, default=3)
    raster.add_argument("-o", "--output", required=True, help="output directory")
    raster.set_defaults(handler=_cmd_raster)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (DatasetError, EvaluationError, OSError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
