"""Command-line entry points: train, eval, plot."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .actors import ActorKind
from .checkpoint import CheckpointError, actor_from_checkpoint, load_checkpoint, save_checkpoint
from .config import parse_config, resolve_map
from .evaluation import evaluate, export_trajectories
from .maze import MazeEnv, load_map, perturb
from .plotting import plot_trajectories
from .runio import RunWriter, atomic_write_text
from .training import ConfigError, train


def _cmd_train(args) -> int:
    config_path = Path(args.config)
    config, extras = parse_config(config_path)
    run_dir = Path(args.out) if args.out else Path(extras.get("run_dir", f"runs/{config_path.stem}-s{config.seed}"))
    writer = RunWriter(
        run_dir,
        config_path=config_path,
        config_text=config_path.read_text(encoding="utf-8"),
        seed=config.seed,
        map_path=config.map_path,
        code_version=__version__,
    )
    env = MazeEnv(load_map(config.map_path))

    def on_eval(row, snapshot):
        writer.append_metrics(row)
        save_checkpoint(
            run_dir / "checkpoint_latest.bin",
            snapshot.actor,
            snapshot.critics,
            snapshot.actor_adam,
            snapshot.temperature.w,
            snapshot.env_steps,
            snapshot.gradient_steps,
        )
        print(
            f"step {row.env_step}: success {row.success_rate:.2f}, "
            f"reachable {row.reachable_goals}, alpha {row.alpha:.3f}",
            flush=True,
        )

    result = train(config, env, on_eval=on_eval)
    save_checkpoint(
        run_dir / "checkpoint_final.bin",
        result.actor,
        result.critics,
        result.actor_adam,
        result.temperature.w,
        result.env_steps,
        result.gradient_steps,
    )
    writer.finish()
    print(str(run_dir))
    return 0


def _report_lines(report, label: str) -> list[str]:
    lines = [
        f"evaluation ({label})",
        f"  episodes          {report.episodes}",
        f"  success rate      {report.success_rate:.3f}",
        f"  reachable goals   {report.reachable_goals}",
        f"  mean length       {report.mean_episode_length:.1f}",
    ]
    for goal_id in sorted(report.per_goal_counts):
        lines.append(f"  goal {goal_id:<3} reached  {report.per_goal_counts[goal_id]}")
    return lines


def _cmd_eval(args) -> int:
    if args.episodes < 1:
        raise ConfigError(f"episodes must be >= 1, got {args.episodes}")
    ckpt = load_checkpoint(args.checkpoint)
    expect = ActorKind(args.actor) if args.actor else None
    actor = actor_from_checkpoint(ckpt, expect_kind=expect)
    spec = load_map(args.map)
    if args.perturb == "removal":
        spec = perturb(spec, "removal", np.random.default_rng([args.seed, 0]))
    elif args.perturb == "obstacle":
        spec = perturb(spec, "obstacle")
    report = evaluate(actor, spec, args.episodes, np.random.default_rng([args.seed, 1]))
    print("\n".join(_report_lines(report, args.perturb)))
    if args.trajectories:
        export_trajectories(actor, spec, args.episodes, np.random.default_rng([args.seed, 2]), args.trajectories)
    if args.out:
        payload = {
            "checkpoint": str(args.checkpoint),
            "map": str(args.map),
            "perturb": args.perturb,
            "seed": args.seed,
            "report": asdict(report),
        }
        atomic_write_text(Path(args.out), json.dumps(payload, indent=2))
    return 0


def _cmd_plot(args) -> int:
    spec = load_map(args.map)
    plot_trajectories(args.trajectories, spec, args.out)
    print(str(args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drac", description="Diversity-regularized actor-critic")
    parser.add_argument("--version", action="version", version=f"drac {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training configuration")
    p_train.add_argument("--config", required=True, help="path to a key = value config file")
    p_train.add_argument("--out", default=None, help="run directory (overrides config run_dir)")
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a map")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--map", required=True)
    p_eval.add_argument("--perturb", choices=("none", "removal", "obstacle"), default="none")
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--actor", choices=tuple(k.value for k in ActorKind), default=None,
                        help="assert the checkpoint holds this actor kind")
    p_eval.add_argument("--trajectories", default=None, help="also export a trajectory CSV here")
    p_eval.add_argument("--out", default=None, help="write a JSON report here")
    p_eval.set_defaults(fn=_cmd_eval)

    p_plot = sub.add_parser("plot", help="render trajectories over the maze as SVG")
    p_plot.add_argument("--trajectories", required=True)
    p_plot.add_argument("--map", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
