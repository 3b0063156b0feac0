"""Command-line entry point: train, eval, rollout, plot."""
from __future__ import annotations

import argparse
import ctypes
import json
import logging
import sys
from pathlib import Path

from . import checkpoint
from .agent import CrossQAgent
from .config import ConfigError, RunConfig, apply_overrides, dump_config, load_config, parse_config
from .environment import DasmrEnv, in_workspace
from .evaluation import run_episode, run_eval
from .trace import TraceError, plot_trace, write_trace
from .trainer import _prefixed, build_trainer

log = logging.getLogger("dasmr")

LOG_FILE = "log.jsonl"
CONFIG_FILE = "config.ini"


def tune_allocator() -> None:
    """Keep large freed buffers in the heap instead of handing them back to the OS.

    Training allocates and frees the same multi-megabyte temporaries every step; with
    glibc's defaults each one is a fresh mmap plus page faults. No-op elsewhere.
    """
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
    except (OSError, AttributeError):
        pass


def checkpoint_path(out_dir: Path, step: int) -> Path:
    return out_dir / "checkpoints" / f"step_{step:09d}.ckpt"


def load_agent(path):
    meta, arrays = checkpoint.load(path)
    if "config" not in meta:
        raise checkpoint.CheckpointError(f"{path}: checkpoint carries no run configuration")
    cfg = parse_config(meta["config"], source=f"{path}:config")
    agent = CrossQAgent(DasmrEnv.obs_dim, DasmrEnv.act_dim, cfg.agent, cfg.network)
    agent.load_state(meta["agent"], _prefixed(arrays, "agent/"))
    return agent, cfg


def _truncate_log(path: Path, step: int) -> None:
    if not path.exists():
        path.write_text("")
        return
    kept = [line for line in path.read_text().splitlines() if line and json.loads(line)["step"] <= step]
    path.write_text("".join(line + "\n" for line in kept))


def cmd_train(args) -> Path:
    resume_meta = resume_arrays = None
    if args.resume:
        resume_meta, resume_arrays = checkpoint.load(args.resume)
        cfg = parse_config(resume_meta["config"], source=f"{args.resume}:config")
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"agent.seed={args.seed}")
    if args.total_steps is not None:
        overrides.append(f"agent.total_steps={args.total_steps}")
    if args.out is not None:
        overrides.append(f"run.out_dir={args.out}")
    cfg = apply_overrides(cfg, overrides)

    out = Path(cfg.run.out_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(dump_config(cfg))
    trainer = build_trainer(cfg)
    log_path = out / LOG_FILE
    if resume_meta is not None:
        trainer.load_state(resume_meta, resume_arrays)
        _truncate_log(log_path, trainer.env_steps)
    else:
        log_path.write_text("")

    extra = {"config": dump_config(cfg)}

    def save(tr):
        tr.save(checkpoint_path(out, tr.env_steps), extra)

    with open(log_path, "a") as logf:
        def on_record(rec):
            logf.write(json.dumps(rec, sort_keys=True) + "\n")
            logf.flush()
            log.info("episode %d step %d SR %.2f return %.1f", rec["episode"], rec["step"],
                     rec["success_rate"], rec["return"])

        trainer.run(cfg.agent.total_steps, on_record, save, cfg.run.checkpoint_every)
    save(trainer)
    print(out)
    return out


def cmd_eval(args) -> dict:
    agent, cfg = load_agent(args.checkpoint)
    metrics, results = run_eval(
        lambda obs: agent.act(obs, deterministic=True), args.episodes, args.seed_mode,
        cfg.world, cfg.robot, cfg.agent.seed,
    )
    out = Path(args.out) if args.out else Path(args.checkpoint).resolve().parent.parent / f"eval_{args.seed_mode}"
    traces = out / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(results):
        write_trace(traces / f"trace_{i:04d}.csv", r.trajectory, r.goal)
    report = {
        "checkpoint": str(args.checkpoint),
        "metrics": vars(metrics),
        "episodes": [
            {"goal": list(r.goal), "success": r.success, "final_error": r.final_error,
             "path_length": r.path_length, "shortest_path": r.shortest_path}
            for r in results
        ],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(metrics.summary())
    return report


def cmd_rollout(args):
    agent, cfg = load_agent(args.checkpoint)
    goal = (float(args.goal[0]), float(args.goal[1]))
    if not in_workspace(goal, cfg.world):
        raise ValueError(f"goal {goal} lies outside the workspace")
    env = DasmrEnv(cfg.world, cfg.robot)
    result = run_episode(env, lambda obs: agent.act(obs, deterministic=True), goal=goal)
    write_trace(args.trace, result.trajectory, result.goal)
    print(f"success={str(result.success).lower()} final_error={result.final_error:.4f} "
          f"path_length={result.path_length:.4f}")
    return result


def cmd_plot(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    plot_trace(args.trace, args.out, cfg.world)
    print(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dasmr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent")
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--total-steps", type=int)
    p.add_argument("--out", help="run directory")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config field")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed-mode", choices=("seen", "unseen"), default="seen")
    p.add_argument("--out", help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", help="drive one episode to a given goal")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--goal", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("plot", help="render a trace as SVG")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="INI run configuration (world geometry)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    tune_allocator()
    try:
        args.func(args)
    except (ConfigError, checkpoint.CheckpointError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
