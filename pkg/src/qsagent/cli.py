"""Command-line entry point: train, evaluate, sweep, inspect, edit, export-rules."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from qsagent import qs
from qsagent.checkpoint import load_checkpoint, save_checkpoint
from qsagent.config import TrainConfig, dump_config, load_config
from qsagent.errors import CheckpointError, DivergenceError
from qsagent.evaluation import SWEEP_PARAMS, evaluate, sweep
from qsagent.rules import export_rules, summary
from qsagent.training import read_training_csv, train

log = logging.getLogger("qsagent")

PAPER_ENVS, PAPER_AGENTS = 100, 10
DESK_ENVS, DESK_AGENTS = 30, 5


def _figure_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".png")


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.paper_scale:
        cfg = cfg.with_updates(episodes=5000)
    if args.seed is not None:
        cfg = cfg.with_updates(master_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))

    def progress(row):
        if row["episode"] % 100 == 0:
            log.info("episode %d  reward %.1f  model mse %.4g  nodes %d", row["episode"],
                     row["total_reward"], row["env_model_mse"], row["qs_node_count"])

    cks = train(cfg, out, progress=progress)
    if not args.no_figures:
        from qsagent.plotting import plot_training
        plot_training(read_training_csv(out / "training.csv"), out / "training.png")
    last = cks[-1]
    print(f"checkpoints\t{len(cks)}")
    print(f"episodes\t{last.episode_index}")
    print(f"qs_nodes\t{len(last.memory)}")
    return 0


def cmd_evaluate(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    n_envs = args.envs or (PAPER_ENVS if args.paper_scale else DESK_ENVS)
    n_agents = args.agents or (PAPER_AGENTS if args.paper_scale else DESK_AGENTS)
    out = Path(args.out)
    rep = evaluate(ck, n_envs, n_agents, env_seed_base=args.env_seed_base,
                   agent_seed_base=args.agent_seed_base, out_csv=out)
    print("agent_kind\tmean_reward\tstderr\truns")
    for kind in ("rl", "qs"):
        mean, se = rep.aggregate(kind)
        print(f"{kind}\t{mean:.4f}\t{se:.4f}\t{len(rep.rewards(kind))}")
    if not args.no_figures:
        from qsagent.plotting import plot_evaluation
        plot_evaluation(rep, _figure_path(out))
    return 0


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from None


def cmd_sweep(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    rep = sweep(ck, args.param, args.values, n_envs=args.envs, n_agents=args.agents,
                env_seed_base=args.env_seed_base, agent_seed_base=args.agent_seed_base)
    rep.write_csv(out)
    print("value\tmean_reward_qs\tstderr_qs\tmean_reward_rl\thub_count\tmemory")
    for r in rep.rows:
        print(f"{r['value']}\t{r['mean_reward_qs']:.4f}\t{r['stderr_qs']:.4f}\t"
              f"{r['mean_reward_rl']:.4f}\t{r['hub_count']}\t{r['memory']}")
    if not args.no_figures:
        from qsagent.plotting import plot_sweep
        plot_sweep(rep, _figure_path(out))
    return 0


def cmd_inspect(args) -> int:
    sys.stdout.write(summary(load_checkpoint(args.checkpoint), top=args.top))
    return 0


def parse_add_node(text: str) -> qs.AddNode:
    """``"d1,...,d8:value"`` -> AddNode."""
    try:
        delta_text, value_text = text.rsplit(":", 1)
        delta = np.array([float(v) for v in delta_text.split(",")])
        value = float(value_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'd1,...,d8:value', got {text!r}") from None
    if delta.shape != (8,):
        raise argparse.ArgumentTypeError(f"expected 8 delta components, got {len(delta)}")
    return qs.AddNode(delta, value)


def parse_set_value(text: str) -> qs.SetValue:
    try:
        node, value = text.split(":")
        return qs.SetValue(int(node), float(value))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'node:value', got {text!r}") from None


def cmd_edit(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    if args.remove_node is not None:
        edit = qs.RemoveNode(args.remove_node)
    elif args.add_node is not None:
        edit = args.add_node
    else:
        edit = args.set_value
    try:
        qs.apply_edit(ck.memory, edit)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    save_checkpoint(args.out, ck)
    print(f"nodes\t{len(ck.memory)}")
    print(f"hubs\t{' '.join(str(h) for h in sorted(qs.hub_set(ck.memory, qs.HubConfig(ck.config.alpha))))}")
    return 0


def cmd_export_rules(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    try:
        export_rules(ck, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"rules\t{len(ck.memory)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsagent", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def eval_opts(sp, envs_default=None, agents_default=None):
        sp.add_argument("--envs", type=int, default=envs_default)
        sp.add_argument("--agents", type=int, default=agents_default)
        sp.add_argument("--env-seed-base", type=int, default=1_000_000)
        sp.add_argument("--agent-seed-base", type=int, default=0)
        sp.add_argument("--no-figures", action="store_true")

    sp = sub.add_parser("train", help="train agent, dynamics model and QS memory")
    sp.add_argument("--config", help="key = value config file (defaults if omitted)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, help="override master_seed")
    sp.add_argument("--paper-scale", action="store_true", help="train for 5000 episodes")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate RL and QS agents on a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True, help="evaluation CSV")
    sp.add_argument("--paper-scale", action="store_true", help="100 envs x 10 agents")
    eval_opts(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="evaluate QS across values of one parameter")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sp.add_argument("--values", required=True, type=_parse_values)
    sp.add_argument("--out", required=True)
    eval_opts(sp, DESK_ENVS, DESK_AGENTS)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("inspect", help="print memory summary, hub set and hub threshold")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--top", type=int, default=10)
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("edit", help="edit the QS memory of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--remove-node", type=int, metavar="ID")
    g.add_argument("--add-node", type=parse_add_node, metavar="D1,...,D8:VALUE")
    g.add_argument("--set-value", type=parse_set_value, metavar="ID:VALUE")
    sp.set_defaults(func=cmd_edit)

    sp = sub.add_parser("export-rules", help="write the memory as a rule table")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export_rules)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CheckpointError, DivergenceError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
