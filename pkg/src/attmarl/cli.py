"""Command-line interface.

Subcommands:

* ``attmarl run <config>``                 — execute all seeds + aggregate
* ``attmarl validate <config>``            — check a config, print verdict
* ``attmarl dump-attention <ckpt> <replay>`` — per-head value/weight dump
* ``attmarl trace <ckpt|greedy|wcmp>``     — deterministic rollout trace
"""

import argparse
import sys

from .config import load_config
from .errors import AttMarlError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attmarl",
        description="multi-agent actor-critic experiments with an "
                    "attention-based centralized critic")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=None,
                       help="override the config's worker count")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")

    p_dump = sub.add_parser("dump-attention",
                            help="sample replay tuples and dump per-head "
                                 "values and attention weights")
    p_dump.add_argument("checkpoint")
    p_dump.add_argument("replay")
    p_dump.add_argument("--n", type=int, default=3000)
    p_dump.add_argument("--agent", type=int, default=0)
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--out", default="attention_dump.csv")

    p_trace = sub.add_parser("trace", help="write a deterministic rollout trace")
    p_trace.add_argument("source",
                         help="checkpoint path, or 'greedy' / 'wcmp'")
    p_trace.add_argument("--env", required=True)
    p_trace.add_argument("--seed", type=int, default=0)
    p_trace.add_argument("--steps", type=int, default=50)
    p_trace.add_argument("--out", default="trace.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {args.config} ({cfg.algorithm} on {cfg.env}, "
                  f"{len(cfg.seeds)} seeds x {cfg.episodes} episodes)")
        elif args.command == "run":
            from .harness import run
            cfg = load_config(args.config)
            if args.workers is not None:
                cfg.workers = args.workers
                cfg.validate()
            result = run(cfg)
            print(f"wrote {len(result['seed_csvs'])} seed logs and "
                  f"{result['aggregate_csv']}")
        elif args.command == "dump-attention":
            from .harness import dump_attention
            out = dump_attention(args.checkpoint, args.replay, args.out,
                                 n=args.n, agent=args.agent, seed=args.seed)
            print(f"wrote {out}")
        elif args.command == "trace":
            from .harness import trace_rollout
            out = trace_rollout(args.source, args.env, args.seed, args.steps,
                                args.out)
            print(f"wrote {out}")
    except (AttMarlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
