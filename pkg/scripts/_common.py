"""Shared argument handling for the experiment scripts."""
import argparse
from pathlib import Path

from walkmpc.config import ExperimentConfig, load_config, override


def parse(description: str, default_out: str, beta_x: float | None = None):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--runs", type=int)
    ap.add_argument("--out", default=default_out)
    ap.add_argument("--beta-x", type=float, dest="beta_x", default=beta_x)
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return override(cfg, experiment__seed=args.seed, experiment__runs=args.runs, experiment__out=args.out,
                    controller__beta_x=(args.beta_x,) if args.beta_x is not None else None)
