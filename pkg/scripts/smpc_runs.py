"""Monte-Carlo SMPC runs at a single state violation level (default 5%)."""
import dataclasses
import sys

from _common import parse
from walkmpc import cli

if __name__ == "__main__":
    cfg = parse(__doc__, "out/smpc", beta_x=0.05)
    cfg = dataclasses.replace(cfg, controller=dataclasses.replace(cfg.controller, variants=("nominal", "smpc")))
    sys.exit(cli.run_command("simulate", cfg))
