"""Tube cross-sections for both gains plus invariance trajectories from their vertices."""
import sys

from _common import parse
from walkmpc import cli

if __name__ == "__main__":
    cfg = parse(__doc__, "out/mrpi")
    sys.exit(cli.run_command("mrpi", cfg))
