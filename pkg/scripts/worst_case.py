"""Equivalent worst-case disturbance boxes and the monotonicity experiments."""
import sys

from _common import parse
from walkmpc import cli

if __name__ == "__main__":
    cfg = parse(__doc__, "out/worstcase")
    sys.exit(cli.run_command("worstcase", cfg))
