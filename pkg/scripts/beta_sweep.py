"""Violations against cost for every configured state violation level, on paired seeds."""
import sys
from pathlib import Path

from _common import parse
from walkmpc import cli

if __name__ == "__main__":
    cfg = parse(__doc__, "out/sweep")
    rc = cli.run_command("simulate", cfg)
    if rc == cli.EXIT_OK:
        import json
        summary = json.loads((Path(cfg.experiment.out) / "simulate_summary.json").read_text())
        print(f"{'variant':<16}{'violations':>12}{'cost ratio':>12}")
        for name, v in summary["variants"].items():
            print(f"{name:<16}{v['total_violations']:>12d}{v['cost_ratio_vs_nominal']:>12.4f}")
    sys.exit(rc)
