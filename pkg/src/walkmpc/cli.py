"""Command-line front end.

    walkmpc {mrpi,backoffs,simulate,worstcase} [--config PATH] [--seed S]
            [--runs N] [--out DIR] [--variant V] [--beta-x F] [--beta-u F]

Exit codes: 0 success, 1 configuration error, 2 experiment failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import polytope as pt
from . import stochastic as st
from . import worstcase as wc
from .config import ConfigError, ExperimentConfig, format_config, load_config, override
from .model import SynthesisError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2

log = logging.getLogger("walkmpc")


class ExperimentFailure(RuntimeError):
    pass


# output helpers ------------------------------------------------------------

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


def write_json(path: Path, command: str, cfg: ExperimentConfig, body: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "seed": cfg.experiment.seed}
    doc.update(body)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.experiment.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(format_config(cfg))
    return out


# commands ------------------------------------------------------------------

def cmd_mrpi(cfg: ExperimentConfig) -> dict:
    s = ex.build(cfg)
    e = cfg.experiment
    out = _prepare_out(cfg)
    W = s.dist.support
    seed = e.seed
    A_db = s.model.A + s.model.B @ s.K_deadbeat
    omega_db = pt.mrpi_exact_nilpotent(A_db, W)
    nilpotent = np.abs(s.A_K @ s.A_K).max() < 1e-10
    if nilpotent:
        omega, info = pt.mrpi_exact_nilpotent(s.A_K, W), {"method": "exact_nilpotent"}
        coarse = omega
    else:
        res = pt.mrpi_outer_eps(s.A_K, W, cfg.controller.mrpi_eps)
        omega = res.omega
        info = {"method": "outer_eps", "eps": res.eps, "s": res.s, "alpha": res.alpha}
        coarse = pt.mrpi_outer_eps(s.A_K, W, e.mrpi_eps_coarse).omega
    # nested check on a dense set of directions
    ang = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    D = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    nested = bool(np.all(pt.support_many(omega, D) <= pt.support_many(coarse, D) + 1e-12))

    vert = pt.rpi_check(s.A_K, W, omega, samples=e.rpi_samples, steps=e.rpi_steps, seed=seed,
                        keep_trajectories=True)
    rng = np.random.default_rng([seed, 1])
    rand_starts = pt.sample_in_zonotope(omega, rng, e.rpi_random_starts) if e.rpi_random_starts else None
    rand = (pt.rpi_check(s.A_K, W, omega, steps=e.rpi_steps, seed=seed + 1, starts=rand_starts)
            if rand_starts is not None else None)
    vert_db = pt.rpi_check(A_db, W, omega_db, samples=e.rpi_samples, steps=e.rpi_steps, seed=seed)

    (out / "omega.txt").write_text(pt.format_zonotope(omega))
    (out / "omega_deadbeat.txt").write_text(pt.format_zonotope(omega_db))
    rows = []
    for name, Z in (("omega", omega), ("omega_deadbeat", omega_db)):
        rows += [(seed, name, k, v[0], v[1]) for k, v in enumerate(pt.vertices_2d(Z))]
    write_csv(out / "omega_vertices.csv", ["seed", "set", "vertex", "c", "cdot"], rows)
    T = vert.trajectories
    write_csv(out / "rpi_trajectories.csv", ["seed", "start", "step", "c", "cdot"],
              [(seed, i, k, T[i, k, 0], T[i, k, 1]) for i in range(T.shape[0]) for k in range(T.shape[1])])
    hull = omega.interval_hull()
    K_omega = pt.linear_map(omega, s.K)
    violations = vert.violations + vert_db.violations + (rand.violations if rand else 0)
    body = {
        "gain": s.K[0], "gain_deadbeat": s.K_deadbeat[0],
        "deadbeat_nilpotency_inf_norm": float(np.abs(A_db @ A_db).sum(axis=1).max()),
        "closed_loop_spectral_radius": float(max(abs(np.linalg.eigvals(s.A_K)))),
        "omega": info | {"hull_half_width": hull.upper, "support_K": pt.support(K_omega, [1.0]),
                         "nested_in_coarse": nested, "coarse_eps": e.mrpi_eps_coarse},
        "omega_deadbeat": {"hull_half_width": omega_db.interval_hull().upper,
                           "support_K_deadbeat": pt.support(pt.linear_map(omega_db, s.K_deadbeat), [1.0])},
        "rpi_vertex_starts": {"starts": len(vert.starts), "steps": vert.steps,
                              "violations": vert.violations, "max_excess": vert.max_excess},
        "rpi_random_starts": ({"starts": len(rand.starts), "steps": rand.steps,
                               "violations": rand.violations, "max_excess": rand.max_excess}
                              if rand else None),
        "rpi_deadbeat_vertex_starts": {"violations": vert_db.violations},
        "violations": violations,
    }
    write_json(out / "mrpi_summary.json", "mrpi", cfg, body)
    if violations:
        raise ExperimentFailure(f"{violations} invariance violations")
    return body


def cmd_backoffs(cfg: ExperimentConfig) -> dict:
    s = ex.build(cfg)
    c, p = cfg.controller, cfg.plan
    out = _prepare_out(cfg)
    N = c.horizon
    cov = st.propagate_covariance(s.A_K, s.dist.Sigma_w, N)
    omega = ex.tube_set(s)
    eta_rx = pt.support(omega, [1.0, 0.0])
    eta_ru = pt.support(pt.linear_map(omega, s.K), [1.0])
    rows, empty = [], []
    half_x, half_u = p.hallway_half_width, p.cop_half_width_y
    if eta_rx >= half_x:
        empty.append({"variant": "rmpc", "set": "state", "step": 1})
    if eta_ru >= half_u:
        empty.append({"variant": "rmpc", "set": "cop", "step": 0})
    for bx in c.beta_x:
        ex_ = st.state_backoffs([st.ChanceConstraint([1.0, 0.0], half_x, bx)], cov)[0]
        eu = st.control_backoffs([st.ChanceConstraint([1.0], half_u, c.beta_u)], s.K, cov)[0]
        for i in range(N + 1):
            rows.append((cfg.experiment.seed, bx, c.beta_u, i,
                         ex_[i] if i >= 1 else "", eu[i] if i < N else "",
                         eta_rx if i >= 1 else "", eta_ru if i < N else ""))
            if i >= 1 and ex_[i] >= half_x:
                empty.append({"variant": f"smpc_bx{bx!r}", "set": "state", "step": i})
            if i < N and eu[i] >= half_u:
                empty.append({"variant": f"smpc_bx{bx!r}", "set": "cop", "step": i})
    write_csv(out / "backoffs.csv", ["seed", "beta_x", "beta_u", "step", "eta_x_smpc", "eta_u_smpc",
                                     "eta_x_rmpc", "eta_u_rmpc"], rows)
    body = {"horizon": N, "beta_x": list(c.beta_x), "beta_u": c.beta_u, "gain": s.K[0],
            "rmpc": {"eta_x": eta_rx, "eta_u": eta_ru}, "empty_tightened_sets": empty}
    write_json(out / "backoffs_summary.json", "backoffs", cfg, body)
    if empty:
        raise ExperimentFailure(f"{len(empty)} tightened sets are empty; see backoffs_summary.json")
    return body


def cmd_simulate(cfg: ExperimentConfig) -> dict:
    s = ex.build(cfg)
    out = _prepare_out(cfg)
    reps = ex.run_variants(s)
    seed = cfg.experiment.seed
    dt = cfg.model.sampling_dt
    vrows, crows, summary = [], [], {}
    for name, r in reps.items():
        for t in range(len(r.violation_count_per_step)):
            vrows.append((seed, name, t + 1, round((t + 1) * dt, 10), r.violation_count_per_step[t],
                          r.control_violation_count_per_step[t]))
        crows += [(seed, name, k, r.run_costs[k]) for k in range(r.runs)]
        summary[name] = {"runs": r.runs, "max_violations_per_step": r.max_violations,
                         "total_violations": r.total_violations,
                         "total_control_violations": int(r.control_violation_count_per_step.sum()),
                         "avg_cost": r.avg_cost, "cost_ratio_vs_nominal": r.cost_ratio_vs_nominal,
                         "fallback_activations": r.fallback_activations,
                         "failures": [{"run": k, "reason": why} for k, why in r.failures]}
    write_csv(out / "violations.csv", ["seed", "variant", "step", "time", "violations",
                                       "control_violations"], vrows)
    write_csv(out / "costs.csv", ["seed", "variant", "run", "cost"], crows)
    body = {"runs": cfg.experiment.runs, "variants": summary}
    write_json(out / "simulate_summary.json", "simulate", cfg, body)
    n_fail = sum(len(r.failures) for r in reps.values())
    if n_fail:
        raise ExperimentFailure(f"{n_fail} episodes ended in a controller failure")
    return body


def cmd_worstcase(cfg: ExperimentConfig) -> dict:
    s = ex.build(cfg)
    e = cfg.experiment
    out = _prepare_out(cfg)
    seed = e.seed
    rows_q = wc.sensitivity_rows(np.array(e.worstcase_row), s.A_K, e.worstcase_i_max)
    rep = ex.worstcase_series(s)
    gauss = [wc.eta_from_sigma(rows_q[: i + 1], s.dist.sigma_w, e.worstcase_beta)
             for i in range(rep.alpha.size)]
    write_csv(out / "worstcase.csv", ["seed", "i", "alpha", "zeta", "w_max_c", "w_max_cdot",
                                      "eta_box", "eta_gauss"],
              [(seed, i, rep.alpha[i], rep.zeta[i], rep.w_max[i, 0], rep.w_max[i, 1], rep.eta[i], gauss[i])
               for i in range(rep.alpha.size)])
    m1 = wc.monotonicity_experiment_1d(e.mono_trials_1d, seed, e.mono_horizon) if e.mono_trials_1d else None
    mn = (wc.monotonicity_experiment_nd(2, e.mono_trials_nd, seed, e.mono_horizon, s.dist.sigma_w)
          if e.mono_trials_nd else None)
    write_csv(out / "monotonicity_1d.csv", ["seed", "trial", "abs_a", "violating_steps"],
              [(seed, *r) for r in (m1.records if m1 else [])])
    write_csv(out / "monotonicity_nd.csv", ["seed", "trial", "spectral_radius", "max_increase"],
              [(seed, *r) for r in (mn.records if mn else [])])
    body = {
        "row": list(e.worstcase_row), "beta": e.worstcase_beta, "i_max": e.worstcase_i_max,
        "w_max_shrinking": bool(np.all(np.diff(rep.w_max[:, 0]) <= 1e-15)),
        "max_roundtrip_error": float(np.max(np.abs(rep.eta - np.array(gauss)))),
        "monotonicity_1d": ({"trials": m1.trials, "counterexamples": len(m1.counterexamples)} if m1 else None),
        "monotonicity_nd": ({"n": 2, "trials": mn.trials, "counterexamples": len(mn.counterexamples),
                             "violation_fraction": mn.violation_fraction} if mn else None),
    }
    write_json(out / "worstcase_summary.json", "worstcase", cfg, body)
    return body


COMMANDS = {"mrpi": cmd_mrpi, "backoffs": cmd_backoffs, "simulate": cmd_simulate,
            "worstcase": cmd_worstcase}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="walkmpc", description="Robust and stochastic MPC for LIPM walking")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="key = value config file (defaults if omitted)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--runs", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--variant", choices=("nominal", "rmpc", "smpc"))
    ap.add_argument("--beta-x", type=float, dest="beta_x")
    ap.add_argument("--beta-u", type=float, dest="beta_u")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return override(cfg,
                    experiment__seed=args.seed, experiment__runs=args.runs, experiment__out=args.out,
                    controller__variants=(args.variant,) if args.variant else None,
                    controller__beta_x=(args.beta_x,) if args.beta_x is not None else None,
                    controller__beta_u=args.beta_u)


def run_command(command: str, cfg: ExperimentConfig) -> int:
    """Run one command on a resolved config and return its exit code."""
    try:
        body = COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentFailure, SynthesisError, pt.SetError) as exc:
        print(f"{command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(_jsonable({"command": command, "out": cfg.experiment.out, "keys": sorted(body)}),
                     sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_command(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
