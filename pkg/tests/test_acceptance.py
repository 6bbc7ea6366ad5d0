"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from walkmpc import experiments as ex, mpc, polytope as pt, sim, stochastic as st, worstcase as wc
from walkmpc.config import ExperimentConfig, PlanSection
from walkmpc.model import deadbeat_gain
from walkmpc.qp import QpProblem, solve

from .oracles import qp_by_enumeration, random_qp

REPORTED_GAIN = (3.386, 0.968)


@pytest.fixture(scope="module")
def setup():
    return ex.build(ExperimentConfig())


@pytest.fixture(scope="module")
def sweep(setup):
    t0 = time.perf_counter()
    reps = ex.run_variants(setup)
    return reps, time.perf_counter() - t0


def test_01_deadbeat_nilpotency(setup, criterion):
    K = deadbeat_gain(setup.model)
    runs = []
    for _ in range(20):
        t0 = time.perf_counter()
        deadbeat_gain(setup.model)
        runs.append(time.perf_counter() - t0)
    A_K = setup.model.A + setup.model.B @ K
    norm = np.abs(A_K @ A_K).sum(axis=1).max()
    dt = float(np.median(runs))
    ok = norm < 1e-10 and dt < 1e-3
    criterion(1, ok, f"||A_K^2||_inf={norm:.1e}, K={np.round(K[0], 4).tolist()} "
                     f"(reported {list(REPORTED_GAIN)}), {dt * 1e3:.3f} ms")
    assert ok


def test_02_mrpi_invariance(setup, criterion):
    e = setup.cfg.experiment
    t0 = time.perf_counter()
    W = setup.dist.support
    omega = ex.tube_set(setup)
    vert = pt.rpi_check(setup.A_K, W, omega, samples=6, steps=50, seed=e.seed)
    starts = pt.sample_in_zonotope(omega, np.random.default_rng([e.seed, 1]), 1000)
    rand = pt.rpi_check(setup.A_K, W, omega, steps=50, seed=e.seed + 1, starts=starts)
    dt = time.perf_counter() - t0
    ok = len(vert.starts) == 6 and vert.violations == 0 and rand.violations == 0 and dt < 1.0
    criterion(2, ok, f"vertex starts {vert.violations} and random starts {rand.violations} violations, "
                     f"{dt:.2f} s")
    assert ok


def test_03_rmpc_hard_constraints(setup, criterion):
    t0 = time.perf_counter()
    rep = ex.run_variants(setup, ["nominal", "rmpc"])["rmpc"]
    omega = ex.tube_set(setup)
    corner = sim.run_closed_loop(mpc.rmpc_controller(setup.ocp, omega, setup.K), setup.plan,
                                 sim.corner_sequence(setup.dist, setup.plan, 1.0))
    dt = time.perf_counter() - t0
    peak = float(np.abs(corner.x[:, 0]).max())
    ok = (rep.total_violations == 0 and rep.control_violation_count_per_step.sum() == 0
          and not rep.failures and not corner.failed and not corner.violations_x.any()
          and not corner.violations_u.any() and peak >= 0.04 - 1e-3 and dt < 30)
    criterion(3, ok, f"{rep.runs} runs: {rep.total_violations} state / "
                     f"{int(rep.control_violation_count_per_step.sum())} CoP violations; "
                     f"corner run peak |c|={peak:.4f}; {dt:.1f} s")
    assert ok


def test_04_smpc_chance_constraints(setup, criterion):
    t0 = time.perf_counter()
    rep = ex.run_variants(setup, ["nominal", "smpc_bx0.05"])["smpc_bx0.05"]
    dt = time.perf_counter() - t0
    runs, beta = rep.runs, 0.05
    limit = runs * beta + 3 * math.sqrt(runs * beta * (1 - beta))
    counts = rep.violation_count_per_step
    ok = rep.max_violations <= 10 and counts.mean() <= limit and not rep.failures and dt < 30
    criterion(4, ok, f"max per-step violations {rep.max_violations} (<= 10), "
                     f"mean {counts.mean():.2f} (<= {limit:.2f}); {dt:.1f} s")
    assert ok


def test_05_beta_sweep(setup, sweep, criterion):
    reps, dt = sweep
    betas = setup.cfg.controller.beta_x
    totals = [reps[f"smpc_bx{b!r}"].total_violations for b in betas]
    order = np.argsort(betas)[::-1]   # increasing 1 - beta
    ordered = [totals[k] for k in order]
    monotone = all(a >= b for a, b in zip(ordered, ordered[1:]))
    small_zero = all(reps[f"smpc_bx{b!r}"].total_violations == 0 for b in betas if b <= 0.01)
    r_s = reps["smpc_bx0.01"].cost_ratio_vs_nominal
    r_r = reps["rmpc"].cost_ratio_vs_nominal
    ok = monotone and small_zero and 1.0 <= r_s < r_r and dt < 120
    criterion(5, ok, f"violations {dict(zip(betas, totals))}, ratio smpc(1%)={r_s:.4f}, "
                     f"rmpc={r_r:.4f}; {dt:.1f} s")
    assert ok


def test_06_worst_case_round_trip(setup, criterion):
    rep = ex.worstcase_series(setup)
    rows = wc.sensitivity_rows(np.array([1.0, 0.0]), setup.A_K, 15)
    eta_g = np.array([wc.eta_from_sigma(rows[: i + 1], setup.dist.sigma_w, 0.05) for i in range(16)])
    eta_b = np.array([wc.eta_from_box(rows[: i + 1], rep.w_max[i]) for i in range(16)])
    err = float(np.abs(eta_b - eta_g).max())
    ok = rep.alpha.size == 16 and err < 1e-10
    criterion(6, ok, f"i = 0..15, max |eta_box - eta_gauss| = {err:.1e}")
    assert ok


def test_07_alpha_monotonicity(setup, criterion):
    m1 = wc.monotonicity_experiment_1d(10_000, setup.cfg.experiment.seed, 30)
    mn = wc.monotonicity_experiment_nd(2, 1000, setup.cfg.experiment.seed, 30, setup.dist.sigma_w)
    ok = m1.trials == 10_000 and not m1.counterexamples
    soft = "met" if not mn.counterexamples else "missed"
    criterion(7, ok, f"1D: {len(m1.counterexamples)} counterexamples in {m1.trials}; "
                     f"2D soft check {soft}: violation fraction {mn.violation_fraction:.3f} "
                     f"({len(mn.counterexamples)}/{mn.trials})")
    if mn.counterexamples:
        import warnings
        warnings.warn(f"2D alpha series increased in {mn.violation_fraction:.1%} of random instances")
    assert ok


def test_08_backoff_quantile(setup, criterion):
    cov = st.propagate_covariance(setup.A_K, setup.dist.Sigma_w, 5)
    eta = st.state_backoffs([st.ChanceConstraint([1.0, 0.0], 1.0, 0.05)], cov)[0]
    rng = np.random.default_rng(2024)
    n = 1_000_000
    e = np.zeros((n, 2))
    worst = 0.0
    for i in range(1, 6):
        e = e @ setup.A_K.T + rng.standard_normal((n, 2)) * setup.dist.sigma_w
        q = float(np.quantile(e[:, 0], 0.95))
        worst = max(worst, abs(eta[i] / q - 1))
    ok = worst < 0.02
    criterion(8, ok, f"i = 1..5, max relative gap to 1e6-sample quantile {worst:.4f}")
    assert ok


def test_09_qp_oracle(criterion):
    rng = np.random.default_rng(9)
    gap = viol = 0.0
    for _ in range(100):
        P, q, A, b = random_qp(rng, d=int(rng.integers(2, 6)), m=int(rng.integers(1, 9)))
        _, obj_ref = qp_by_enumeration(P, q, A, b)
        s = solve(QpProblem(P, q, A, b))
        assert s.optimal
        gap = max(gap, abs(s.objective - obj_ref) / (1 + abs(obj_ref)))
        viol = max(viol, float(np.max(A @ s.z_star - b, initial=0.0)))
    ok = gap < 1e-6 and viol < 1e-8
    criterion(9, ok, f"100 QPs: max objective gap {gap:.1e}, max violation {viol:.1e}")
    assert ok


def test_10_variant_reduction(setup, criterion):
    cfg = ExperimentConfig(plan=PlanSection(n_steps=25))
    s = ex.build(cfg)
    assert s.plan.total_steps >= 200
    w = sim.disturbance_sequence(s.dist, s.plan, cfg.experiment.seed, 0)
    runs = {
        "nominal": mpc.nominal_controller(s.ocp, s.K),
        "rmpc_zero_omega": mpc.rmpc_controller(s.ocp, pt.Zonotope.point([0.0, 0.0]), s.K),
        "smpc_zero_backoff": mpc.smpc_controller(s.ocp, s.A_K, s.K, s.dist.Sigma_w, 0.5, 0.5),
    }
    u = {k: sim.run_closed_loop(c, s.plan, w).u[:200] for k, c in runs.items()}
    ok = all(len(v) == 200 for v in u.values()) and len({v.tobytes() for v in u.values()}) == 1
    criterion(10, ok, "200-step inputs bit-identical across nominal, zero-Omega RMPC, zero-back-off SMPC"
              if ok else "input sequences differ")
    assert ok


DET_CFG = """\
[experiment]
runs = 20
mono_trials_1d = 1000
mono_trials_nd = 100
"""


def _invoke(tmp_path, tag, threads):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(DET_CFG)
    env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
    files = {}
    for cmd in ("mrpi", "backoffs", "simulate", "worstcase"):
        out = tmp_path / tag / cmd
        subprocess.run([sys.executable, "-m", "walkmpc", cmd, "--config", str(cfg), "--out", str(out)],
                       check=True, env=env, capture_output=True)
        files.update({f"{cmd}/{p.name}": p.read_bytes() for p in sorted(out.glob("*.csv"))})
    return files


def test_11_determinism(tmp_path, criterion):
    a = _invoke(tmp_path, "a", "1")
    b = _invoke(tmp_path, "b", "1")
    c = _invoke(tmp_path, "c", "4")
    ok = len(a) >= 8 and a == b == c
    criterion(11, ok, f"{len(a)} CSV files byte-identical over repeat and 1 vs 4 threads")
    assert ok
