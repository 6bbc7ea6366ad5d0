"""Footstep plans, disturbance sampling, closed-loop episodes and Monte-Carlo studies."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import LtiModel
from .mpc import ControllerFailure, CostWeights, MpcController, Mode, OcpDefinition
from .stochastic import DisturbanceModel, norm_cdf

log = logging.getLogger(__name__)

HALLWAY_ROWS = np.array([[1.0, 0.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class PlanConfig:
    n_steps: int = 8
    step_duration: int = 8
    in_place_steps: int = 2
    foot_offset_y: float = 0.075
    cop_half_width_y: float = 0.05
    hallway_half_width: float = 0.04
    hallway_start_step: int = 2
    disturbance_start_step: int = 4
    first_foot_sign: int = 1
    initial_double_support: int = 4


@dataclass
class FootstepPlan:
    """Lateral plan on the MPC grid.

    ``foot_y[t]`` is the active foot center, ``cop_lower/upper`` the CoP
    interval, ``hallway[t]`` whether ``|c| <= hallway_half_width`` is
    enforced. Arrays extend ``horizon`` steps past ``total_steps`` (standing
    in double support) so the last MPC problems are well defined.
    """

    foot_y: np.ndarray
    cop_lower: np.ndarray
    cop_upper: np.ndarray
    hallway: np.ndarray
    disturbed: np.ndarray
    total_steps: int
    hallway_half_width: float
    step_of: np.ndarray

    @property
    def length(self) -> int:
        return len(self.foot_y)


def build_footstep_plan(cfg: PlanConfig, horizon: int) -> FootstepPlan:
    if cfg.step_duration < 1 or cfg.n_steps < 1:
        raise ValueError("step count and duration must be at least 1")
    ds = cfg.initial_double_support
    if ds < 0:
        raise ValueError("initial double support must be non-negative")
    T = ds + cfg.n_steps * cfg.step_duration
    L = T + horizon
    foot = np.zeros(L)
    step_of = np.full(L, cfg.n_steps)
    step_of[:ds] = -1
    for k in range(cfg.n_steps):
        sign = cfg.first_foot_sign * (-1) ** k
        sl = slice(ds + k * cfg.step_duration, ds + (k + 1) * cfg.step_duration)
        foot[sl] = sign * cfg.foot_offset_y
        step_of[sl] = k
    lo = foot - cfg.cop_half_width_y
    hi = foot + cfg.cop_half_width_y
    # double support before the first and after the last step: CoP anywhere
    # between the two feet
    both = (step_of < 0) | (step_of >= cfg.n_steps)
    lo[both] = -cfg.foot_offset_y - cfg.cop_half_width_y
    hi[both] = cfg.foot_offset_y + cfg.cop_half_width_y
    hallway = step_of >= cfg.hallway_start_step
    disturbed = step_of >= cfg.disturbance_start_step
    return FootstepPlan(foot, lo, hi, hallway, disturbed, T, cfg.hallway_half_width, step_of)


def lateral_ocp(model: LtiModel, plan: FootstepPlan, N: int, weights: CostWeights) -> OcpDefinition:
    """Lateral-axis OCP: track zero velocity, hallway center, and the foot center."""
    L = plan.length
    bound = np.where(plan.hallway, plan.hallway_half_width, np.inf)
    state_bounds = np.stack([bound, bound], axis=1)
    p_des = 0.5 * (plan.cop_lower + plan.cop_upper)
    return OcpDefinition(model, N, weights, HALLWAY_ROWS, state_bounds, plan.cop_lower,
                         plan.cop_upper, np.zeros(L), np.zeros(L), p_des)


# disturbances -------------------------------------------------------------

def sample_truncated_gaussian(dist: DisturbanceModel, rng: np.random.Generator,
                              size: Optional[int] = None, max_draws: int = 10_000) -> np.ndarray:
    """Per-component rejection sampling of ``N(0, sigma^2)`` restricted to the support box."""
    shape = (1 if size is None else size, dist.sigma_w.size)
    out = np.zeros(shape)
    lo, hi = dist.support.lower, dist.support.upper
    for k, sig in enumerate(dist.sigma_w):
        if sig == 0.0:
            continue
        if min(-lo[k], hi[k]) < 0.1 * sig:
            log.warning("support of component %d is narrow relative to sigma; sampling may clamp", k)
        col = np.empty(shape[0])
        todo = np.arange(shape[0])
        for _ in range(max_draws):
            if todo.size == 0:
                break
            draw = rng.normal(0.0, sig, size=todo.size)
            ok = (draw >= lo[k]) & (draw <= hi[k])
            col[todo[ok]] = draw[ok]
            todo = todo[~ok]
        if todo.size:
            col[todo] = np.clip(rng.normal(0.0, sig, size=todo.size), lo[k], hi[k])
        out[:, k] = col
    return out[0] if size is None else out


def truncated_normal_std(sigma: float, bound: float) -> float:
    """Standard deviation of ``N(0, sigma^2)`` truncated to ``[-bound, bound]``."""
    a = bound / sigma
    pdf = math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi)
    mass = 2 * norm_cdf(a) - 1
    return sigma * math.sqrt(1 - 2 * a * pdf / mass)


def run_seed(seed: int, run: int) -> np.random.Generator:
    """Counter-based generator for run ``run`` of a study seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, run]))


def disturbance_sequence(dist: DisturbanceModel, plan: FootstepPlan, seed: int, run: int) -> np.ndarray:
    """Disturbances for one episode; zero outside the disturbed part of the plan."""
    T = plan.total_steps
    w = sample_truncated_gaussian(dist, run_seed(seed, run), size=T)
    w[~plan.disturbed[:T]] = 0.0
    return w


def corner_sequence(dist: DisturbanceModel, plan: FootstepPlan, sign: float = 1.0) -> np.ndarray:
    T = plan.total_steps
    corner = dist.support.upper if sign > 0 else dist.support.lower
    w = np.tile(corner, (T, 1))
    w[~plan.disturbed[:T]] = 0.0
    return w


# closed loop --------------------------------------------------------------

@dataclass
class SimTrace:
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    s: np.ndarray
    s_pred: np.ndarray
    violations_x: np.ndarray
    violations_u: np.ndarray
    stage_cost: np.ndarray
    mode: np.ndarray
    failed: bool = False
    failure: str = ""

    @property
    def steps(self) -> int:
        return len(self.u)

    @property
    def total_cost(self) -> float:
        return float(self.stage_cost.sum())

    @property
    def fallback_count(self) -> int:
        return int(np.sum(self.mode == Mode.MODE2))


def run_closed_loop(ctrl: MpcController, plan: FootstepPlan, w: np.ndarray,
                    x0=None) -> SimTrace:
    """Simulate ``x+ = A x + B u + w`` under ``ctrl``; violations against the original sets."""
    ocp = ctrl.ocp
    A, B = ocp.model.A, ocp.model.B
    T = plan.total_steps
    if len(w) < T:
        raise ValueError(f"need {T} disturbances, got {len(w)}")
    ctrl.reset()
    n = ocp.model.n
    X = np.zeros((T + 1, n))
    X[0] = np.zeros(n) if x0 is None else x0
    U = np.zeros(T)
    S = np.zeros((T, n))
    S_pred = np.full((T + 1, n), np.nan)
    modes = np.zeros(T, dtype=int)
    cost = np.zeros(T)
    failed, why = False, ""
    t = 0
    for t in range(T):
        try:
            res = ctrl.step(t, X[t])
        except ControllerFailure as exc:
            failed, why = True, f"t={t}: {exc}"
            log.debug("episode aborted: %s", why)
            break
        U[t], S[t], modes[t] = res.u, res.s, int(res.mode)
        S_pred[t + 1] = res.plan_states[1]
        cost[t] = ocp.stage_cost(t, X[t], res.u)
        X[t + 1] = A @ X[t] + B[:, 0] * res.u + w[t]
    else:
        t = T
    n_done = t
    X = X[: n_done + 1]
    H, hb = ocp.state_rows, ocp.state_bounds
    viol_x = (X[1:] @ H.T > hb[1:n_done + 1] + 1e-12)
    viol_u = (U[:n_done] > ocp.cop_upper[:n_done] + 1e-12) | (U[:n_done] < ocp.cop_lower[:n_done] - 1e-12)
    return SimTrace(X, U[:n_done], np.asarray(w[:n_done]), S[:n_done], S_pred[: n_done + 1],
                    viol_x, viol_u, cost[:n_done], modes[:n_done], failed, why)


# Monte Carlo --------------------------------------------------------------

@dataclass
class MonteCarloReport:
    variant: str
    runs: int
    seed: int
    violation_count_per_step: np.ndarray
    control_violation_count_per_step: np.ndarray
    run_costs: np.ndarray
    fallback_activations: int
    failures: list = field(default_factory=list)
    cost_ratio_vs_nominal: float = float("nan")

    @property
    def avg_cost(self) -> float:
        return float(np.mean(self.run_costs))

    @property
    def max_violations(self) -> int:
        return int(self.violation_count_per_step.max(initial=0))

    @property
    def total_violations(self) -> int:
        return int(self.violation_count_per_step.sum())


def monte_carlo(make_controller: Callable[[], MpcController], plan: FootstepPlan,
                dist: DisturbanceModel, runs: int, seed: int, variant: str = "",
                nominal_costs: Optional[np.ndarray] = None,
                sequences: Optional[Sequence[np.ndarray]] = None,
                keep_traces: bool = False):
    """Run ``runs`` episodes on paired disturbance sequences and aggregate.

    Violation counts are of the lateral CoM bound at the true state, per
    time step ``t = 1..T``. If ``nominal_costs`` (per run, same seeds) is
    given, ``cost_ratio_vs_nominal`` is the ratio of mean costs.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    T = plan.total_steps
    ctrl = make_controller()
    viol = np.zeros(T, dtype=int)
    viol_u = np.zeros(T, dtype=int)
    costs = np.zeros(runs)
    fallbacks = 0
    failures = []
    traces = [] if keep_traces else None
    for r in range(runs):
        w = sequences[r] if sequences is not None else disturbance_sequence(dist, plan, seed, r)
        tr = run_closed_loop(ctrl, plan, w)
        k = len(tr.u)
        viol[:k] += np.any(tr.violations_x, axis=1)
        viol_u[:k] += tr.violations_u
        costs[r] = tr.total_cost
        fallbacks += tr.fallback_count
        if tr.failed:
            failures.append((r, tr.failure))
        if keep_traces:
            traces.append(tr)
    rep = MonteCarloReport(variant or ctrl.variant, runs, seed, viol, viol_u, costs, fallbacks, failures)
    if nominal_costs is not None:
        rep.cost_ratio_vs_nominal = float(np.mean(costs) / np.mean(nominal_costs))
    return (rep, traces) if keep_traces else rep
