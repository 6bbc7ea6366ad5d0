"""Turn an :class:`ExperimentConfig` into models, sets, controllers and results."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mpc, polytope as pt, sim, stochastic as st, worstcase as wc
from .config import ExperimentConfig
from .model import LipmParams, LtiModel, closed_loop, deadbeat_gain, discretize_lipm

# stabilizing lateral gain used for the tube and stochastic controllers by default
REFERENCE_GAIN = (3.386, 0.968)


@dataclass
class Setup:
    cfg: ExperimentConfig
    model: LtiModel
    K: np.ndarray
    K_deadbeat: np.ndarray
    A_K: np.ndarray
    dist: st.DisturbanceModel
    plan: sim.FootstepPlan
    ocp: mpc.OcpDefinition


def gain_from(text: str, model: LtiModel) -> np.ndarray:
    text = text.strip()
    if text == "reference":
        return np.array([REFERENCE_GAIN])
    if text == "deadbeat":
        return deadbeat_gain(model)
    return np.array([[float(s) for s in text.split(",")]])


def build(cfg: ExperimentConfig) -> Setup:
    m, d, c, p = cfg.model, cfg.disturbance, cfg.controller, cfg.plan
    model = discretize_lipm(LipmParams(m.com_height, m.gravity, m.sampling_dt))
    K = gain_from(c.gain, model)
    dist = st.DisturbanceModel(np.array([d.sigma_c, d.sigma_cdot]),
                               pt.Box.symmetric([d.bound_c, d.bound_cdot]))
    plan_cfg = sim.PlanConfig(p.n_steps, p.step_duration, p.in_place_steps, p.foot_offset_y,
                              p.cop_half_width_y, p.hallway_half_width, p.hallway_start_step,
                              p.disturbance_start_step, p.first_foot_sign, p.initial_double_support)
    plan = sim.build_footstep_plan(plan_cfg, c.horizon)
    weights = mpc.CostWeights(c.weight_velocity, c.weight_position, c.weight_cop)
    ocp = sim.lateral_ocp(model, plan, c.horizon, weights)
    return Setup(cfg, model, K, deadbeat_gain(model), closed_loop(model, K), dist, plan, ocp)


def tube_set(s: Setup, eps: float | None = None) -> pt.Zonotope:
    """mRPI set of the configured gain: exact if ``A_K`` is nilpotent, else outer-eps."""
    W = s.dist.support
    if np.abs(np.linalg.matrix_power(s.A_K, s.model.n)).max() < 1e-10:
        return pt.mrpi_exact_nilpotent(s.A_K, W)
    return pt.mrpi_outer_eps(s.A_K, W, s.cfg.controller.mrpi_eps if eps is None else eps).omega


def variant_names(cfg: ExperimentConfig) -> list[str]:
    """Labels of the controllers to simulate; the nominal baseline always comes first."""
    names = ["nominal"]
    if "rmpc" in cfg.controller.variants:
        names.append("rmpc")
    if "smpc" in cfg.controller.variants:
        names += [f"smpc_bx{b!r}" for b in cfg.controller.beta_x]
    return names


def controller_factory(s: Setup, name: str, omega: pt.Zonotope | None = None):
    c = s.cfg.controller
    if name == "nominal":
        return lambda: mpc.nominal_controller(s.ocp, s.K)
    if name == "rmpc":
        om = tube_set(s) if omega is None else omega
        return lambda: mpc.rmpc_controller(s.ocp, om, s.K)
    if name.startswith("smpc_bx"):
        bx = float(name[len("smpc_bx"):])
        return lambda: mpc.smpc_controller(s.ocp, s.A_K, s.K, s.dist.Sigma_w, bx, c.beta_u)
    raise ValueError(f"unknown variant {name!r}")


def run_variants(s: Setup, names=None, runs: int | None = None, seed: int | None = None,
                 ) -> dict[str, sim.MonteCarloReport]:
    """Monte-Carlo runs of every variant on the same disturbance sequences."""
    e = s.cfg.experiment
    runs = e.runs if runs is None else runs
    seed = e.seed if seed is None else seed
    names = variant_names(s.cfg) if names is None else list(names)
    if names[0] != "nominal":
        names = ["nominal"] + [n for n in names if n != "nominal"]
    seqs = [sim.disturbance_sequence(s.dist, s.plan, seed, r) for r in range(runs)]
    omega = tube_set(s) if "rmpc" in names else None
    out: dict[str, sim.MonteCarloReport] = {}
    for name in names:
        base = out["nominal"].run_costs if out else None
        rep = sim.monte_carlo(controller_factory(s, name, omega), s.plan, s.dist, runs, seed,
                              name, nominal_costs=base, sequences=seqs)
        if name == "nominal":
            rep.cost_ratio_vs_nominal = 1.0
        out[name] = rep
    return out


def worstcase_series(s: Setup) -> wc.WorstCaseReport:
    e = s.cfg.experiment
    return wc.worst_case_analysis(np.array(e.worstcase_row), s.A_K, s.dist.sigma_w,
                                  e.worstcase_beta, e.worstcase_i_max)
