"""Condensed linear MPC for one LIPM axis: nominal, tube-based robust, stochastic.

All three controllers solve the same QP over the nominal inputs
``v_{t..t+N-1}``; they differ only in how the state and CoP constraints are
tightened and in what happens when the QP from the measured state is
infeasible.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import polytope as pt
from . import stochastic as st
from .model import LtiModel
from .qp import DenseQpSolver, QpProblem, QpSolution

log = logging.getLogger(__name__)


class ControllerFailure(RuntimeError):
    """Raised when no admissible input can be computed at a time step."""


class InfeasibleByConstruction(ControllerFailure):
    """A tightened constraint set is empty before any QP is solved."""


class Mode(enum.IntEnum):
    MODE1 = 1
    MODE2 = 2


@dataclass(frozen=True)
class CostWeights:
    """Weights of the tracking cost on velocity, position and CoP errors."""

    velocity: float = 1.0
    position: float = 0.0
    cop: float = 1e-3

    def __post_init__(self):
        w = (self.velocity, self.position, self.cop)
        if min(w) < 0 or max(w) <= 0:
            raise ValueError(f"weights must be non-negative with at least one positive: {w}")


@dataclass
class OcpDefinition:
    """Per-axis optimal control problem over an absolute time grid.

    ``state_bounds[t, j]`` is the right-hand side of ``state_rows[j] @ x_t <= .``
    (``inf`` where the row is inactive). CoP bounds and references are indexed
    the same way and must cover every ``t + N`` the controller will reach.
    """

    model: LtiModel
    N: int
    weights: CostWeights
    state_rows: np.ndarray
    state_bounds: np.ndarray
    cop_lower: np.ndarray
    cop_upper: np.ndarray
    c_des: np.ndarray
    cdot_des: np.ndarray
    p_des: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon must be at least 1")
        self.state_rows = np.atleast_2d(np.asarray(self.state_rows, dtype=float))
        T = len(self.p_des)
        self.state_bounds = np.asarray(self.state_bounds, dtype=float).reshape(T, -1)
        for name in ("cop_lower", "cop_upper", "c_des", "cdot_des", "p_des"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (T,):
                raise ValueError(f"{name} must have length {T}")
            setattr(self, name, arr)
        if self.state_bounds.shape[1] != self.state_rows.shape[0]:
            raise ValueError("state_bounds columns must match state_rows")

    @property
    def length(self) -> int:
        return len(self.p_des)

    def stage_cost(self, t: int, x, u: float) -> float:
        w = self.weights
        return float(w.velocity * (self.cdot_des[t] - x[1]) ** 2
                     + w.position * (self.c_des[t] - x[0]) ** 2
                     + w.cop * (self.p_des[t] - u) ** 2)


@dataclass(frozen=True)
class Tightening:
    """Back-offs by prediction step.

    ``state[j, i]`` tightens row ``j`` on ``s_{t+i|t}`` (column 0 unused);
    ``cop_upper[i]`` / ``cop_lower[i]`` shrink the CoP interval of ``v_{t+i|t}``.
    """

    state: np.ndarray
    cop_upper: np.ndarray
    cop_lower: np.ndarray

    @classmethod
    def zero(cls, n_rows: int, N: int) -> "Tightening":
        return cls(np.zeros((n_rows, N + 1)), np.zeros(N), np.zeros(N))

    @classmethod
    def robust(cls, state_rows, omega: pt.Zonotope, K, N: int) -> "Tightening":
        """Constant tightening ``X - Omega`` and ``U - K Omega``."""
        eta_x = pt.support_many(omega, np.atleast_2d(state_rows))
        K_omega = pt.linear_map(omega, np.atleast_2d(K))
        up, lo = pt.support(K_omega, [1.0]), pt.support(K_omega, [-1.0])
        state = np.repeat(eta_x[:, None], N + 1, axis=1)
        state[:, 0] = 0.0
        return cls(state, np.full(N, up), np.full(N, lo))

    @classmethod
    def stochastic(cls, state_rows, A_K, K, Sigma_w, N: int, beta_x: float,
                   beta_u: float) -> "Tightening":
        """Growing back-offs from the error covariance along the horizon."""
        cov = st.propagate_covariance(A_K, Sigma_w, N)
        rows = np.atleast_2d(state_rows)
        eta_x = st.state_backoffs([st.ChanceConstraint(r, 0.0, beta_x) for r in rows], cov)
        eta_u = st.control_backoffs([st.ChanceConstraint([1.0], 0.0, beta_u),
                                     st.ChanceConstraint([-1.0], 0.0, beta_u)], K, cov)
        return cls(eta_x, eta_u[0], eta_u[1])


class CondensedQp:
    """Prediction matrices and the constant QP data for an OCP.

    States are eliminated: ``s = Phi s0 + Gamma v`` with ``s`` stacking
    ``s_0..s_N``. The tracking cost runs over ``i = 0..N-1`` including the
    (fixed) current state.
    """

    def __init__(self, ocp: OcpDefinition):
        A, B = ocp.model.A, ocp.model.B
        n, N = ocp.model.n, ocp.N
        self.ocp = ocp
        Phi = np.zeros(((N + 1) * n, n))
        Gamma = np.zeros(((N + 1) * n, N))
        Ai = np.eye(n)
        for i in range(N + 1):
            Phi[i * n:(i + 1) * n] = Ai
            Ai = A @ Ai
        for i in range(1, N + 1):
            # s_i depends on v_k for k < i through A^(i-1-k) B
            for k in range(i):
                Gamma[i * n:(i + 1) * n, k] = (Phi[(i - 1 - k) * n:(i - k) * n] @ B)[:, 0]
        self.Phi, self.Gamma = Phi, Gamma
        w = ocp.weights
        # state ordering is [c, cdot]
        Q = np.diag([w.position, w.velocity])
        Qbar = np.kron(np.diag(np.r_[np.ones(N), 0.0]), Q)
        self.Qbar = Qbar
        self.P = 2.0 * (Gamma.T @ Qbar @ Gamma + w.cop * np.eye(N))
        self.P = 0.5 * (self.P + self.P.T)
        H = ocp.state_rows
        mx = H.shape[0]
        self.mx = mx
        # state rows on s_1..s_N, then upper and lower CoP bounds on v_0..v_{N-1}
        Hs = np.kron(np.eye(N), H) @ Gamma[n:]
        self.H_Phi = np.kron(np.eye(N), H) @ Phi[n:]
        self.A_in = np.vstack([Hs, np.eye(N), -np.eye(N)])
        self.solver = DenseQpSolver(self.P, self.A_in)

    def data(self, t: int, s0, tightening: Tightening):
        """Linear term and right-hand side of the QP at time ``t`` from ``s0``."""
        ocp, N = self.ocp, self.ocp.N
        s0 = np.asarray(s0, dtype=float)
        if t + N > ocp.length:
            raise ValueError(f"references end at {ocp.length}, need {t + N}")
        ref = np.zeros((N + 1, 2))
        ref[:N, 0] = ocp.c_des[t:t + N]
        ref[:N, 1] = ocp.cdot_des[t:t + N]
        free = self.Phi @ s0
        q = 2.0 * (self.Gamma.T @ (self.Qbar @ (free - ref.ravel()))
                   - ocp.weights.cop * ocp.p_des[t:t + N])
        hx = (ocp.state_bounds[t + 1:t + N + 1] - tightening.state[:, 1:].T).ravel()
        hx = hx - self.H_Phi @ s0
        up = ocp.cop_upper[t:t + N] - tightening.cop_upper
        lo = ocp.cop_lower[t:t + N] + tightening.cop_lower
        return q, np.concatenate([hx, up, -lo])

    def problem(self, t: int, s0, tightening: Tightening) -> QpProblem:
        q, b = self.data(t, s0, tightening)
        return QpProblem(self.P, q, self.A_in, b)

    def predict(self, s0, v) -> np.ndarray:
        return (self.Phi @ np.asarray(s0, dtype=float) + self.Gamma @ v).reshape(-1, self.ocp.model.n)

    def check_nonempty(self, t: int, tightening: Tightening) -> None:
        """Raise if a tightened CoP interval or state slab is empty over the horizon."""
        ocp, N = self.ocp, self.ocp.N
        up = ocp.cop_upper[t:t + N] - tightening.cop_upper
        lo = ocp.cop_lower[t:t + N] + tightening.cop_lower
        if np.any(lo > up + 1e-12):
            i = int(np.argmax(lo - up))
            raise InfeasibleByConstruction(
                f"tightened CoP interval empty at t={t + i}: [{lo[i]:.6g}, {up[i]:.6g}]")
        H = ocp.state_rows
        if ocp.model.n == 2 and H.shape[0] >= 2:
            hb = ocp.state_bounds[t + 1:t + N + 1] - tightening.state[:, 1:].T
            for a in range(H.shape[0]):
                for b in range(a + 1, H.shape[0]):
                    if np.allclose(H[a], -H[b]) and np.any(hb[:, a] + hb[:, b] < -1e-12):
                        raise InfeasibleByConstruction(
                            f"tightened state slab between rows {a} and {b} is empty")


def build_condensed_qp(ocp: OcpDefinition, s0, t: int = 0,
                       tightening: Optional[Tightening] = None) -> QpProblem:
    tightening = tightening or Tightening.zero(ocp.state_rows.shape[0], ocp.N)
    cq = CondensedQp(ocp)
    cq.check_nonempty(t, tightening)
    return cq.problem(t, s0, tightening)


@dataclass
class StepResult:
    u: float
    v: float
    s: np.ndarray
    mode: Mode
    cost: float
    n_active: int
    plan_states: np.ndarray = field(repr=False)
    plan_inputs: np.ndarray = field(repr=False)


@dataclass
class ControllerState:
    mode: Mode = Mode.MODE1
    plan_states: Optional[np.ndarray] = None
    plan_inputs: Optional[np.ndarray] = None
    plan_time: int = -1
    fallback_count: int = 0


class MpcController:
    """Receding-horizon controller with optional tube feedback and Mode-2 fallback.

    ``u = v*_{t|t} + K (x_t - s_{t|t})``. In Mode 1 ``s_{t|t} = x_t``; when
    that QP is infeasible and ``fallback`` is set, Mode 2 re-anchors at the
    nominal state predicted one step earlier, ``s_{t|t} = s_{t+1|t-1}``.
    """

    variant = "mpc"

    def __init__(self, ocp: OcpDefinition, tightening: Optional[Tightening] = None,
                 K=None, fallback: bool = True, name: Optional[str] = None):
        self.ocp = ocp
        self.tightening = tightening or Tightening.zero(ocp.state_rows.shape[0], ocp.N)
        self.K = np.zeros((1, ocp.model.n)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
        self.fallback = fallback
        self.qp = CondensedQp(ocp)
        self.state = ControllerState()
        if name:
            self.variant = name

    def reset(self) -> None:
        self.state = ControllerState()

    def solve_from(self, t: int, s0) -> QpSolution:
        q, b = self.qp.data(t, s0, self.tightening)
        return self.qp.solver.solve(q, b)

    def step(self, t: int, x) -> StepResult:
        x = np.asarray(x, dtype=float)
        self.qp.check_nonempty(t, self.tightening)
        sol = self.solve_from(t, x)
        s0, mode = x, Mode.MODE1
        if not sol.optimal:
            st_ = self.state
            if not self.fallback or st_.plan_states is None or st_.plan_time != t - 1:
                raise ControllerFailure(f"QP {sol.status.value} at t={t} (no fallback available)")
            s0 = st_.plan_states[1]
            mode = Mode.MODE2
            sol = self.solve_from(t, s0)
            if not sol.optimal:
                raise ControllerFailure(f"Mode 2 QP {sol.status.value} at t={t}")
            st_.fallback_count += 1
        v = sol.z_star
        plan = self.qp.predict(s0, v)
        self.state.mode = mode
        self.state.plan_states = plan
        self.state.plan_inputs = v
        self.state.plan_time = t
        u = float(v[0] + (self.K @ (x - s0))[0])
        # the QP objective omits the constant part of the tracking cost
        cost = float(sol.objective)
        return StepResult(u, float(v[0]), np.array(s0, dtype=float), mode, cost,
                          len(sol.active_set), plan, v)


def nominal_controller(ocp: OcpDefinition, K=None) -> MpcController:
    """Untightened MPC. With a gain ``K`` it gets the same Mode-2 fallback as
    the tube controllers (feedback only acts after a fallback); without one an
    infeasible QP is a hard failure."""
    return MpcController(ocp, None, K, fallback=K is not None, name="nominal")


def rmpc_controller(ocp: OcpDefinition, omega: pt.Zonotope, K) -> MpcController:
    t = Tightening.robust(ocp.state_rows, omega, K, ocp.N)
    return MpcController(ocp, t, K, fallback=True, name="rmpc")


def smpc_controller(ocp: OcpDefinition, A_K, K, Sigma_w, beta_x: float,
                    beta_u: float) -> MpcController:
    t = Tightening.stochastic(ocp.state_rows, A_K, K, Sigma_w, ocp.N, beta_x, beta_u)
    return MpcController(ocp, t, K, fallback=True, name="smpc")


def nominal_step(ctrl: MpcController, t: int, x) -> float:
    return ctrl.step(t, x).u


def rmpc_step(ctrl: MpcController, t: int, x) -> float:
    return ctrl.step(t, x).u


def smpc_step(ctrl: MpcController, t: int, x) -> float:
    return ctrl.step(t, x).u
