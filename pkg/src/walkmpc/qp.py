"""Dense strictly convex QP: ``min 1/2 z'Pz + q'z  s.t.  A z <= b``.

Dual active-set method of Goldfarb and Idnani. It starts from the
unconstrained minimiser, repeatedly adds the most violated constraint and
drops constraints whose multipliers would turn negative. No feasible
starting point is needed, and infeasibility shows up as a constraint that
cannot be added, which directly yields a Farkas certificate.

MPC problems re-solve with a fixed Hessian and constraint matrix, so
:class:`DenseQpSolver` factorises once and keeps ``P^{-1} A'`` and the
Gram matrix ``A P^{-1} A'`` as workspace.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

REG_FLOOR = 1e-12


class QpError(ValueError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        d = q.size
        A = np.asarray(self.A_in, dtype=float).reshape(-1, d)
        b = np.atleast_1d(np.asarray(self.b_in, dtype=float))
        if P.shape != (d, d):
            raise QpError(f"P has shape {P.shape}, expected {(d, d)}")
        if A.shape[0] != b.size:
            raise QpError("A_in and b_in row counts differ")
        if np.abs(P - P.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(P).max(initial=0.0)):
            raise QpError("P is not symmetric")
        for k, v in (("P", P), ("q", q), ("A_in", A), ("b_in", b)):
            object.__setattr__(self, k, v)

    @property
    def d(self) -> int:
        return self.q.size

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.P @ z + self.q @ z)


@dataclass
class QpSolution:
    z_star: np.ndarray
    status: Status
    kkt_residual: float
    active_set: list
    multipliers: np.ndarray
    iterations: int
    objective: float = float("nan")
    certificate: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def kkt_residual(p: QpProblem, z, lam) -> float:
    """Max of stationarity, primal feasibility, dual sign and complementarity errors.

    Complementarity uses the natural residual ``min(lam_i, |slack_i|)`` so
    large multipliers on (numerically) active rows are not penalised.
    """
    finite = np.isfinite(p.b_in)
    slack = np.where(finite, p.A_in @ z - np.where(finite, p.b_in, 0.0), -np.inf)
    stat = np.abs(p.P @ z + p.q + p.A_in.T @ lam).max(initial=0.0)
    prim = max(float(slack.max(initial=-np.inf)), 0.0)
    dual = max(float(-lam.min(initial=0.0)), 0.0)
    comp = np.where(finite, np.minimum(np.abs(lam), np.abs(slack)), 0.0).max(initial=0.0)
    return float(max(stat, prim, dual, comp))


class DenseQpSolver:
    """Reusable solver for a fixed ``(P, A_in)`` pair."""

    def __init__(self, P, A_in, feas_tol: float = 1e-10):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        d = P.shape[0]
        A = np.asarray(A_in, dtype=float).reshape(-1, d)
        if np.abs(P - P.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(P).max(initial=0.0)):
            raise QpError("P is not symmetric")
        self.P = P
        self.A = A
        self.d, self.m = d, A.shape[0]
        self.feas_tol = feas_tol
        self._chol = self._factor(P)
        self.Pinv_At = sla.cho_solve(self._chol, A.T) if self.m else np.zeros((d, 0))
        self.gram = A @ self.Pinv_At
        self.row_norm = np.linalg.norm(A, axis=1) if self.m else np.zeros(0)
        if np.any(self.row_norm == 0):
            raise QpError("constraint matrix has a zero row")
        self.max_iter = 10 * (d + self.m)

    @staticmethod
    def _factor(P: np.ndarray):
        # regularise only when P is (numerically) singular
        d = P.shape[0]
        scale = max(1.0, float(np.abs(np.diag(P)).max(initial=0.0)))
        if np.linalg.eigvalsh(P).min(initial=np.inf) < -1e-10 * scale:
            raise QpError("P is not positive semidefinite")
        try:
            L = sla.cho_factor(P, lower=True)
            if np.diag(L[0]).min(initial=np.inf) ** 2 > REG_FLOOR * scale:
                return L
        except np.linalg.LinAlgError:
            pass
        try:
            return sla.cho_factor(P + REG_FLOOR * np.eye(d), lower=True)
        except np.linalg.LinAlgError as exc:
            raise QpError("P is not positive semidefinite") from exc

    def solve(self, q, b) -> QpSolution:
        q = np.asarray(q, dtype=float)
        b = np.asarray(b, dtype=float)
        A, Pinv_At, gram = self.A, self.Pinv_At, self.gram
        z = -sla.cho_solve(self._chol, q)
        active: list[int] = []
        u = np.zeros(0)
        finite = np.isfinite(b)
        b_eff = np.where(finite, b, 0.0)
        tol = self.feas_tol * (1.0 + np.abs(b_eff))
        it = 0
        status = Status.OPTIMAL
        cert = None
        while True:
            viol = np.where(finite, (A @ z - b_eff - tol) / self.row_norm, -np.inf) if self.m else np.zeros(0)
            if active:
                viol[active] = -np.inf
            if self.m == 0 or viol.max() <= 0.0:
                break
            p = int(np.argmax(viol))
            t_p = 0.0
            while True:
                it += 1
                if it > self.max_iter:
                    status = Status.MAX_ITER
                    break
                if active:
                    M = gram[np.ix_(active, active)]
                    r = np.linalg.solve(M, gram[active, p])
                    zdir = Pinv_At[:, p] - Pinv_At[:, active] @ r
                else:
                    r = np.zeros(0)
                    zdir = Pinv_At[:, p]
                curv = float(A[p] @ zdir)
                # n_p (numerically) in the span of the active normals
                dependent = len(active) >= self.d or curv <= 1e-11 * float(gram[p, p])
                # dual step: largest t keeping the active multipliers non-negative
                t1, k_block = np.inf, -1
                if r.size:
                    pos = r > 1e-14
                    if np.any(pos):
                        ratios = np.where(pos, u / np.where(pos, r, 1.0), np.inf)
                        k_block = int(np.argmin(ratios))
                        t1 = float(ratios[k_block])
                if dependent:
                    if k_block < 0:
                        status = Status.INFEASIBLE
                        cert = np.zeros(self.m)
                        cert[p] = 1.0
                        cert[active] = -r
                        break
                    u = u - t1 * r
                    t_p += t1
                    del active[k_block]
                    u = np.delete(u, k_block)
                    continue
                t2 = float(A[p] @ z - b[p]) / curv
                if t2 <= t1:
                    z = z - t2 * zdir
                    u = np.append(u - t2 * r, t_p + t2)
                    active.append(p)
                    break
                z = z - t1 * zdir
                u = u - t1 * r
                t_p += t1
                del active[k_block]
                u = np.delete(u, k_block)
            if status is not Status.OPTIMAL:
                break
        if status is Status.OPTIMAL and active:
            # recompute the iterate from the final active set to shed drift
            z0 = -sla.cho_solve(self._chol, q)
            u = np.linalg.solve(gram[np.ix_(active, active)], A[active] @ z0 - b[active])
            z = z0 - Pinv_At[:, active] @ u
            # one step of iterative refinement on the active rows
            du = np.linalg.solve(gram[np.ix_(active, active)], A[active] @ z - b[active])
            u = u + du
            z = z - Pinv_At[:, active] @ du
        lam = np.zeros(self.m)
        if active:
            lam[active] = np.maximum(u, 0.0)
        prob = QpProblem(self.P, q, A, b)
        res = kkt_residual(prob, z, lam) if status is Status.OPTIMAL else float("inf")
        return QpSolution(z, status, res, sorted(active), lam, it, prob.objective(z), cert)


def solve(p: QpProblem) -> QpSolution:
    return DenseQpSolver(p.P, p.A_in).solve(p.q, p.b_in)


def format_problem(p: QpProblem, sol: QpSolution | None = None) -> str:
    """Plain-text dump for reproducing a failing solve."""
    def row(v):
        return " ".join(repr(float(x)) for x in np.atleast_1d(v))

    lines = [f"qp d={p.d} m={p.A_in.shape[0]}", "P"] + [row(r) for r in p.P]
    lines += ["q", row(p.q), "A_in"] + [row(r) for r in p.A_in] + ["b_in", row(p.b_in)]
    if sol is not None:
        lines += [f"status {sol.status.value}", f"kkt_residual {sol.kkt_residual!r}",
                  "z_star", row(sol.z_star), "active " + " ".join(map(str, sol.active_set))]
    return "\n".join(lines) + "\n"


def parse_problem(text: str) -> QpProblem:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    head = dict(kv.split("=") for kv in lines[0].split()[1:])
    d, m = int(head["d"]), int(head["m"])
    vec = lambda s: np.array([float(x) for x in s.split()]) if s else np.zeros(0)
    i = lines.index("P") + 1
    P = np.array([vec(lines[i + k]) for k in range(d)])
    q = vec(lines[lines.index("q") + 1])
    i = lines.index("A_in") + 1
    A = np.array([vec(lines[i + k]) for k in range(m)]).reshape(m, d)
    b = vec(lines[lines.index("b_in") + 1])
    return QpProblem(P, q, A, b)
