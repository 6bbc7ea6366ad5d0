"""Equivalent worst-case disturbance boxes of chance-constrained MPC.

For a single constraint row ``q`` the stochastic back-off at prediction step
``i + 1`` is ``kappa(beta) * sqrt(sum_j b_j' Sigma_w b_j)`` with
``b_j' = q' A_K^j``. The box-bounded disturbance set that produces the same
back-off under a worst-case argument has half-widths
``zeta_i * sigma_w`` with ``zeta_i = kappa(beta) * sqrt(alpha_i)``. The
helpers here compute these series and run the monotonicity experiments.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import spectral_radius
from .stochastic import kappa


def sensitivity_rows(q, A_K, i_max: int) -> np.ndarray:
    """Rows ``b_j = (q' A_K^j)'`` for ``j = 0..i_max``, shape ``(i_max+1, n)``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if not np.any(q):
        raise ValueError("q must be nonzero")
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    rows = np.empty((i_max + 1, q.size))
    rows[0] = q
    for j in range(i_max):
        rows[j + 1] = rows[j] @ A_K
    return rows


def eta_from_box(rows: np.ndarray, w_max) -> float:
    """Max of ``q' e`` over ``e`` in ``sum_j A_K^j [-w_max, w_max]``."""
    w_max = np.asarray(w_max, dtype=float)
    if np.any(w_max < 0):
        raise ValueError("w_max must be non-negative")
    return float(np.abs(rows).sum(axis=0) @ w_max)


def eta_from_sigma(rows: np.ndarray, sigma_w, beta: float) -> float:
    sigma_w = np.asarray(sigma_w, dtype=float)
    var = float(np.sum((rows * rows) @ (sigma_w ** 2)))
    return kappa(beta) * np.sqrt(var)


def alpha_series(rows: np.ndarray, sigma_w) -> np.ndarray:
    """``alpha_i`` for every prefix ``0..i`` of the sensitivity rows."""
    sigma_w = np.asarray(sigma_w, dtype=float)
    if np.any(sigma_w <= 0):
        raise ValueError("sigma_w must be positive")
    num = np.cumsum((rows * rows) @ (sigma_w ** 2))
    den = np.cumsum(np.abs(rows) @ sigma_w) ** 2
    if np.any(den == 0):
        raise ValueError("a prefix of the sensitivity rows is identically zero")
    return num / den


@dataclass
class WorstCaseReport:
    alpha: np.ndarray
    zeta: np.ndarray
    w_max: np.ndarray
    eta: np.ndarray
    beta: float


def zeta_and_wmax(alpha, beta: float, sigma_w, rows: np.ndarray | None = None) -> WorstCaseReport:
    alpha = np.asarray(alpha, dtype=float)
    sigma_w = np.asarray(sigma_w, dtype=float)
    zeta = kappa(beta) * np.sqrt(alpha)
    w_max = zeta[:, None] * sigma_w[None, :]
    if rows is not None:
        eta = np.array([eta_from_box(rows[: i + 1], w_max[i]) for i in range(alpha.size)])
    else:
        eta = np.full(alpha.size, np.nan)
    return WorstCaseReport(alpha, zeta, w_max, eta, beta)


def worst_case_analysis(q, A_K, sigma_w, beta: float, i_max: int) -> WorstCaseReport:
    rows = sensitivity_rows(q, A_K, i_max)
    return zeta_and_wmax(alpha_series(rows, sigma_w), beta, sigma_w, rows)


def brute_force_eta(rows: np.ndarray, w_max) -> float:
    """Enumerate every sign corner of the disturbance sequence (small cases only)."""
    w_max = np.asarray(w_max, dtype=float)
    n = w_max.size
    best = -np.inf
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=n))) * w_max
    for seq in itertools.product(range(len(corners)), repeat=len(rows)):
        val = sum(rows[j] @ corners[k] for j, k in enumerate(seq))
        best = max(best, val)
    return float(best)


# experiments -------------------------------------------------------------

def _alpha_1d_exact(a: Fraction, q: Fraction, i_max: int) -> list[Fraction]:
    # sigma cancels in one dimension
    out, num, den, b = [], Fraction(0), Fraction(0), q
    for _ in range(i_max + 1):
        num += b * b
        den += abs(b)
        out.append(num / (den * den))
        b *= a
    return out


def _decrease_margins_1d(a: float, i_max: int) -> np.ndarray:
    """Ratios ``t C / (2 S1 S2)`` for ``i = 0..i_max-1``; ``alpha_{i+1} < alpha_i`` iff below 1.

    With ``r = |a|``, ``S1 = sum r^j``, ``S2 = sum r^2j`` over ``j <= i``,
    ``t = r^(i+1)`` and ``C = S1^2 - S2`` (the cross terms), the decrease
    condition rearranges to ``t C < 2 S1 S2``. Both sides are sums of
    positive terms, so floats evaluate them without cancellation.
    """
    r = abs(a)
    out = np.empty(i_max)
    s1, s2, c, t = 1.0, 1.0, 0.0, 1.0
    for i in range(i_max):
        t *= r
        out[i] = t * c / (2.0 * s1 * s2)
        c += 2.0 * t * s1
        s1 += t
        s2 += t * t
    return out


@dataclass
class MonotonicityReport:
    trials: int
    horizon: int
    seed: int
    counterexamples: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def violation_fraction(self) -> float:
        return len(self.counterexamples) / self.trials if self.trials else 0.0


def monotonicity_experiment_1d(trials: int, seed: int, horizon: int = 30,
                               a_range=(1e-3, 0.999)) -> MonotonicityReport:
    """Check ``alpha_{i+1} < alpha_i`` strictly for random scalar systems.

    The decrease test is rearranged so floats never subtract nearly equal
    numbers; instances near the boundary fall back to exact rational
    arithmetic on the sampled floats.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    rep = MonotonicityReport(trials, horizon, seed)
    for t in range(trials):
        a = rng.uniform(*a_range) * rng.choice((-1.0, 1.0))
        q = rng.uniform(0.1, 10.0) * rng.choice((-1.0, 1.0))
        sigma = rng.uniform(1e-3, 1.0)
        # clear margins are decided in floats, anything near the boundary exactly
        ratio = _decrease_margins_1d(a, horizon)
        bad = [i for i in range(horizon) if ratio[i] >= 1.0]
        if np.any(np.abs(ratio - 1.0) < 1e-9):
            al = _alpha_1d_exact(Fraction(a), Fraction(q), horizon)
            bad = [i for i in range(horizon) if not al[i + 1] < al[i]]
        rep.records.append((t, abs(a), len(bad)))
        if bad:
            rep.counterexamples.append({"trial": t, "a": a, "q": q, "sigma": sigma, "steps": bad})
    return rep


def random_schur(rng: np.random.Generator, n: int, rho_cap: float = 0.99) -> np.ndarray:
    """Gaussian matrix rescaled to a uniformly drawn spectral radius below ``rho_cap``."""
    while True:
        M = rng.standard_normal((n, n))
        rho = spectral_radius(M)
        if rho == 0:
            continue
        M *= rng.uniform(0.0, 1.0) / rho
        if spectral_radius(M) < rho_cap:
            return M


def monotonicity_experiment_nd(n: int, trials: int, seed: int, horizon: int = 30,
                               sigma_w=None, tol: float = 1e-12) -> MonotonicityReport:
    """Fraction of random Schur closed loops whose ``alpha`` series ever increases.

    All trials share one disturbance standard deviation vector.
    """
    if n < 2:
        raise ValueError("use monotonicity_experiment_1d for n = 1")
    rng = np.random.default_rng(seed)
    sigma_w = np.ones(n) if sigma_w is None else np.asarray(sigma_w, dtype=float)
    rep = MonotonicityReport(trials, horizon, seed)
    for t in range(trials):
        A_K = random_schur(rng, n)
        q = rng.standard_normal(n)
        al = alpha_series(sensitivity_rows(q, A_K, horizon), sigma_w)
        jumps = np.diff(al)
        worst = float(max(jumps.max(), 0.0))
        rep.records.append((t, spectral_radius(A_K), worst))
        if worst > tol:
            rep.counterexamples.append({"trial": t, "A_K": A_K.tolist(), "q": q.tolist(),
                                        "max_increase": worst,
                                        "first_step": int(np.argmax(jumps > tol))})
    return rep
