"""Gaussian error propagation and chance-constraint back-offs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polytope import Box

# rational approximation coefficients (Acklam)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
                / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    return -_acklam(1.0 - p)


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile, absolute error below 1e-9 on (0, 1).

    Rational initial guess refined with one Halley step; the residual is
    taken in the tail closest to ``p`` so that upper quantiles keep full
    relative precision.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    z = _acklam(p)
    if p < 0.5:
        resid = norm_cdf(z) - p
    else:
        resid = (1.0 - p) - _norm_sf(z)
    u = resid * math.sqrt(2.0 * math.pi) * math.exp(0.5 * z * z)
    return z - u / (1.0 + 0.5 * z * u)


def kappa(beta: float) -> float:
    """Standard-deviation multiple for a violation probability ``beta``."""
    return inv_norm_cdf(1.0 - beta)


@dataclass(frozen=True)
class DisturbanceModel:
    sigma_w: np.ndarray
    support: Box

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigma_w, dtype=float))
        if np.any(s < 0):
            raise ValueError("standard deviations must be non-negative")
        if s.size != self.support.dim:
            raise ValueError("sigma_w and support dimensions differ")
        object.__setattr__(self, "sigma_w", s)

    @property
    def Sigma_w(self) -> np.ndarray:
        return np.diag(self.sigma_w ** 2)

    @classmethod
    def default(cls) -> "DisturbanceModel":
        return cls(np.array([0.0008, 0.008]), Box.symmetric([0.0016, 0.016]))


@dataclass(frozen=True)
class ChanceConstraint:
    """One individual chance constraint ``Pr[row @ x <= bound] >= 1 - beta``."""

    row: np.ndarray
    bound: float
    beta: float

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.row, dtype=float))
        if not np.any(r):
            raise ValueError("constraint row must be nonzero")
        if not 0.0 < self.beta <= 0.5:
            raise ValueError(f"beta must lie in (0, 0.5], got {self.beta}")
        object.__setattr__(self, "row", r)


def propagate_covariance(A_K, Sigma_w, N: int) -> np.ndarray:
    """Error covariances for prediction steps ``0..N``, shape ``(N+1, n, n)``."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    Sigma_w = np.atleast_2d(np.asarray(Sigma_w, dtype=float))
    n = A_K.shape[0]
    out = np.zeros((N + 1, n, n))
    for i in range(N):
        S = A_K @ out[i] @ A_K.T + Sigma_w
        out[i + 1] = 0.5 * (S + S.T)
    return out


def _quantile_scaled(rows: np.ndarray, betas: np.ndarray, cov: np.ndarray) -> np.ndarray:
    var = np.einsum("jn,inm,jm->ji", rows, cov, rows)
    if np.any(var < -1e-14):
        raise ValueError("covariance schedule is not positive semidefinite")
    k = np.array([kappa(b) for b in betas])
    return k[:, None] * np.sqrt(np.maximum(var, 0.0))


def state_backoffs(specs: Sequence[ChanceConstraint], cov: np.ndarray) -> np.ndarray:
    """``eta_x[j, i]`` for prediction steps ``i = 0..N`` (column 0 is zero).

    Only columns ``1..N`` are used to tighten constraints on ``s_{t+i|t}``.
    """
    rows = np.array([s.row for s in specs])
    betas = np.array([s.beta for s in specs])
    return _quantile_scaled(rows, betas, cov)


def control_backoffs(specs: Sequence[ChanceConstraint], K, cov: np.ndarray) -> np.ndarray:
    """``eta_u[j, i]`` for input steps ``i = 0..N-1``, from the error covariance at step ``i``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    rows = np.array([s.row for s in specs]) @ K
    betas = np.array([s.beta for s in specs])
    return _quantile_scaled(rows, betas, cov[:-1])


def format_backoff_csv(eta: np.ndarray, ids: Sequence[str], first_step: int = 0) -> str:
    lines = ["constraint_id,step,eta"]
    for j, name in enumerate(ids):
        for i in range(first_step, eta.shape[1]):
            lines.append(f"{name},{i},{float(eta[j, i])!r}")
    return "\n".join(lines) + "\n"
