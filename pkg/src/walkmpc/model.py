"""Linear inverted pendulum dynamics for one horizontal axis.

State is ``x = [c, cdot]`` (CoM position and velocity), input is the CoP
position ``p``. Both horizontal axes share the same model and are treated
independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ModelError(ValueError):
    """Raised for invalid physical parameters or non-finite model matrices."""


class SynthesisError(ValueError):
    """Raised when a feedback gain cannot be synthesised (uncontrollable pair)."""


@dataclass(frozen=True)
class LipmParams:
    com_height: float = 0.88
    gravity: float = 9.81
    sampling_dt: float = 0.1

    def __post_init__(self):
        if not (self.com_height > 0 and self.gravity > 0):
            raise ModelError("CoM height and gravity must be positive")
        if not self.sampling_dt >= 0:
            raise ModelError("sampling time must be non-negative")

    @property
    def omega_n(self) -> float:
        return math.sqrt(self.gravity / self.com_height)


@dataclass(frozen=True)
class LtiModel:
    A: np.ndarray
    B: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def discretize_lipm(params: LipmParams) -> LtiModel:
    """Exact zero-order-hold discretization of ``cddot = w^2 (c - p)``."""
    w = params.omega_n
    wt = w * params.sampling_dt
    ch, sh = math.cosh(wt), math.sinh(wt)
    A = np.array([[ch, sh / w], [w * sh, ch]])
    B = np.array([[1.0 - ch], [-w * sh]])
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ModelError(f"non-finite discretization for {params}")
    A.setflags(write=False)
    B.setflags(write=False)
    return LtiModel(A, B, params.sampling_dt)


def controllability_matrix(model: LtiModel) -> np.ndarray:
    blocks = [model.B]
    for _ in range(model.n - 1):
        blocks.append(model.A @ blocks[-1])
    return np.hstack(blocks)


def deadbeat_gain(model: LtiModel) -> np.ndarray:
    """Gain ``K`` (1 x n) placing every eigenvalue of ``A + B K`` at the origin.

    Ackermann's formula with the desired characteristic polynomial ``z^n``:
    ``K = -e_n^T C^{-1} A^n`` where ``C`` is the controllability matrix.
    """
    if model.m != 1:
        raise SynthesisError("dead-beat synthesis implemented for single-input models")
    C = controllability_matrix(model)
    # relative conditioning test; an exactly singular C is the common failure
    if abs(np.linalg.det(C)) <= 1e-12 * max(1.0, np.linalg.norm(C, 2) ** model.n):
        raise SynthesisError("(A, B) is not controllable")
    e_last = np.zeros((1, model.n))
    e_last[0, -1] = 1.0
    An = np.linalg.matrix_power(model.A, model.n)
    K = -e_last @ np.linalg.solve(C, An)
    return K


def closed_loop(model: LtiModel, K) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (model.m, model.n):
        raise ValueError(f"gain shape {K.shape} does not match model ({model.m}, {model.n})")
    return model.A + model.B @ K


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def is_schur(M: np.ndarray) -> bool:
    return spectral_radius(M) < 1.0
