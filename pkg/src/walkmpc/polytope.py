"""Convex sets for tube computations.

Disturbance reach sets are zonotopes (center plus generator columns), which
keeps Minkowski sums and linear maps exact. Constraint sets are halfspace
polytopes. Tightening is done row by row with support functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import spectral_radius


class SetError(ValueError):
    pass


class PreconditionError(SetError):
    pass


class DivergenceError(SetError):
    pass


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise SetError("box bounds have different shapes")
        if np.any(lo > hi):
            raise SetError(f"box lower bound exceeds upper bound: {lo} > {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, half_widths) -> "Box":
        r = np.asarray(half_widths, dtype=float)
        return cls(-r, r)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def to_hpolytope(self) -> "HPolytope":
        I = np.eye(self.dim)
        return HPolytope(np.vstack([I, -I]), np.concatenate([self.upper, -self.lower]))


@dataclass(frozen=True)
class Zonotope:
    """``{center + G @ lam : |lam|_inf <= 1}``; generators are the columns of ``G``."""

    center: np.ndarray
    generators: np.ndarray = field(default=None)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        G = self.generators
        G = np.zeros((c.size, 0)) if G is None else np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = G.reshape(c.size, -1)
        if G.shape[0] != c.size:
            raise SetError(f"generator rows {G.shape[0]} != dimension {c.size}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(G))):
            raise SetError("zonotope data must be finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", G)

    @classmethod
    def point(cls, x) -> "Zonotope":
        return cls(np.asarray(x, dtype=float))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    def support(self, d) -> float:
        return support(self, d)

    def interval_hull(self) -> Box:
        r = np.abs(self.generators).sum(axis=1)
        return Box(self.center - r, self.center + r)

    def scale(self, factor: float) -> "Zonotope":
        return Zonotope(factor * self.center, factor * self.generators)

    def reduced(self, tol: float = 0.0) -> "Zonotope":
        """Drop generators whose infinity norm is at most ``tol``."""
        keep = np.abs(self.generators).max(axis=0, initial=0.0) > tol
        return Zonotope(self.center, self.generators[:, keep])


@dataclass(frozen=True)
class HPolytope:
    """``{x : H x <= h}``."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if H.shape[0] != h.size:
            raise SetError("H and h row counts differ")
        if np.any(np.all(H == 0.0, axis=1)):
            raise SetError("H has a zero row")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.all(self.H @ np.asarray(x, dtype=float) <= self.h + tol))


@dataclass(frozen=True)
class TightenedSet:
    """Result of a Pontryagin difference; ``empty`` flags over-tightening."""

    polytope: HPolytope
    empty: bool
    backoff: np.ndarray


def box_to_zonotope(b: Box) -> Zonotope:
    return Zonotope(b.center, np.diag(b.radius))


def linear_map(Z: Zonotope, M) -> Zonotope:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != Z.dim:
        raise SetError(f"map with {M.shape[1]} columns applied to dimension {Z.dim}")
    return Zonotope(M @ Z.center, M @ Z.generators)


def minkowski_sum(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    if Z1.dim != Z2.dim:
        raise SetError(f"dimension mismatch: {Z1.dim} vs {Z2.dim}")
    return Zonotope(Z1.center + Z2.center, np.hstack([Z1.generators, Z2.generators]))


def support(Z: Zonotope, d) -> float:
    d = np.asarray(d, dtype=float).ravel()
    return float(d @ Z.center + np.abs(d @ Z.generators).sum())


def support_many(Z: Zonotope, D: np.ndarray) -> np.ndarray:
    """Support function evaluated at each row of ``D``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return D @ Z.center + np.abs(D @ Z.generators).sum(axis=1)


def pontryagin_diff(X: HPolytope, Z: Zonotope, interior_point=None) -> TightenedSet:
    """``X - Z`` (Pontryagin); exact per halfspace via support functions.

    Emptiness is decided with an LP (or at ``interior_point`` if the caller
    knows a candidate) and reported, never raised.
    """
    if X.dim != Z.dim:
        raise SetError(f"dimension mismatch: {X.dim} vs {Z.dim}")
    eta = support_many(Z, X.H)
    out = HPolytope(X.H, X.h - eta)
    return TightenedSet(out, is_empty(out, interior_point), eta)


def is_empty(P: HPolytope, candidate=None) -> bool:
    if candidate is not None and P.contains(candidate, 1e-12):
        return False
    if P.dim == 1:
        Hc = P.H[:, 0]
        up = P.h[Hc > 0] / Hc[Hc > 0]
        lo = P.h[Hc < 0] / Hc[Hc < 0]
        return bool(up.size and lo.size and lo.max() > up.min() + 1e-12)
    from scipy.optimize import linprog

    res = linprog(np.zeros(P.dim), A_ub=P.H, b_ub=P.h, bounds=[(None, None)] * P.dim,
                  method="highs")
    return res.status == 2


def _facet_normals_2d(G: np.ndarray) -> np.ndarray:
    # perpendiculars of the generators are the facet normals of a planar
    # zonotope; axis directions make degenerate (flat or point) sets complete
    perp = np.vstack([-G[1], G[0]]).T
    D = np.vstack([perp, np.eye(2)])
    norms = np.linalg.norm(D, axis=1)
    D = D[norms > 0] / norms[norms > 0, None]
    return np.vstack([D, -D])


def zonotope_to_hpolytope(Z: Zonotope) -> HPolytope:
    """Halfspace form of a planar zonotope (possibly with redundant rows)."""
    if Z.dim != 2:
        raise SetError("halfspace conversion is implemented for planar zonotopes only")
    D = _facet_normals_2d(Z.reduced().generators)
    return HPolytope(D, support_many(Z, D))


def contains(Z: Zonotope, x, tol: float = 0.0) -> bool:
    """Membership of ``x`` in ``Z`` inflated by a ``tol`` box."""
    return bool(contains_many(Z, np.atleast_2d(np.asarray(x, dtype=float)), tol)[0])


def contains_many(Z: Zonotope, X: np.ndarray, tol: float = 0.0) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if tol < 0:
        raise ValueError("tol must be non-negative")
    Zt = minkowski_sum(Z, Zonotope(np.zeros(Z.dim), tol * np.eye(Z.dim))) if tol > 0 else Z
    if Z.dim == 1:
        r = np.abs(Zt.generators).sum()
        return np.abs(X[:, 0] - Zt.center[0]) <= r
    if Z.dim == 2:
        P = zonotope_to_hpolytope(Zt)
        # facet offsets carry rounding of order eps * |h|
        slack = 1e-13 * (1.0 + np.abs(P.h))
        return np.all(X @ P.H.T <= P.h + slack, axis=1)
    return np.array([_contains_lp(Zt, x) for x in X])


def _contains_lp(Z: Zonotope, x: np.ndarray) -> bool:
    from scipy.optimize import linprog

    k = Z.n_generators
    if k == 0:
        return bool(np.allclose(x, Z.center, atol=1e-12))
    res = linprog(np.zeros(k), A_eq=Z.generators, b_eq=x - Z.center,
                  bounds=[(-1.0, 1.0)] * k, method="highs")
    return res.status == 0


def vertices_2d(Z: Zonotope) -> np.ndarray:
    """Vertices of a planar zonotope in counter-clockwise order."""
    if Z.dim != 2:
        raise SetError("vertex enumeration is implemented for planar zonotopes only")
    G = Z.reduced(1e-15).generators.copy()
    if G.shape[1] == 0:
        return Z.center[None, :].copy()
    # orient generators into the upper half plane, sort by angle
    flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
    G[:, flip] *= -1
    ang = np.arctan2(G[1], G[0])
    G = G[:, np.argsort(ang, kind="stable")]
    start = Z.center - G.sum(axis=1)
    steps = np.hstack([2 * G, -2 * G])
    pts = start + np.cumsum(steps, axis=1).T
    pts = np.vstack([start, pts[:-1]])
    # merge collinear consecutive generators
    keep = np.ones(len(pts), dtype=bool)
    for i in range(len(pts)):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) <= 1e-14 * (1 + np.abs(pts).max() ** 2):
            keep[i] = False
    out = pts[keep]
    return out if len(out) else pts[:2]


def mrpi_exact_nilpotent(A_K, W: Box, tol: float = 1e-10) -> Zonotope:
    """``W + A_K W`` when ``A_K`` is nilpotent of index two."""
    A_K = np.asarray(A_K, dtype=float)
    if np.abs(A_K @ A_K).max() >= tol:
        raise PreconditionError("A_K^2 != 0; use mrpi_outer_eps for this closed loop")
    Wz = box_to_zonotope(W)
    if np.abs(A_K).max() == 0.0:
        return Wz
    return minkowski_sum(Wz, linear_map(Wz, A_K))


@dataclass(frozen=True)
class MrpiResult:
    omega: Zonotope
    s: int
    alpha: float
    eps: float


def mrpi_outer_eps(A_K, W: Box, eps: float, max_terms: int = 10_000) -> MrpiResult:
    """Outer eps-approximation of the minimal robust positively invariant set.

    Finds the smallest ``s`` with ``A_K^s W`` inside ``alpha * W`` and
    ``alpha / (1 - alpha) * M(s) <= eps``, where ``M(s)`` bounds the
    infinity-norm radius of ``F_s = sum_{j<s} A_K^j W``. Returns
    ``F_s / (1 - alpha)``, which contains the mRPI set and lies inside it
    inflated by an ``eps`` box.
    """
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    if eps <= 0:
        raise ValueError("eps must be positive")
    if spectral_radius(A_K) >= 1.0:
        raise DivergenceError("closed loop is not Schur stable; the mRPI set is unbounded")
    Wh = W.to_hpolytope()
    if not (np.all(W.lower < 0) and np.all(W.upper > 0)):
        raise PreconditionError("W must contain the origin in its interior")
    Wz = box_to_zonotope(W)
    n = W.dim
    I = np.eye(n)
    # running sums of support values of F_s along +-e_j
    sum_pos = np.zeros(n)
    sum_neg = np.zeros(n)
    Ms_pow = np.eye(n)  # A_K^(s-1)
    gens = []
    for s in range(1, max_terms + 1):
        gens.append(Ms_pow @ Wz.generators)
        sum_pos += support_many(linear_map(Wz, Ms_pow), I)
        sum_neg += support_many(linear_map(Wz, Ms_pow), -I)
        Ms_pow = A_K @ Ms_pow  # now A_K^s
        alpha = float(np.max(support_many(linear_map(Wz, Ms_pow), Wh.H) / Wh.h))
        M = float(max(sum_pos.max(), sum_neg.max()))
        if alpha < 1.0 and alpha * M <= eps * (1.0 - alpha):
            Fs = Zonotope(np.zeros(n), np.hstack(gens))
            # W is centred at the origin here only if symmetric; shift accordingly
            centre = sum(np.linalg.matrix_power(A_K, j) @ W.center for j in range(s))
            Fs = Zonotope(centre, Fs.generators)
            return MrpiResult(Fs.scale(1.0 / (1.0 - alpha)), s, alpha, eps)
    raise DivergenceError(f"no admissible s found within {max_terms} terms")


@dataclass
class RpiReport:
    starts: np.ndarray
    steps: int
    violations: int
    max_excess: float
    trajectories: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.violations == 0


def rpi_check(A_K, W: Box, omega: Zonotope, samples: int = 6, steps: int = 50,
              seed: int = 0, starts: Optional[np.ndarray] = None, tol: float = 1e-8,
              keep_trajectories: bool = False) -> RpiReport:
    """Simulate ``e+ = A_K e + w`` from points of ``omega`` and count exits.

    Starts default to ``samples`` vertices of ``omega`` spread evenly around
    its boundary. Disturbances are uniform on ``W``.
    """
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    rng = np.random.default_rng(seed)
    if starts is None:
        V = vertices_2d(omega) if omega.dim == 2 else omega.center[None, :]
        idx = np.unique(np.linspace(0, len(V), num=samples, endpoint=False).astype(int))
        starts = V[idx]
    starts = np.atleast_2d(starts)
    E = starts.copy()
    violations = 0
    traj = [E.copy()] if keep_trajectories else None
    P = zonotope_to_hpolytope(minkowski_sum(omega, Zonotope(np.zeros(omega.dim), tol * np.eye(omega.dim)))) \
        if omega.dim == 2 else None
    max_excess = 0.0
    for _ in range(steps):
        w = rng.uniform(W.lower, W.upper, size=E.shape)
        E = E @ A_K.T + w
        if P is not None:
            excess = (E @ P.H.T - P.h).max(axis=1)
            max_excess = max(max_excess, float(excess.max()))
            violations += int(np.sum(excess > 1e-13 * (1 + np.abs(P.h).max())))
        else:
            inside = contains_many(omega, E, tol)
            violations += int(np.sum(~inside))
        if keep_trajectories:
            traj.append(E.copy())
    return RpiReport(starts, steps, violations, max(max_excess, 0.0),
                     np.stack(traj, axis=1) if keep_trajectories else None)


def sample_in_zonotope(Z: Zonotope, rng: np.random.Generator, k: int) -> np.ndarray:
    """``k`` points ``c + G xi`` with ``xi`` uniform on the unit cube (not uniform on ``Z``)."""
    xi = rng.uniform(-1.0, 1.0, size=(k, Z.n_generators))
    return Z.center[None, :] + xi @ Z.generators.T


# plain-text dumps ---------------------------------------------------------

def format_zonotope(Z: Zonotope) -> str:
    lines = ["zonotope", f"dim {Z.dim}", "center " + " ".join(repr(float(v)) for v in Z.center),
             f"generators {Z.n_generators}"]
    lines += [" ".join(repr(float(v)) for v in g) for g in Z.generators.T]
    return "\n".join(lines) + "\n"


def format_hpolytope(P: HPolytope) -> str:
    lines = ["hpolytope", f"dim {P.dim}", f"rows {P.H.shape[0]}"]
    lines += [" ".join(repr(float(v)) for v in row) + " | " + repr(float(b))
              for row, b in zip(P.H, P.h)]
    return "\n".join(lines) + "\n"


def parse_set(text: str):
    """Inverse of :func:`format_zonotope` / :func:`format_hpolytope`."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    kind = lines[0]
    dim = int(lines[1].split()[1])
    if kind == "zonotope":
        c = np.array([float(v) for v in lines[2].split()[1:]])
        k = int(lines[3].split()[1])
        G = np.array([[float(v) for v in ln.split()] for ln in lines[4:4 + k]]).T
        return Zonotope(c, G if k else np.zeros((dim, 0)))
    if kind == "hpolytope":
        m = int(lines[2].split()[1])
        H, h = [], []
        for ln in lines[3:3 + m]:
            lhs, rhs = ln.split("|")
            H.append([float(v) for v in lhs.split()])
            h.append(float(rhs))
        return HPolytope(np.array(H), np.array(h))
    raise SetError(f"unknown set kind {kind!r}")
