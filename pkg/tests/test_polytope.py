import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs
from hypothesis.extra.numpy import arrays

from walkmpc import polytope as pt

W_DEFAULT = pt.Box.symmetric([0.0016, 0.016])
REF_GAIN = np.array([[3.386, 0.968]])


def brute_support(Z, d):
    # maximise over every sign pattern of the generator coefficients
    best = -np.inf
    for signs in itertools.product((-1.0, 1.0), repeat=Z.n_generators):
        best = max(best, d @ (Z.center + Z.generators @ np.array(signs)))
    return best


def hausdorff_by_support(Z1, Z2, n_dirs=720):
    ang = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
    D = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return float(np.abs(pt.support_many(Z1, D) - pt.support_many(Z2, D)).max())


def test_box_to_zonotope():
    Z = pt.box_to_zonotope(pt.Box.symmetric([1.0, 1.0]))
    assert np.array_equal(Z.center, [0, 0]) and np.array_equal(Z.generators, np.eye(2))
    Z = pt.box_to_zonotope(pt.Box([0.0], [2.0]))
    assert Z.center[0] == 1.0 and Z.generators[0, 0] == 1.0
    Z = pt.box_to_zonotope(W_DEFAULT)
    assert np.array_equal(Z.generators, np.diag([0.0016, 0.016]))


def test_box_invalid():
    with pytest.raises(pt.SetError):
        pt.Box([1.0], [0.0])


def test_linear_map_cases(A_db):
    Z = pt.box_to_zonotope(W_DEFAULT)
    assert np.array_equal(pt.linear_map(Z, np.eye(2)).generators, Z.generators)
    assert np.all(pt.linear_map(Z, np.zeros((2, 2))).generators == 0)
    twice = pt.linear_map(pt.linear_map(Z, A_db), A_db)
    assert np.abs(twice.generators).max() < 1e-12


def test_minkowski_cases():
    Z = pt.box_to_zonotope(W_DEFAULT)
    S = pt.minkowski_sum(Z, pt.Zonotope.point([0.0, 0.0]))
    assert np.array_equal(S.generators, Z.generators)
    I = pt.minkowski_sum(pt.box_to_zonotope(pt.Box([-1.0], [1.0])), pt.box_to_zonotope(pt.Box([-2.0], [2.0])))
    assert I.interval_hull().lower[0] == -3.0 and I.interval_hull().upper[0] == 3.0
    with pytest.raises(pt.SetError):
        pt.minkowski_sum(Z, pt.Zonotope.point([0.0]))


def test_support_cases():
    Z = pt.box_to_zonotope(pt.Box.symmetric([1.0, 1.0]))
    assert pt.support(Z, [1.0, 0.0]) == 1.0
    assert pt.support(Z, [0.0, 0.0]) == 0.0


def test_support_vs_sign_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(30):
        k = int(rng.integers(1, 13))
        Z = pt.Zonotope(rng.normal(size=2), rng.normal(size=(2, k)))
        d = rng.normal(size=2)
        assert pt.support(Z, d) == pytest.approx(brute_support(Z, d), abs=1e-12)


def test_pontryagin_interval():
    X = pt.Box.symmetric([0.04]).to_hpolytope()
    r = pt.pontryagin_diff(X, pt.box_to_zonotope(pt.Box.symmetric([0.01])))
    assert not r.empty
    assert np.allclose(np.sort(r.polytope.h), [0.03, 0.03], atol=1e-15)
    same = pt.pontryagin_diff(X, pt.Zonotope.point([0.0]))
    assert np.array_equal(same.polytope.h, X.h)


def test_pontryagin_empty_flagged():
    X = pt.Box.symmetric([0.05]).to_hpolytope()
    r = pt.pontryagin_diff(X, pt.box_to_zonotope(pt.Box.symmetric([0.06])))
    assert r.empty
    X2 = pt.Box.symmetric([0.05, 0.05]).to_hpolytope()
    r2 = pt.pontryagin_diff(X2, pt.box_to_zonotope(pt.Box.symmetric([0.06, 0.01])))
    assert r2.empty
    r3 = pt.pontryagin_diff(X2, pt.box_to_zonotope(pt.Box.symmetric([0.01, 0.01])), interior_point=[0, 0])
    assert not r3.empty


def test_cop_tightening_by_K_omega(A_ref):
    # the reported value 0.0225 is informational; the computed one is recorded here
    om = pt.mrpi_outer_eps(A_ref, W_DEFAULT, 1e-6).omega
    KO = pt.linear_map(om, REF_GAIN)
    KW = pt.linear_map(pt.box_to_zonotope(W_DEFAULT), REF_GAIN)
    assert pt.support(KW, [1.0]) == pytest.approx(3.386 * 0.0016 + 0.968 * 0.016, abs=1e-15)
    assert pt.support(KO, [1.0]) == pytest.approx(0.024182, abs=1e-6)
    U = pt.Box.symmetric([0.05]).to_hpolytope()
    r = pt.pontryagin_diff(U, KO)
    assert not r.empty and np.allclose(r.polytope.h, 0.05 - pt.support(KO, [1.0]))


def test_mrpi_exact(A_db, K_db):
    om = pt.mrpi_exact_nilpotent(A_db, W_DEFAULT)
    assert om.n_generators == 4
    outer = pt.mrpi_outer_eps(A_db, W_DEFAULT, 1e-6)
    assert hausdorff_by_support(om, outer.omega) < 2e-6
    assert pt.mrpi_exact_nilpotent(np.zeros((2, 2)), W_DEFAULT).n_generators == 2


def test_deadbeat_K_omega_differs_from_K_W(A_db, K_db):
    # K A_K != 0 for the dead-beat gain, so K Omega is strictly larger than K W
    om = pt.mrpi_exact_nilpotent(A_db, W_DEFAULT)
    kw = pt.support(pt.linear_map(pt.box_to_zonotope(W_DEFAULT), K_db), [1.0])
    ko = pt.support(pt.linear_map(om, K_db), [1.0])
    assert np.abs(K_db @ A_db).max() > 1.0
    assert ko > kw + 1e-3


def test_mrpi_exact_precondition(A_ref):
    with pytest.raises(pt.PreconditionError):
        pt.mrpi_exact_nilpotent(A_ref, W_DEFAULT)


def test_mrpi_outer_cases():
    r = pt.mrpi_outer_eps(np.zeros((2, 2)), W_DEFAULT, 1e-6)
    assert r.s == 1 and r.alpha == 0.0
    assert hausdorff_by_support(r.omega, pt.box_to_zonotope(W_DEFAULT)) < 1e-15
    r1 = pt.mrpi_outer_eps(np.array([[0.5]]), pt.Box([-1.0], [1.0]), 1e-6)
    hull = r1.omega.interval_hull()
    assert 2.0 <= hull.upper[0] <= 2.0 + 1e-6
    with pytest.raises(pt.DivergenceError):
        pt.mrpi_outer_eps(np.array([[1.01]]), pt.Box([-1.0], [1.0]), 1e-6)
    with pytest.raises(pt.PreconditionError):
        pt.mrpi_outer_eps(np.array([[0.5]]), pt.Box([0.0], [1.0]), 1e-6)
    with pytest.raises(ValueError):
        pt.mrpi_outer_eps(np.array([[0.5]]), pt.Box([-1.0], [1.0]), 0.0)


def test_mrpi_outer_is_rpi(A_ref):
    eps = 1e-6
    om = pt.mrpi_outer_eps(A_ref, W_DEFAULT, eps).omega
    step = pt.minkowski_sum(pt.linear_map(om, A_ref), pt.box_to_zonotope(W_DEFAULT))
    D = np.random.default_rng(1).normal(size=(100, 2))
    assert np.all(pt.support_many(step, D) <= pt.support_many(om, D) + eps)


def test_mrpi_eps_nested(A_ref):
    fine = pt.mrpi_outer_eps(A_ref, W_DEFAULT, 1e-6).omega
    coarse = pt.mrpi_outer_eps(A_ref, W_DEFAULT, 1e-3).omega
    D = np.random.default_rng(2).normal(size=(200, 2))
    assert np.all(pt.support_many(fine, D) <= pt.support_many(coarse, D) + 1e-12)


def test_contains_cases():
    Z = pt.Zonotope([0.1, -0.2], np.array([[1.0, 0.5, 0.2], [0.0, 1.0, -0.3]]))
    assert pt.contains(Z, Z.center)
    assert not pt.contains(Z, Z.center + 10 * np.abs(Z.generators).sum(axis=1))
    V = vertices_by_enumeration(Z)
    assert np.all(pt.contains_many(Z, V, tol=1e-9))
    with pytest.raises(ValueError):
        pt.contains(Z, Z.center, tol=-1.0)


def vertices_by_enumeration(Z):
    pts = np.array([Z.center + Z.generators @ np.array(s)
                    for s in itertools.product((-1.0, 1.0), repeat=Z.n_generators)])
    return pts


def test_vertices_match_hull_of_enumeration():
    from scipy.spatial import ConvexHull
    rng = np.random.default_rng(3)
    for _ in range(20):
        Z = pt.Zonotope(rng.normal(size=2), rng.normal(size=(2, int(rng.integers(1, 7)))))
        V = pt.vertices_2d(Z)
        P = vertices_by_enumeration(Z)
        if Z.n_generators >= 2:
            hull = ConvexHull(P)
            assert len(V) == len(hull.vertices)
        # every reported vertex is one of the sign-pattern points
        for v in V:
            assert np.min(np.linalg.norm(P - v, axis=1)) < 1e-12


def test_contains_lp_path_3d():
    Z = pt.Zonotope(np.zeros(3), np.eye(3))
    assert np.all(pt.contains_many(Z, np.array([[0.5, 0.5, 0.5], [1.0, -1.0, 1.0]])))
    assert not pt.contains(Z, [1.5, 0.0, 0.0])


def test_rpi_check_cases(A_ref):
    zero = pt.rpi_check(np.zeros((2, 2)), pt.Box.symmetric([0.0, 0.0]), pt.Zonotope.point([0.0, 0.0]),
                        starts=np.zeros((1, 2)))
    assert zero.violations == 0
    om = pt.mrpi_outer_eps(A_ref, W_DEFAULT, 1e-6).omega
    ok = pt.rpi_check(A_ref, W_DEFAULT, om, samples=6, steps=50, seed=0)
    assert ok.ok and len(ok.starts) == 6
    bad = pt.rpi_check(A_ref, W_DEFAULT, om.scale(0.5), samples=6, steps=50, seed=0)
    assert bad.violations > 0


def test_set_text_roundtrip():
    Z = pt.Zonotope([0.1, 1 / 3], np.array([[1e-7, 2.0], [np.pi, -0.25]]))
    Z2 = pt.parse_set(pt.format_zonotope(Z))
    assert np.array_equal(Z.center, Z2.center) and np.array_equal(Z.generators, Z2.generators)
    P = pt.Box.symmetric([0.04, 0.1]).to_hpolytope()
    P2 = pt.parse_set(pt.format_hpolytope(P))
    assert np.array_equal(P.H, P2.H) and np.array_equal(P.h, P2.h)


finite = hs.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(c1=arrays(float, 2, elements=finite), g1=arrays(float, (2, 3), elements=finite),
       c2=arrays(float, 2, elements=finite), g2=arrays(float, (2, 2), elements=finite),
       d=arrays(float, 2, elements=finite), M=arrays(float, (2, 2), elements=finite))
def test_support_algebra(c1, g1, c2, g2, d, M):
    Z1, Z2 = pt.Zonotope(c1, g1), pt.Zonotope(c2, g2)
    scale = 1.0 + np.abs(d).sum() * (np.abs(c1).sum() + np.abs(g1).sum() + np.abs(c2).sum() + np.abs(g2).sum())
    s = pt.support(pt.minkowski_sum(Z1, Z2), d)
    assert s == pytest.approx(pt.support(Z1, d) + pt.support(Z2, d), abs=1e-12 * scale)
    lhs = pt.support(pt.linear_map(Z1, M), d)
    rhs = pt.support(Z1, M.T @ d)
    assert lhs == pytest.approx(rhs, abs=1e-12 * scale * (1 + np.abs(M).sum()))


@settings(max_examples=200, deadline=None)
@given(h=arrays(float, 4, elements=hs.floats(0.05, 1.0)), g=arrays(float, (2, 3), elements=hs.floats(-0.01, 0.01)))
def test_pontryagin_then_minkowski_inside(h, g):
    X = pt.HPolytope(np.vstack([np.eye(2), -np.eye(2)]), h)
    Z = pt.Zonotope(np.zeros(2), g)
    T = pt.pontryagin_diff(X, Z).polytope
    # support of (X - Z) + Z along the rows of H, with X - Z a box here
    lo, hi = -T.h[2:], T.h[:2]
    back = pt.minkowski_sum(pt.box_to_zonotope(pt.Box(np.minimum(lo, hi), np.maximum(lo, hi))), Z)
    if np.all(lo <= hi):
        assert np.all(pt.support_many(back, X.H) <= X.h + 1e-12)
