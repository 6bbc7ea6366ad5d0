import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from walkmpc.model import (LipmParams, LtiModel, ModelError, SynthesisError, closed_loop,
                           controllability_matrix, deadbeat_gain, discretize_lipm, is_schur,
                           spectral_radius)


def expm_series(M, terms=60):
    # plain Taylor series, independent of the closed form
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def test_omega_n():
    assert LipmParams().omega_n == pytest.approx(math.sqrt(9.81 / 0.88), abs=1e-15)
    assert LipmParams().omega_n == pytest.approx(3.33882, abs=1e-5)


def test_zero_dt_is_identity():
    m = discretize_lipm(LipmParams(sampling_dt=0.0))
    assert np.array_equal(m.A, np.eye(2))
    assert np.allclose(m.B, 0.0)


def test_matches_matrix_exponential():
    p = LipmParams()
    w2 = p.omega_n ** 2
    # augmented continuous system [c, cdot, p] with p held constant
    Ac = np.array([[0.0, 1.0, 0.0], [w2, 0.0, -w2], [0.0, 0.0, 0.0]])
    E = expm_series(Ac * p.sampling_dt)
    m = discretize_lipm(p)
    assert np.allclose(m.A, E[:2, :2], atol=1e-10)
    assert np.allclose(m.B[:, 0], E[:2, 2], atol=1e-10)


def test_det_one():
    m = discretize_lipm(LipmParams())
    assert abs(np.linalg.det(m.A) - 1.0) < 1e-12


def test_invalid_params():
    with pytest.raises(ModelError):
        LipmParams(com_height=0.0)
    with pytest.raises(ModelError):
        LipmParams(gravity=-1.0)


def test_equilibrium_fixed_point():
    m = discretize_lipm(LipmParams())
    for c in (-0.1, 0.0, 0.07):
        x = np.array([c, 0.0])
        assert np.allclose(m.A @ x + m.B[:, 0] * c, x, atol=1e-12)


def test_semigroup():
    p1, p2 = LipmParams(sampling_dt=0.05), LipmParams(sampling_dt=0.1)
    m1, m2 = discretize_lipm(p1), discretize_lipm(p2)
    assert np.allclose(m1.A @ m1.A, m2.A, atol=1e-10)
    assert np.allclose(m1.A @ m1.B + m1.B, m2.B, atol=1e-10)


def test_deadbeat_default_model(model):
    K = deadbeat_gain(model)
    A_K = closed_loop(model, K)
    assert np.abs(A_K @ A_K).sum(axis=1).max() < 1e-10
    assert spectral_radius(A_K) < 1e-6


def test_deadbeat_double_integrator():
    m = LtiModel(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), 1.0)
    K = deadbeat_gain(m)
    assert np.allclose(K, 0.0, atol=1e-14)


def test_uncontrollable():
    m = LtiModel(np.eye(2), np.array([[1.0], [0.0]]), 0.1)
    assert abs(np.linalg.det(controllability_matrix(m))) < 1e-15
    with pytest.raises(SynthesisError):
        deadbeat_gain(m)


def test_closed_loop_zero_gain(model):
    assert np.array_equal(closed_loop(model, np.zeros((1, 2))), model.A)


def test_generic_gain_eigs_match_quadratic(model):
    K = np.array([[3.386, 0.968]])
    A_K = closed_loop(model, K)
    tr, det = np.trace(A_K), np.linalg.det(A_K)
    disc = tr * tr - 4 * det
    roots = sorted([(tr + np.sqrt(disc + 0j)) / 2, (tr - np.sqrt(disc + 0j)) / 2], key=abs)
    eig = sorted(np.linalg.eigvals(A_K), key=abs)
    assert np.allclose(eig, roots, atol=1e-12)
    assert is_schur(A_K)
    assert spectral_radius(A_K) == pytest.approx(0.6907, abs=1e-3)


@settings(max_examples=1000, deadline=None)
@given(h=hs.floats(0.5, 1.2), g=hs.floats(9.0, 10.0), dt=hs.floats(0.01, 0.2))
def test_deadbeat_random_params(h, g, dt):
    m = discretize_lipm(LipmParams(h, g, dt))
    A_K = closed_loop(m, deadbeat_gain(m))
    assert np.abs(A_K @ A_K).max() < 1e-10
