import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from specproj.linalg import (
    ExactPropagator, apply_exact_propagator, eigendecompose, moments, overlap_weights, random_hermitian,
)
from specproj.validation import (
    PreconditionError, ShapeError, check_hermitian, check_random_state, check_state, normalize,
)

from oracles import random_herm, random_state


def test_check_state_rejects_bad_shape_and_norm():
    with pytest.raises(ShapeError):
        check_state(np.ones((2, 2)))
    with pytest.raises(ShapeError):
        check_state(np.ones(3), dim=4)
    with pytest.raises(PreconditionError):
        check_state(np.ones(3))
    with pytest.raises(PreconditionError):
        check_state(np.array([np.nan, 1.0]))


def test_normalize_zero_vector_raises():
    with pytest.raises(PreconditionError):
        normalize(np.zeros(3))


def test_check_hermitian():
    h = random_herm(np.random.default_rng(0), 4)
    np.testing.assert_array_equal(check_hermitian(h), h)
    bad = h.copy()
    bad[0, 1] += 1e-6
    with pytest.raises(PreconditionError):
        check_hermitian(bad)
    with pytest.raises(ShapeError):
        check_hermitian(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        check_hermitian(np.ones((1, 1)))


def test_check_random_state_is_reproducible():
    a = check_random_state(7).random(3)
    b = check_random_state(7).random(3)
    np.testing.assert_array_equal(a, b)
    g = np.random.default_rng(1)
    assert check_random_state(g) is g


def test_random_hermitian_is_hermitian_and_seeded():
    h = random_hermitian(6, seed=3)
    np.testing.assert_allclose(h, h.conj().T, atol=0)
    np.testing.assert_array_equal(h, random_hermitian(6, seed=3))
    assert not np.allclose(h, random_hermitian(6, seed=4))
    assert np.all(np.abs(h.real) <= 1) and np.all(np.abs(h.imag) <= 1)
    with pytest.raises(ShapeError):
        random_hermitian(1, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31))
def test_eigendecompose_reconstructs(d, seed):
    h = random_herm(np.random.default_rng(seed), d)
    sd = eigendecompose(h)
    assert np.all(np.diff(sd.eigenvalues) >= 0)
    np.testing.assert_allclose(sd.reconstruct(), h, atol=1e-10)
    np.testing.assert_allclose(sd.eigenvectors.conj().T @ sd.eigenvectors, np.eye(d), atol=1e-12)


def test_eigendecompose_degenerate_identity():
    sd = eigendecompose(np.eye(4))
    np.testing.assert_allclose(sd.eigenvalues, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31), st.floats(-3, 3))
def test_propagator_matches_expm(d, seed, dt):
    rng = np.random.default_rng(seed)
    h = random_herm(rng, d)
    psi = random_state(rng, d)
    want = expm(-1j * h * dt) @ psi
    sd = eigendecompose(h)
    np.testing.assert_allclose(apply_exact_propagator(sd, psi, dt), want, atol=1e-10)
    prop = ExactPropagator(h)
    np.testing.assert_allclose(prop.evolve(psi, dt), want, atol=1e-10)
    np.testing.assert_allclose(prop.apply_h(psi), h @ psi, atol=1e-10)


def test_propagator_is_unitary_and_composes():
    rng = np.random.default_rng(5)
    h = random_herm(rng, 6)
    psi = random_state(rng, 6)
    prop = ExactPropagator(h)
    a = prop.evolve(prop.evolve(psi, 0.3), 0.4)
    np.testing.assert_allclose(a, prop.evolve(psi, 0.7), atol=1e-12)
    assert abs(np.linalg.norm(a) - 1) < 1e-12
    np.testing.assert_allclose(prop.evolve(psi, 0.0), psi, atol=1e-12)


def test_moments_against_brute_force():
    rng = np.random.default_rng(11)
    h = random_herm(rng, 7)
    psi = random_state(rng, 7)
    m = moments(psi, h)
    h2 = h @ h
    assert m.h1 == pytest.approx(np.vdot(psi, h @ psi).real, abs=1e-12)
    assert m.h2 == pytest.approx(np.vdot(psi, h2 @ psi).real, abs=1e-12)
    assert m.h3 == pytest.approx(np.vdot(psi, h2 @ h @ psi).real, abs=1e-12)
    assert m.variance == pytest.approx(m.h2 - m.h1**2, abs=1e-12)
    m_sd = moments(psi, eigendecompose(h))
    assert m_sd.h3 == pytest.approx(m.h3, abs=1e-12)


def test_eigenstate_has_zero_variance():
    h = random_herm(np.random.default_rng(2), 5)
    sd = eigendecompose(h)
    assert moments(sd.eigenvectors[:, 2], h).variance < 1e-24


def test_overlap_weights_sum_to_one():
    rng = np.random.default_rng(4)
    h = random_herm(rng, 5)
    w = overlap_weights(eigendecompose(h), random_state(rng, 5))
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0)
