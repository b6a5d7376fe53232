import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.linalg import expm

from specproj.hamiltonians import build_tfi, h5_fixture, product_state
from specproj.linalg import ExactPropagator, eigendecompose, moments
from specproj.primitive import (
    AncillaState, NumericalConsistencyError, ancilla_rate_factor, apply_primitive, average_map_exponent,
    clamp_probability, energy_change_closed_form, exponent_operator, hermitian_split, outcome_probabilities,
    ratio_parameters, third_moment_obstruction, variance_change_closed_form,
)
from specproj.validation import PreconditionError

import oracles
from oracles import random_herm, random_state

PLUS = AncillaState(1 / math.sqrt(2), 1 / math.sqrt(2))


def ancilla_strategy():
    return st.tuples(st.floats(0.05, 0.95), st.floats(0, 2 * math.pi)).map(
        lambda t: AncillaState.from_phase(t[1], t[0]))


def test_ancilla_normalization_enforced():
    with pytest.raises(PreconditionError):
        AncillaState(1.0, 1.0)
    a = AncillaState.from_phase(0.3, math.sqrt(3) / 2)
    assert abs(a.alpha) ** 2 + abs(a.beta) ** 2 == pytest.approx(1.0, abs=1e-15)
    assert a.overlap == pytest.approx(math.sqrt(3) / 4 * complex(math.cos(0.3), math.sin(0.3)))


def test_clamp_probability():
    assert clamp_probability(-1e-14) == 0.0
    assert clamp_probability(1 + 1e-14) == 1.0
    with pytest.raises(NumericalConsistencyError):
        clamp_probability(1.01)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), ancilla_strategy(), st.floats(0.01, 5.0))
def test_outcome_probabilities_match_branches(d, seed, anc, dt):
    rng = np.random.default_rng(seed)
    h = random_herm(rng, d)
    psi = random_state(rng, d)
    p0, p1 = outcome_probabilities(psi, anc, h, dt)
    (q0, _), (q1, _) = oracles.branches(psi, anc.alpha, anc.beta, h, dt)
    assert p0 == pytest.approx(q0, abs=1e-12)
    assert p1 == pytest.approx(q1, abs=1e-12)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-15)


def test_apply_primitive_post_state():
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(1.1)
    out = apply_primitive(psi, anc, h, 0.7, np.random.default_rng(3))
    branches = oracles.branches(psi, anc.alpha, anc.beta, h, 0.7)
    want = branches[out.bit][1]
    assert abs(abs(np.vdot(want, out.post_state)) - 1) < 1e-12
    assert out.p0 == pytest.approx(branches[0][0], abs=1e-12)


def test_apply_primitive_frequencies_follow_p0():
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(0.4)
    rng = np.random.default_rng(0)
    bits = [apply_primitive(psi, anc, h, 1.3, rng).bit for _ in range(4000)]
    p0, _ = outcome_probabilities(psi, anc, h, 1.3)
    assert abs((bits.count(0) / 4000) - p0) < 4 * math.sqrt(p0 * (1 - p0) / 4000)


def test_eigenstate_is_fixed_point_up_to_phase():
    h, _ = h5_fixture()
    sd = eigendecompose(h)
    rng = np.random.default_rng(1)
    for n in range(5):
        v = sd.eigenvectors[:, n]
        for _ in range(5):
            out = apply_primitive(v, AncillaState.from_phase(rng.uniform(0, 6.3)), h, rng.uniform(0.1, 10), rng)
            assert abs(abs(np.vdot(v, out.post_state)) - 1) < 1e-12


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), ancilla_strategy(), st.floats(0.01, 3.0))
def test_energy_change_matches_branch_evaluation(d, seed, anc, dt):
    rng = np.random.default_rng(seed)
    h = random_herm(rng, d)
    psi = random_state(rng, d)
    got = energy_change_closed_form(psi, anc, h, dt)
    want = oracles.branch_energy_changes(psi, anc.alpha, anc.beta, h, dt)
    probs = outcome_probabilities(psi, anc, h, dt)
    for g, w, p in zip(got, want, probs):
        if p > 1e-8:
            assert g == pytest.approx(w, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), ancilla_strategy(), st.floats(0.01, 3.0))
def test_variance_change_matches_and_never_increases(d, seed, anc, dt):
    rng = np.random.default_rng(seed)
    h = random_herm(rng, d)
    psi = random_state(rng, d)
    got = variance_change_closed_form(psi, anc, h, dt)
    assume(not math.isnan(got))
    want = oracles.branch_average_variance_change(psi, anc.alpha, anc.beta, h, dt)
    assert got == pytest.approx(want, abs=1e-9)
    assert got <= 1e-12


def test_energy_change_marks_vanishing_branch():
    # |+> ancilla with dt = 0 sends everything to outcome 0
    h, psi = h5_fixture()
    d0, d1 = energy_change_closed_form(psi, PLUS, h, 0.0)
    assert d0 == pytest.approx(0.0, abs=1e-14)
    assert math.isnan(d1)
    assert math.isnan(variance_change_closed_form(psi, PLUS, h, 0.0))


def test_ratio_parameters_definition():
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(0.9)
    r1, rh, h1 = ratio_parameters(psi, anc, h, 0.5)
    u = expm(-0.5j * h)
    assert r1 == pytest.approx((anc.overlap * np.vdot(psi, u @ psi)).real, abs=1e-13)
    assert rh == pytest.approx((anc.overlap * np.vdot(psi, h @ u @ psi)).real, abs=1e-13)
    assert h1 == pytest.approx(moments(psi, h).h1, abs=1e-13)


def test_rate_factor_values():
    assert ancilla_rate_factor(AncillaState.from_phase(math.pi / 2)) == pytest.approx(0.25)
    assert math.isnan(ancilla_rate_factor(PLUS))
    a = AncillaState.from_phase(math.pi / 3)
    ab = a.overlap
    assert ancilla_rate_factor(a) == pytest.approx(ab.imag**2 / (1 - 4 * ab.real**2))


def _richardson_limit(f, dts, power):
    """Estimate lim f(dt)/dt^power from two small dt values (removes the next order)."""
    a, b = (f(dt) / dt**power for dt in dts)
    return 2 * b - a


@pytest.mark.parametrize("phi", [0.4, 1.3, 2.2])
def test_energy_change_first_order_coefficient(phi):
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(phi)
    ab = anc.overlap
    var = moments(psi, h).variance
    for m, sign in ((0, 1), (1, -1)):
        want = 2 * sign * ab.imag / (1 + 2 * sign * ab.real) * var
        got = _richardson_limit(lambda dt: energy_change_closed_form(psi, anc, h, dt)[m], (2e-4, 1e-4), 1)
        assert got == pytest.approx(want, rel=1e-4)


def test_energy_change_plus_ancilla_orders():
    # m = 0 is second order with coefficient -(1/4)(<h^3> - <h^2><h>), the
    # Re(a*b) = 1/2 case of the real-overlap formula below
    h, psi = h5_fixture()
    m = moments(psi, h)
    want0 = -0.25 * (m.h3 - m.h2 * m.h1)
    got0 = _richardson_limit(lambda dt: energy_change_closed_form(psi, PLUS, h, dt)[0], (2e-3, 1e-3), 2)
    assert got0 == pytest.approx(want0, rel=1e-4)
    want1 = m.h3 / m.h2 - m.h1
    got1 = energy_change_closed_form(psi, PLUS, h, 1e-4)[1]
    assert got1 == pytest.approx(want1, rel=1e-6)


@pytest.mark.parametrize("magnitude", [0.8, math.sqrt(3) / 2])
@pytest.mark.parametrize("phi", [0.0, math.pi])
def test_energy_change_real_overlap_second_order(magnitude, phi):
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(phi, magnitude)
    re = anc.overlap.real
    m = moments(psi, h)
    for k, sign in ((0, 1), (1, -1)):
        want = -sign * re * (m.h3 - m.h2 * m.h1) / (1 + 2 * sign * re)
        got = _richardson_limit(lambda dt: energy_change_closed_form(psi, anc, h, dt)[k], (2e-3, 1e-3), 2)
        assert got == pytest.approx(want, rel=1e-4)


@pytest.mark.parametrize("phi", [0.7, 1.9])
def test_variance_change_second_order_coefficient(phi):
    h, psi = h5_fixture()
    anc = AncillaState.from_phase(phi)
    ab = anc.overlap
    var = moments(psi, h).variance
    want = -4 * ab.imag**2 / (1 - 4 * ab.real**2) * var**2
    got = _richardson_limit(lambda dt: variance_change_closed_form(psi, anc, h, dt), (2e-4, 1e-4), 2)
    assert got == pytest.approx(want, rel=1e-4)


def test_variance_change_plus_ancilla_coefficient():
    h, psi = h5_fixture()
    m = moments(psi, h)
    want = -((m.h3 - m.h2 * m.h1) ** 2) / (4 * m.h2)
    got = _richardson_limit(lambda dt: variance_change_closed_form(psi, PLUS, h, dt), (2e-3, 1e-3), 2)
    assert got == pytest.approx(want, rel=1e-4)


def test_opposite_energy_superposition_has_no_third_moment():
    h = build_tfi(4, 0.3).to_dense()
    sd = eigendecompose(h)
    e = sd.eigenvalues
    # pair an eigenvalue with its negative (the TFI ring spectrum is symmetric)
    i, j = 0, int(np.argmin(np.abs(e + e[0])))
    assert e[i] == pytest.approx(-e[j], abs=1e-10)
    psi = (sd.eigenvectors[:, i] + sd.eigenvectors[:, j]) / math.sqrt(2)
    assert abs(third_moment_obstruction(psi, h)) < 1e-10
    dE0, dE1 = energy_change_closed_form(psi, PLUS, h, 1e-3)
    assert abs(dE0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31), ancilla_strategy())
def test_exponent_operator_reproduces_branches(d, seed, anc):
    rng = np.random.default_rng(seed)
    h = random_herm(rng, d, scale=0.5)
    psi = random_state(rng, d)
    dt = 1e-2
    for m in (0, 1):
        sign = 1 if m == 0 else -1
        assume(abs(1 + sign * anc.alpha / anc.beta) > 0.3)
        p = exponent_operator(anc, h, dt, m)
        approx = expm(p) @ psi
        approx /= np.linalg.norm(approx)
        exact = oracles.branches(psi, anc.alpha, anc.beta, h, dt)[m][1]
        assert 1 - abs(np.vdot(exact, approx)) < 1e-6


def test_hermitian_split_parts():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, r = hermitian_split(p)
    np.testing.assert_allclose(q, q.conj().T)
    np.testing.assert_allclose(r, r.conj().T)
    np.testing.assert_allclose(q + 1j * r, p)


def test_average_map_exponent_tracks_log_weight_drift():
    # sum_m p_m log w_n' - log w_n = 2 eig_n(exponent) + n-independent constant, up to O(dt^3)
    h, psi = h5_fixture()
    sd = eigendecompose(h)
    anc = AncillaState.from_phase(1.2)
    w0 = np.abs(sd.to_eigenbasis(psi)) ** 2
    for dt in (0.02, 0.01):
        drift = np.zeros(5)
        for p, v in oracles.branches(psi, anc.alpha, anc.beta, h, dt):
            drift += p * (np.log(np.abs(sd.to_eigenbasis(v)) ** 2) - np.log(w0))
        expo = average_map_exponent(psi, anc, h, dt)
        diag = np.real(np.diag(sd.eigenvectors.conj().T @ expo @ sd.eigenvectors))
        resid = drift - 2 * diag
        assert np.ptp(resid) < 50 * dt**3
    assert average_map_exponent(psi, PLUS, h, 0.1) is None
