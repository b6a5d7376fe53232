"""Independent reference computations for the test suite.

Everything here is built from first principles (explicit Kronecker
products, scipy's expm, direct branch evaluation) and never calls the
closed forms or fast paths it is used to check.
"""

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def site_op(nq, ops):
    """Tensor product with ``ops[site]`` at the given sites, identity elsewhere."""
    return kron_all([ops.get(k, I2) for k in range(nq)])


def tfi_dense(nq, g):
    h = np.zeros((2**nq, 2**nq), dtype=complex)
    for i in range(nq):
        h += g * site_op(nq, {i: X, (i + 1) % nq: X})
        h -= (1 - g) * site_op(nq, {i: Z})
    return h


def xzy_dense(nq, g, r):
    h = np.zeros((2**nq, 2**nq), dtype=complex)
    for i in range(nq):
        left, right = (i - 1) % nq, (i + 1) % nq
        h -= g * (1 + r) / 2 * site_op(nq, {left: X, i: Z, right: X})
        h -= g * (1 - r) / 2 * site_op(nq, {left: Y, i: Z, right: Y})
        h -= (1 - g) * site_op(nq, {i: Z})
    return h


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_herm(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def branches(psi, alpha, beta, h, dt):
    """[(p_m, normalized post state)] for m = 0, 1 by explicit construction."""
    u = expm(-1j * h * dt)
    out = []
    for sign in (1, -1):
        v = (alpha * psi + sign * beta * (u @ psi)) / np.sqrt(2)
        p = float(np.vdot(v, v).real)
        out.append((p, v / np.sqrt(p) if p > 0 else v))
    return out


def energy(psi, h):
    return float(np.vdot(psi, h @ psi).real)


def variance(psi, h):
    e = energy(psi, h)
    return float(np.vdot(psi, h @ (h @ psi)).real) - e * e


def branch_energy_changes(psi, alpha, beta, h, dt):
    e0 = energy(psi, h)
    return [energy(v, h) - e0 for _, v in branches(psi, alpha, beta, h, dt)]


def branch_average_variance_change(psi, alpha, beta, h, dt):
    v0 = variance(psi, h)
    return sum(p * (variance(v, h) - v0) for p, v in branches(psi, alpha, beta, h, dt))


def eigen_weights(psi, h):
    _, vecs = np.linalg.eigh(h)
    return np.abs(vecs.conj().T @ psi) ** 2


def density_depolarize(rho, nq, eps):
    """Per-qubit channel written as Kraus operators sqrt(1 - 3e/4) I, sqrt(e/4) {X, Y, Z}."""
    for q in range(nq):
        ks = [np.sqrt(1 - 3 * eps / 4) * I2, np.sqrt(eps / 4) * X, np.sqrt(eps / 4) * Y, np.sqrt(eps / 4) * Z]
        new = np.zeros_like(rho)
        for k in ks:
            full = site_op(nq, {q: k})
            new += full @ rho @ full.conj().T
        rho = new
    return rho
