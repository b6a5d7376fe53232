"""Dense state-vector arithmetic, spectral decomposition and exact propagation."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .validation import ShapeError, PreconditionError, check_hermitian, check_state

RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with column-orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def to_eigenbasis(self, psi):
        return self.eigenvectors.conj().T @ psi

    def from_eigenbasis(self, coeffs):
        return self.eigenvectors @ coeffs


@dataclass(frozen=True)
class Moments:
    h1: float
    h2: float
    h3: float
    variance: float


def random_hermitian(dim, seed):
    """Random Hermitian matrix with entries uniform on [-1, 1] (+ i[-1, 1] off-diagonal).

    A Philox counter-based generator keyed by ``seed`` makes the ensemble
    reproducible across platforms.
    """
    if dim < 2:
        raise ShapeError(f"invalid dimension {dim}; need dim >= 2")
    rng = np.random.Generator(np.random.Philox(seed))
    re = rng.uniform(-1.0, 1.0, size=(dim, dim))
    im = rng.uniform(-1.0, 1.0, size=(dim, dim))
    lower = np.tril(re + 1j * im, k=-1)
    diag = np.diag(np.diag(re)).astype(np.complex128)
    return lower + lower.conj().T + diag


def to_dense(h):
    """Materialize a Hamiltonian (ndarray, sparse matrix or Pauli sum) densely."""
    if hasattr(h, "to_dense"):
        return h.to_dense()
    if sp.issparse(h):
        return h.toarray().astype(np.complex128)
    return np.asarray(h, dtype=np.complex128)


def as_linear_operator(h):
    """Return a matrix-like object supporting ``@`` for H·psi products."""
    if hasattr(h, "to_sparse"):
        return h.to_sparse()
    if sp.issparse(h):
        return h
    return np.asarray(h, dtype=np.complex128)


def eigendecompose(h):
    """Eigendecomposition of a Hermitian operator with a stable ascending order."""
    h = check_hermitian(to_dense(h))
    # symmetrize so eigh sees an exactly Hermitian input
    h = 0.5 * (h + h.conj().T)
    values, vectors = np.linalg.eigh(h)
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    sd = SpectralDecomposition(values, vectors)
    scale = max(float(np.max(np.abs(h))), 1e-300)
    err = np.max(np.abs(sd.reconstruct() - h))
    if err > RECONSTRUCTION_TOL * max(scale, 1.0):
        raise PreconditionError(f"spectral reconstruction error {err:.3e} too large")
    return sd


def apply_exact_propagator(sd, psi, dt):
    """Return exp(-i H dt)·psi using the cached decomposition of H."""
    psi = check_state(psi, sd.dim, normalized=False)
    coeffs = sd.to_eigenbasis(psi)
    return sd.from_eigenbasis(np.exp(-1j * sd.eigenvalues * dt) * coeffs)


def overlap_weights(sd, psi):
    """Born weights |<E_n|psi>|^2 in the eigenbasis."""
    psi = check_state(psi, sd.dim)
    return np.abs(sd.to_eigenbasis(psi)) ** 2


def _moments_from_products(psi, hpsi):
    h1 = float(np.vdot(psi, hpsi).real)
    h2 = float(np.vdot(hpsi, hpsi).real)
    shifted = hpsi - h1 * psi
    variance = max(float(np.vdot(shifted, shifted).real), 0.0)
    return h1, h2, variance


def moments(psi, h):
    """Expectation values of h, h^2, h^3 and the energy variance.

    ``h`` may be a dense matrix, a sparse matrix, a Pauli sum or a
    SpectralDecomposition.
    """
    if isinstance(h, SpectralDecomposition):
        w = overlap_weights(h, psi)
        e = h.eigenvalues
        h1 = float(w @ e)
        variance = max(float(w @ (e - h1) ** 2), 0.0)
        return Moments(h1, float(w @ e**2), float(w @ e**3), variance)
    op = as_linear_operator(h)
    psi = check_state(psi, op.shape[0])
    hpsi = op @ psi
    h1, h2, variance = _moments_from_products(psi, hpsi)
    h3 = float(np.vdot(hpsi, op @ hpsi).real)
    return Moments(h1, h2, h3, variance)


class ExactPropagator:
    """exp(-i H dt) via a cached dense eigendecomposition.

    The decomposition costs O(d^3) once; every ``evolve`` afterwards is two
    dense mat-vecs and a phase multiply.
    """

    label = "exact"

    def __init__(self, h, sd=None):
        self.hamiltonian = h
        self.sd = eigendecompose(h) if sd is None else sd

    @property
    def dim(self):
        return self.sd.dim

    def evolve(self, psi, dt):
        sd = self.sd
        return sd.eigenvectors @ (np.exp(-1j * sd.eigenvalues * dt) * (sd.eigenvectors.conj().T @ psi))

    def apply_h(self, psi):
        sd = self.sd
        return sd.eigenvectors @ (sd.eigenvalues * (sd.eigenvectors.conj().T @ psi))

    def eigenbasis(self):
        return DiagonalPropagator(self.sd.eigenvalues)


class DiagonalPropagator:
    """Propagator for a Hamiltonian that is diagonal in the working basis."""

    label = "diagonal"

    def __init__(self, energies):
        self.energies = np.asarray(energies, dtype=float)

    @property
    def dim(self):
        return self.energies.shape[0]

    def evolve(self, psi, dt):
        return np.exp(-1j * self.energies * dt) * psi

    def apply_h(self, psi):
        return self.energies * psi


class SparsePropagator:
    """Wraps a product-formula ``evolve`` with a sparse H for moments."""

    def __init__(self, h, evolve, label):
        self.matrix = as_linear_operator(h)
        self._evolve = evolve
        self.label = label

    @property
    def dim(self):
        return self.matrix.shape[0]

    def evolve(self, psi, dt):
        return self._evolve(psi, dt)

    def apply_h(self, psi):
        return self.matrix @ psi
