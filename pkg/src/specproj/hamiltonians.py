"""Model Hamiltonians: the five-level fixture and periodic spin rings.

Qubit 0 is the most significant bit of the computational-basis index, so
``|0...0>`` is index 0 and ``|1...1>`` is index ``2**nq - 1``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .validation import ConfigError, normalize

_H5_LOWER = [
    [-0.0763231],
    [-0.51328 + 0.0732759j, 0.691614],
    [0.516039 + 0.20004j, -0.884252 - 0.248885j, -0.495554],
    [-0.379429 + 0.303255j, 0.0981619 - 0.603679j, -0.484382 - 0.134895j, 0.921927],
    [0.0142526 + 0.421276j, 0.635987 + 0.0817911j, -0.450215 - 0.808964j,
     0.6387 + 0.188711j, 0.736562],
]

_PSI0 = [
    0.506424,
    -0.370456 + 0.164849j,
    -0.444258 + 0.194814j,
    -0.0372888 - 0.33439j,
    -0.475495 - 0.0671035j,
]

H5_EIGENVALUES = (-1.51593, -0.700576, 0.388005, 1.0888, 2.51793)
H5_BORN_WEIGHTS = (0.554875, 0.0729256, 0.262368, 0.00841186, 0.10142)
H5_ENERGY = -0.525913


class UnsupportedModelError(ConfigError):
    """Model parameters outside the supported family (e.g. short rings)."""


def h5_fixture():
    """The fixed 5x5 Hermitian test matrix and its (renormalized) initial state."""
    h = np.zeros((5, 5), dtype=np.complex128)
    for i, row in enumerate(_H5_LOWER):
        for j, value in enumerate(row):
            h[i, j] = value
            h[j, i] = np.conj(value)
    for i in range(5):
        h[i, i] = h[i, i].real
    return h, normalize(np.array(_PSI0, dtype=np.complex128))


@dataclass(frozen=True)
class PauliString:
    coefficient: float
    letters: str

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise ValueError("Pauli coefficient must be finite")
        if set(self.letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    @property
    def support(self):
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    def action(self):
        """Index permutation and phases so that (P psi) = phase * psi[perm]."""
        nq = len(self.letters)
        idx = np.arange(2**nq)
        xmask = zmask = 0
        n_y = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (nq - 1 - q)
            if c in "XY":
                xmask |= bit
            if c in "ZY":
                zmask |= bit
            n_y += c == "Y"
        # P|k> = i^nY (-1)^popcount(k & zmask) |k ^ xmask>
        parity = np.zeros(idx.shape, dtype=np.int64)
        masked = idx & zmask
        while np.any(masked):
            parity ^= masked & 1
            masked = masked >> 1
        phase = (1j**n_y) * (1 - 2 * parity)
        perm = idx ^ xmask
        return perm, phase[perm].astype(np.complex128)

    def apply(self, psi):
        """coefficient * P psi."""
        perm, phase = self.action()
        return self.coefficient * phase * psi[perm]


@dataclass(frozen=True, eq=False)
class PauliSumHamiltonian:
    """Real-weighted sum of Pauli strings on a periodic ring of ``nq`` qubits."""

    nq: int
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for t in self.terms:
            if len(t.letters) != self.nq:
                raise ValueError("Pauli string length does not match qubit count")

    @property
    def dim(self):
        return 2**self.nq

    @cached_property
    def _sparse(self):
        d = self.dim
        mat = sp.csr_matrix((d, d), dtype=np.complex128)
        cols = np.arange(d)
        for t in self.terms:
            perm, phase = t.action()
            # (P psi)[j] = phase[j] psi[perm[j]]  ->  entry (j, perm[j])
            mat = mat + sp.csr_matrix((t.coefficient * phase, (cols, perm)), shape=(d, d))
        mat.sum_duplicates()
        mat.eliminate_zeros()
        return mat.tocsr()

    def to_sparse(self):
        return self._sparse

    def to_dense(self):
        return self._sparse.toarray()

    def __add__(self, other):
        if other.nq != self.nq:
            raise ValueError("qubit counts differ")
        return PauliSumHamiltonian(self.nq, self.terms + other.terms)


def _letters(nq, assignment):
    chars = ["I"] * nq
    for site, c in assignment.items():
        chars[site % nq] = c
    return "".join(chars)


def _check_ring(nq):
    if nq < 3:
        raise UnsupportedModelError(f"periodic ring needs nq >= 3, got {nq}")


def build_tfi(nq, g):
    """Transverse-field Ising ring: sum_i g X_i X_{i+1} - (1 - g) Z_i."""
    _check_ring(nq)
    terms = []
    for i in range(nq):
        if g != 0.0:
            terms.append(PauliString(float(g), _letters(nq, {i: "X", i + 1: "X"})))
        if g != 1.0:
            terms.append(PauliString(-(1.0 - g), _letters(nq, {i: "Z"})))
    return PauliSumHamiltonian(nq, tuple(terms))


def build_xzy(nq, g, r):
    """Transverse-field XzY ring with three-site cluster couplings."""
    _check_ring(nq)
    terms = []
    for i in range(nq):
        if g != 0.0:
            cx = -g * (1.0 + r) / 2.0
            cy = -g * (1.0 - r) / 2.0
            if cx != 0.0:
                terms.append(PauliString(cx, _letters(nq, {i - 1: "X", i: "Z", i + 1: "X"})))
            if cy != 0.0:
                terms.append(PauliString(cy, _letters(nq, {i - 1: "Y", i: "Z", i + 1: "Y"})))
        if g != 1.0:
            terms.append(PauliString(-(1.0 - g), _letters(nq, {i: "Z"})))
    return PauliSumHamiltonian(nq, tuple(terms))


def build_model(model, nq=None, g=0.5, r=0.5, seed=0, dim=5):
    """Dispatch on a model name; returns ``(hamiltonian, default_initial_state)``."""
    if model == "h5":
        return h5_fixture()
    if model == "random":
        from .linalg import random_hermitian

        rng = np.random.Generator(np.random.Philox(seed + 1))
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return random_hermitian(dim, seed), normalize(psi)
    if model in ("tfi", "xzy"):
        h = build_tfi(nq, g) if model == "tfi" else build_xzy(nq, g, r)
        return h, neel_x_state(nq)
    raise ConfigError(f"unknown model {model!r}")


def product_state(nq, letters):
    """Product state from single-qubit labels in {'0', '1', '+', '-'}."""
    single = {
        "0": np.array([1.0, 0.0]),
        "1": np.array([0.0, 1.0]),
        "+": np.array([1.0, 1.0]) / np.sqrt(2),
        "-": np.array([1.0, -1.0]) / np.sqrt(2),
    }
    if len(letters) != nq:
        raise ValueError("label length must equal nq")
    psi = np.ones(1, dtype=np.complex128)
    for c in letters:
        psi = np.kron(psi, single[c])
    return psi


def neel_x_state(nq):
    """|+-+-...>, the initial state used for the Ising examples."""
    return product_state(nq, "".join("+-"[i % 2] for i in range(nq)))


@dataclass(frozen=True)
class Block:
    """A local operator acting on ``sites`` given as a dense 2^k x 2^k matrix."""

    sites: tuple
    matrix: np.ndarray

    @cached_property
    def spectrum(self):
        return np.linalg.eigh(self.matrix)


@dataclass(frozen=True, eq=False)
class BondSplit:
    """Even/odd partition of a nearest-neighbour ring into commuting bond blocks.

    Each block bundles one bond with half of the single-site terms on its two
    ends, so blocks inside one part have disjoint supports and commute.
    """

    nq: int
    even_blocks: tuple
    odd_blocks: tuple
    h_even: PauliSumHamiltonian
    h_odd: PauliSumHamiltonian

    def blocks(self, part):
        return self.even_blocks if part == "even" else self.odd_blocks

    def part(self, name):
        return self.h_even if name == "even" else self.h_odd

    def check_commuting(self):
        for blocks in (self.even_blocks, self.odd_blocks):
            seen = set()
            for b in blocks:
                if seen & set(b.sites):
                    return False
                seen |= set(b.sites)
        return True


def _local_matrix(term, sites):
    mats = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.array([[1, 0], [0, -1]]),
    }
    out = np.ones((1, 1), dtype=np.complex128)
    for s in sites:
        out = np.kron(out, mats[term.letters[s]])
    return term.coefficient * out


def split_even_odd(h):
    """Partition a nearest-neighbour ring Hamiltonian into even and odd bonds.

    Bond i joins sites (i, i+1 mod nq); it belongs to the even part when i is
    even.  Single-site terms are split half-and-half between the two parts.
    """
    nq = h.nq
    if nq % 2 or nq < 4:
        raise UnsupportedModelError(f"even/odd split needs an even ring with nq >= 4, got {nq}")
    bond_terms = {i: [] for i in range(nq)}
    site_terms = {i: [] for i in range(nq)}
    for t in h.terms:
        sup = t.support
        if len(sup) == 1:
            site_terms[sup[0]].append(t)
        elif len(sup) == 2 and (sup[1] - sup[0]) % nq in (1, nq - 1):
            a, b = sup
            bond = a if (b - a) == 1 else b  # wrap bond (nq-1, 0)
            bond_terms[bond].append(t)
        else:
            raise UnsupportedModelError("only one- and nearest-neighbour two-site terms can be split")

    parts = {"even": ([], []), "odd": ([], [])}
    for bond in range(nq):
        name = "even" if bond % 2 == 0 else "odd"
        sites = (bond, (bond + 1) % nq)
        local = [(t, t.coefficient) for t in bond_terms[bond]]
        local += [(t, t.coefficient / 2.0) for s in sites for t in site_terms[s]]
        mat = np.zeros((4, 4), dtype=np.complex128)
        paulis = []
        for t, c in local:
            scaled = PauliString(c, t.letters)
            paulis.append(scaled)
            mat += _local_matrix(scaled, sites)
        blocks, terms = parts[name]
        blocks.append(Block(sites, mat))
        terms.extend(paulis)

    even_blocks, even_terms = parts["even"]
    odd_blocks, odd_terms = parts["odd"]
    split = BondSplit(
        nq,
        tuple(even_blocks),
        tuple(odd_blocks),
        PauliSumHamiltonian(nq, tuple(even_terms)),
        PauliSumHamiltonian(nq, tuple(odd_terms)),
    )
    if not split.check_commuting():
        raise UnsupportedModelError("bond blocks overlap; split is not internally commuting")
    return split


def z_parity(nq):
    """Diagonal of the parity operator prod_i Z_i."""
    idx = np.arange(2**nq)
    bits = np.array([(idx >> k) & 1 for k in range(nq)]).sum(axis=0)
    return 1 - 2 * (bits % 2)
