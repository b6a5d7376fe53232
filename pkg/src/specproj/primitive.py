"""One controlled-evolution step with an X-basis ancilla measurement.

The ancilla starts in ``alpha|0> + beta|1>``, controls ``exp(-i h dt)`` on the
system and is measured in the X basis.  Outcome ``m`` leaves the system in
``(alpha + (-1)^m beta U)|psi> / sqrt(2)`` (unnormalized).

Besides the sampling step this module carries the closed-form diagnostics
for one step: energy change, average variance change, the rate factor and
the second-order exponent of the averaged random-walk action.  They cost
dense mat-vecs and are meant for tests and tracing, not the hot loop.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ExactPropagator, moments, to_dense
from .validation import PreconditionError, check_state

PROB_TOL = 1e-12
BRANCH_TOL = 1e-14


class NumericalConsistencyError(ArithmeticError):
    """An outcome probability fell outside [0, 1] beyond round-off."""


@dataclass(frozen=True)
class AncillaState:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise PreconditionError(f"ancilla not normalized (|a|^2+|b|^2={norm!r})")

    @classmethod
    def from_phase(cls, phi, magnitude=1 / math.sqrt(2)):
        """alpha = |alpha|, beta = sqrt(1 - |alpha|^2) e^{i phi}."""
        if not 0.0 <= magnitude <= 1.0:
            raise PreconditionError("ancilla magnitude must lie in [0, 1]")
        return cls(complex(magnitude), math.sqrt(1.0 - magnitude**2) * complex(math.cos(phi), math.sin(phi)))

    @property
    def overlap(self):
        """alpha* beta."""
        return self.alpha.conjugate() * self.beta


@dataclass(frozen=True)
class PrimitiveOutcome:
    bit: int
    post_state: np.ndarray
    p0: float
    r1: float
    rh: float


def as_propagator(h):
    """Accept a propagator (anything with ``evolve``) or a Hamiltonian."""
    if hasattr(h, "evolve"):
        return h
    return ExactPropagator(h)


def clamp_probability(p0):
    if p0 < -PROB_TOL or p0 > 1.0 + PROB_TOL:
        raise NumericalConsistencyError(f"outcome probability {p0!r} outside [0, 1]")
    return min(max(p0, 0.0), 1.0)


def outcome_probabilities(psi, ancilla, propagator, dt):
    """(p0, p1) for measuring the ancilla in the X basis."""
    prop = as_propagator(propagator)
    psi = check_state(psi, prop.dim)
    r1 = (ancilla.overlap * np.vdot(psi, prop.evolve(psi, dt))).real
    p0 = clamp_probability(0.5 * (1.0 + 2.0 * r1))
    return p0, 1.0 - p0


def apply_primitive(psi, ancilla, propagator, dt, rng):
    """Sample one outcome and return the normalized post-measurement state."""
    prop = as_propagator(propagator)
    psi = check_state(psi, prop.dim)
    upsi = prop.evolve(psi, dt)
    ab = ancilla.overlap
    r1 = (ab * np.vdot(psi, upsi)).real
    # <psi|U h|psi> = <h psi|U psi> since U commutes with h
    rh = (ab * np.vdot(prop.apply_h(psi), upsi)).real
    p0 = clamp_probability(0.5 * (1.0 + 2.0 * r1))
    bit = 0 if rng.random() < p0 else 1
    sign = 1.0 if bit == 0 else -1.0
    post = ancilla.alpha * psi + sign * ancilla.beta * upsi
    post /= np.linalg.norm(post)
    return PrimitiveOutcome(bit, post, p0, float(r1), float(rh))


def ratio_parameters(psi, ancilla, h, dt):
    """Return (R1, Rh, <h>) for a dense Hamiltonian ``h``."""
    hm = to_dense(h)
    psi = check_state(psi, hm.shape[0])
    prop = ExactPropagator(hm)
    upsi = prop.evolve(psi, dt)
    hpsi = hm @ psi
    ab = ancilla.overlap
    r1 = float((ab * np.vdot(psi, upsi)).real)
    rh = float((ab * np.vdot(hpsi, upsi)).real)
    return r1, rh, float(np.vdot(psi, hpsi).real)


def energy_change_closed_form(psi, ancilla, h, dt):
    """Energy change of each branch, (dE0, dE1); NaN marks a vanishing branch."""
    r1, rh, h1 = ratio_parameters(psi, ancilla, h, dt)
    out = []
    for sign in (1.0, -1.0):
        denom = 1.0 + 2.0 * sign * r1
        if denom / 2.0 <= BRANCH_TOL:
            out.append(math.nan)
        else:
            out.append(2.0 * sign * (rh - h1 * r1) / denom)
    return tuple(out)


def variance_change_closed_form(psi, ancilla, h, dt):
    """Outcome-averaged change of the energy variance (always <= 0).

    Returns NaN when |R1| reaches 1/2, where numerator and denominator
    both vanish.
    """
    r1, rh, h1 = ratio_parameters(psi, ancilla, h, dt)
    denom = 1.0 - 4.0 * r1 * r1
    if abs(r1) >= 0.5 - BRANCH_TOL or denom <= 0.0:
        return math.nan
    return -4.0 * (r1 * h1 - rh) ** 2 / denom


def ancilla_rate_factor(ancilla):
    """c = Im(a*b)^2 / (1 - 4 Re(a*b)^2); NaN on the |+/->-type family."""
    ab = ancilla.overlap
    denom = 1.0 - 4.0 * ab.real**2
    if denom <= BRANCH_TOL:
        return math.nan
    return ab.imag**2 / denom


def average_map_exponent(psi, ancilla, h, dt):
    """Hermitian exponent -c dt^2 (h - <h>)^2 of the averaged one-step action."""
    c = ancilla_rate_factor(ancilla)
    if math.isnan(c):
        return None
    hm = to_dense(h)
    psi = check_state(psi, hm.shape[0])
    shifted = hm - moments(psi, hm).h1 * np.eye(hm.shape[0])
    return -c * dt**2 * (shifted @ shifted)


def third_moment_obstruction(psi, h):
    """<h^3> - <h^2><h>; zero means no lowest-order energy drift under |+/->."""
    m = moments(psi, h)
    return m.h3 - m.h2 * m.h1


def exponent_operator(ancilla, h, dt, bit):
    """Second-order exponent P_m with |psi'_m> ~ exp(P_m)|psi>, up to a constant."""
    if ancilla.beta == 0:
        raise PreconditionError("exponent operator needs beta != 0")
    hm = to_dense(h)
    sign = 1.0 if bit == 0 else -1.0
    k = 1.0 + sign * ancilla.alpha / ancilla.beta
    hdt = hm * dt
    hdt2 = hdt @ hdt
    return (-1j * hdt - 0.5 * hdt2) / k + 0.5 * hdt2 / k**2


def hermitian_split(p):
    """P = Q + iR with Q and R Hermitian."""
    ph = p.conj().T
    return (p + ph) / 2.0, (p - ph) / 2j
