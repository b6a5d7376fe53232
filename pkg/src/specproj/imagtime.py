"""Adaptive imaginary-time step with an r-parameterized ancilla.

The ancilla has alpha/beta = -1 + i r, so outcome 0 applies roughly
(1 - h dt / r).  Outcome 1 is patched up by a phase-only correcting
unitary and the ratio moves on to r' = r (r^2 + 4) / (2 r^2 + 4).  Kept as
an executable negative result: the chance of a long run of 1s only
decays like r_{n+1}/r_1 ~ n^(-1/2), not exponentially.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ExactPropagator
from .primitive import AncillaState, apply_primitive
from .validation import ConfigError, PreconditionError, check_random_state, check_state


@dataclass(frozen=True)
class ImagTimeParams:
    r1: float = 1.0
    dt: float = 0.01
    max_rounds: int = 200

    def __post_init__(self):
        if not self.r1 > 0 or not self.dt > 0:
            raise ConfigError("r1 and dt must be > 0")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")


def imag_ancilla(r):
    if not math.isfinite(r):
        raise PreconditionError("r must be finite")
    s = math.sqrt(2.0 + r * r)
    return AncillaState(complex(-1.0, r) / s, complex(1.0 / s))


def next_r(r):
    if not r > 0:
        raise PreconditionError(f"r must be > 0, got {r!r}")
    return r * (r * r + 4.0) / (2.0 * r * r + 4.0)


def r_sequence(r1, n):
    """r_1, ..., r_n."""
    out = [float(r1)]
    while len(out) < n:
        out.append(next_r(out[-1]))
    return np.array(out)


def correction_time(r, dt):
    """exp(i 2/(r^2+4) h dt) written as evolution exp(-i h t) with this t."""
    return -2.0 * dt / (r * r + 4.0)


def outcome_probability(psi, prop, r, dt, bit):
    """p_m = 1/2 + (-1)^m (-Re<U> + r Im<U>) / (2 + r^2)."""
    u = np.vdot(psi, prop.evolve(psi, dt))
    sign = 1.0 if bit == 0 else -1.0
    return 0.5 + sign * (-u.real + r * u.imag) / (2.0 + r * r)


def run_imaginary_time_step(psi, h, dt, r1=1.0, max_rounds=200, rng=None):
    """Repeat the primitive until outcome 0 or ``max_rounds``.

    Returns (success, rounds, post_state).
    """
    params = ImagTimeParams(r1, dt, max_rounds)
    rng = check_random_state(rng)
    prop = h if hasattr(h, "evolve") else ExactPropagator(h)
    psi = check_state(psi, prop.dim)
    r = params.r1
    for n in range(1, params.max_rounds + 1):
        out = apply_primitive(psi, imag_ancilla(r), prop, params.dt, rng)
        psi = out.post_state
        if out.bit == 0:
            return True, n, psi
        psi = prop.evolve(psi, correction_time(r, params.dt))
        r = next_r(r)
    return False, params.max_rounds, psi


@dataclass
class ConsecutiveOnes:
    n: np.ndarray
    empirical: np.ndarray
    analytic: np.ndarray
    stderr: np.ndarray
    trials: int

    def decay_rate(self):
        """log p^(n) / n, NaN where nothing survived."""
        with np.errstate(divide="ignore"):
            return np.where(self.empirical > 0, np.log(self.empirical) / self.n, np.nan)


def consecutive_one_statistics(psi, h, dt, r1=1.0, trials=10_000, rng=None, n_max=100):
    """Monte-Carlo Pr[first n outcomes are all 1] for n = 1..n_max.

    All trials run together in the eigenbasis of ``h``; the analytic
    column is r_{n+1}/r_1, exact at dt = 0.
    """
    if trials < 1 or n_max < 1:
        raise ConfigError("trials and n_max must be >= 1")
    rng = check_random_state(rng)
    prop = ExactPropagator(h)
    sd = prop.sd
    psi = check_state(psi, prop.dim)
    energies = sd.eigenvalues
    c = np.tile(sd.to_eigenbasis(psi), (trials, 1))
    phase = np.exp(-1j * energies * dt)
    survivors = np.zeros(n_max, dtype=np.int64)
    r = float(r1)
    for n in range(n_max):
        anc = imag_ancilla(r)
        w = np.abs(c) ** 2
        u = w @ phase
        p1 = np.clip(0.5 - (anc.overlap * u).real, 0.0, 1.0)
        alive = rng.random(len(c)) < p1
        c = c[alive]
        survivors[n] = len(c)
        if not len(c):
            break
        c = c * ((anc.alpha - anc.beta * phase) * np.exp(-1j * energies * correction_time(r, dt)))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        r = next_r(r)
    emp = survivors / trials
    rs = r_sequence(r1, n_max + 1)
    return ConsecutiveOnes(
        np.arange(1, n_max + 1), emp, rs[1:] / rs[0], np.sqrt(emp * (1.0 - emp) / trials), trials,
    )
