"""Depolarizing noise on the system qubits during projection runs."""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ExactPropagator
from .primitive import clamp_probability
from .projector import ConvergenceCriteria, RunTrace, Schedule, _prepare, iterate
from .validation import ConfigError, check_random_state, check_state

_PAULI_LETTERS = "XYZ"


class UnsupportedNoiseError(ConfigError):
    """Noise requested on a Hilbert space without qubit structure."""


@dataclass(frozen=True)
class NoiseSpec:
    """Strike with strength ``epsilon`` at steps first_strike, first_strike + period, ...

    ``last_strike`` (inclusive) stops the strikes; None means never stop.
    """

    epsilon: float = 0.0
    period: int = 1
    first_strike: int = 1
    last_strike: int = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.period < 1 or self.first_strike < 1:
            raise ConfigError("period and first_strike must be >= 1")

    def strikes_at(self, step):
        if step < self.first_strike or (self.last_strike is not None and step > self.last_strike):
            return False
        return (step - self.first_strike) % self.period == 0


def _qubit_count(dim):
    nq = int(round(math.log2(dim)))
    if 2**nq != dim:
        raise UnsupportedNoiseError(f"dimension {dim} is not a power of two")
    return nq


def _apply_pauli(psi, nq, qubit, letter):
    t = psi.reshape((2,) * nq)
    t = np.moveaxis(t, qubit, 0)
    if letter == "X":
        t = t[::-1]
    elif letter == "Y":
        t = np.stack((-1j * t[1], 1j * t[0]))
    else:
        t = np.stack((t[0], -t[1]))
    return np.moveaxis(t, 0, qubit).reshape(-1)


def depolarize_trajectory(psi, nq, epsilon, rng):
    """One stochastic unravelling of the per-qubit depolarizing channel.

    Each qubit independently gets X, Y or Z with probability epsilon/4 each,
    which averages to (1 - eps) rho + eps I/2.  epsilon = 0 returns the
    input untouched and draws nothing from ``rng``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must lie in [0, 1]")
    psi = check_state(psi, 2**nq, normalized=False)
    if epsilon == 0.0:
        return psi
    q = epsilon / 4.0
    for qubit in range(nq):
        u = rng.random()
        if u < 3.0 * q:
            psi = _apply_pauli(psi, nq, qubit, _PAULI_LETTERS[int(u // q)])
    return psi


def depolarize_density(rho, nq, epsilon):
    """Exact channel rho -> (1 - eps) rho + eps Tr_q(rho) x I/2 on every qubit."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must lie in [0, 1]")
    d = 2**nq
    for q in range(nq):
        t = rho.reshape((2,) * (2 * nq))
        traced = np.trace(t, axis1=q, axis2=nq + q)
        mixed = np.expand_dims(np.expand_dims(traced, q), nq + q)
        eye = np.eye(2).reshape([2 if k in (q, nq + q) else 1 for k in range(2 * nq)])
        rho = ((1.0 - epsilon) * t + epsilon * 0.5 * mixed * eye).reshape(d, d)
    return rho


def strike_hook(noise, nq, vecs=None):
    """Hook for ``iterate`` applying trajectory strikes.

    With ``vecs`` the loop state is taken to be in that eigenbasis and is
    rotated to the computational basis for the strike.
    """

    def hook(step, state, rng):
        if noise.epsilon == 0.0 or not noise.strikes_at(step):
            return state, False
        if vecs is None:
            return depolarize_trajectory(state, nq, noise.epsilon, rng), True
        psi = depolarize_trajectory(vecs @ state, nq, noise.epsilon, rng)
        return vecs.conj().T @ psi, True

    return hook


def noisy_projection(psi0, h, schedule=None, criteria=None, noise=None, rng=None,
                     stop_on_convergence=True, method="trajectory"):
    """Projection run with depolarizing strikes after the scheduled measurements.

    ``method="trajectory"`` follows one pure-state unravelling; with
    epsilon = 0 it reproduces run_projection exactly for the same seed.
    ``method="density"`` evolves the full density matrix under the exact
    channel while measurement outcomes are still sampled.
    """
    schedule = schedule or Schedule()
    criteria = criteria or ConvergenceCriteria()
    noise = noise or NoiseSpec()
    rng = check_random_state(rng)
    prop, sd = _prepare(h)
    nq = _qubit_count(prop.dim)
    psi0 = check_state(psi0, prop.dim)
    if method == "density":
        return _density_run(psi0, prop, nq, schedule, criteria, noise, rng, stop_on_convergence)
    if method != "trajectory":
        raise ConfigError(f"unknown noise method {method!r}")

    if sd is not None:
        trace = iterate(sd.to_eigenbasis(psi0), prop.eigenbasis(), schedule, criteria, rng,
                        strike_hook(noise, nq, sd.eigenvectors), stop_on_convergence)
        trace.final_state = sd.from_eigenbasis(trace.final_state)
        return trace
    return iterate(psi0, prop, schedule, criteria, rng, strike_hook(noise, nq), stop_on_convergence)


def _density_run(psi0, prop, nq, schedule, criteria, noise, rng, stop_on_convergence):
    if not isinstance(prop, ExactPropagator):
        prop = ExactPropagator(prop.hamiltonian if hasattr(prop, "hamiltonian") else prop.matrix)
    sd = prop.sd
    vecs, energies = sd.eigenvectors, sd.eigenvalues
    # density matrix in the eigenbasis; strikes rotate to the computational basis
    c = sd.to_eigenbasis(psi0)
    rho = np.outer(c, c.conj())
    bits, p0s, en, var, dts, phis, strikes = [], [], [], [], [], [], []
    converged = False
    stream = schedule.steps(rng)
    for step in range(1, criteria.max_steps + 1):
        try:
            anc, dt, phi = next(stream)
        except StopIteration:
            break
        phase = np.exp(-1j * energies * dt)
        ab = anc.overlap
        p0 = clamp_probability(0.5 + (ab * np.sum(np.diag(rho) * phase)).real)
        bit = 0 if rng.random() < p0 else 1
        sign = 1.0 if bit == 0 else -1.0
        k = (anc.alpha + sign * anc.beta * phase) / math.sqrt(2.0)
        rho = k[:, None] * rho * k.conj()[None, :]
        rho /= np.trace(rho).real
        if noise.epsilon and noise.strikes_at(step):
            comp = vecs @ rho @ vecs.conj().T
            comp = depolarize_density(comp, nq, noise.epsilon)
            rho = vecs.conj().T @ comp @ vecs
            strikes.append(step)
        w = np.diag(rho).real
        h1 = float(w @ energies)
        v = max(float(w @ (energies - h1) ** 2), 0.0)
        bits.append(bit)
        p0s.append(p0)
        en.append(h1)
        var.append(v)
        dts.append(dt)
        phis.append(phi)
        converged = v < criteria.variance_threshold
        if converged and stop_on_convergence:
            break
    # dominant eigenvector of rho stands in for the pure final state
    final = sd.from_eigenbasis(np.linalg.eigh(rho)[1][:, -1])
    w0 = np.abs(c) ** 2
    e0 = float(w0 @ energies)
    trace = RunTrace(
        np.array(bits, dtype=np.int8), np.array(p0s), np.array(en), np.array(var), np.array(dts),
        np.array(phis), converged, final, e0, float(w0 @ (energies - e0) ** 2), False, tuple(strikes),
    )
    trace.density = vecs @ rho @ vecs.conj().T
    return trace
