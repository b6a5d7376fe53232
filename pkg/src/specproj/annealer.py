"""Annealing by repeated projection along an interpolation path H(g).

At each grid point the state is projected with a fixed number of
primitive steps (no early stop), which emulates a measurement in the
instantaneous eigenbasis.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .hamiltonians import build_tfi, build_xzy, z_parity
from .linalg import ExactPropagator
from .noise import NoiseSpec, strike_hook
from .projector import ConvergenceCriteria, Schedule, iterate, ANNEAL_DT_LIST, ANNEAL_DT_REPEATS
from .trotter import TrotterPropagator, formula_by_label, validate_formula
from .validation import ConfigError, check_random_state, check_state

PROPAGATORS = ("auto", "exact", "strang2", "yoshida4", "paper4")


def uniform_grid(dg):
    """(dg, 2 dg, ..., 1.0) with the last point exactly 1."""
    n = int(round(1.0 / dg))
    if n < 1 or abs(n * dg - 1.0) > 1e-9:
        raise ConfigError(f"1/dg must be an integer, got dg={dg}")
    return tuple(j / n for j in range(1, n + 1))


def fig9_schedule():
    return Schedule("dt_list", ANNEAL_DT_LIST, ANNEAL_DT_REPEATS)


@dataclass(frozen=True)
class AnnealPlan:
    model: str = "xzy"
    nq: int = 6
    g_grid: tuple = field(default_factory=lambda: uniform_grid(0.05))
    steps_per_g: int = 180
    schedule: Schedule = field(default_factory=Schedule)
    initial: object = "ground_of_g0"
    propagator: str = "auto"
    r: float = 0.5
    noise: NoiseSpec = None

    def __post_init__(self):
        if self.model not in ("tfi", "xzy"):
            raise ConfigError(f"unknown anneal model {self.model!r}")
        g = np.asarray(self.g_grid, dtype=float)
        if g.size == 0 or np.any(np.diff(g) <= 0) or g[0] <= 0 or abs(g[-1] - 1.0) > 1e-12:
            raise ConfigError("g_grid must be strictly increasing in (0, 1] and end at 1.0")
        if self.steps_per_g < 1:
            raise ConfigError("steps_per_g must be >= 1")
        if self.propagator not in PROPAGATORS:
            raise ConfigError(f"unknown propagator {self.propagator!r}")

    def hamiltonian(self, g):
        if self.model == "tfi":
            return build_tfi(self.nq, g)
        return build_xzy(self.nq, g, self.r)

    def resolved_propagator(self):
        if self.propagator != "auto":
            return self.propagator
        if self.model == "tfi" and self.nq >= 8:
            return "paper4"
        return "exact"


@dataclass
class AnnealRecord:
    g: float
    energy: float
    variance: float
    steps: int


@dataclass
class AnnealTrace:
    records: list
    final_state: np.ndarray
    propagator: str
    formula_order: float = None
    fell_back: bool = False
    strikes: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def initial_state(plan):
    d = 2**plan.nq
    if isinstance(plan.initial, str):
        psi = np.zeros(d, dtype=np.complex128)
        if plan.initial == "ground_of_g0":
            psi[0] = 1.0
        elif plan.initial == "highest_of_g0":
            psi[-1] = 1.0
        else:
            raise ConfigError(f"unknown initial state {plan.initial!r}")
        return psi
    return check_state(plan.initial, d)


def anneal(plan, rng=None):
    """Sweep g over the plan's grid, projecting ``steps_per_g`` times at each point."""
    rng = check_random_state(rng)
    psi = initial_state(plan)
    label = plan.resolved_propagator()
    formula = order = None
    fell_back = False
    if label != "exact":
        if label == "paper4":
            formula, order, fell_back = validate_formula("paper4")
        else:
            formula = formula_by_label(label)
    criteria = ConvergenceCriteria(variance_threshold=1e-300, max_steps=plan.steps_per_g)
    records, strikes = [], []
    for g in plan.g_grid:
        h = plan.hamiltonian(g)
        if formula is None:
            prop = ExactPropagator(h)
            sd = prop.sd
            hook = strike_hook(plan.noise, plan.nq, sd.eigenvectors) if plan.noise else None
            trace = iterate(sd.to_eigenbasis(psi), prop.eigenbasis(), plan.schedule, criteria, rng, hook,
                            stop_on_convergence=False)
            psi = sd.from_eigenbasis(trace.final_state)
        else:
            prop = TrotterPropagator(h, formula)
            hook = strike_hook(plan.noise, plan.nq) if plan.noise else None
            trace = iterate(psi, prop, plan.schedule, criteria, rng, hook, stop_on_convergence=False)
            psi = trace.final_state
        strikes.extend((g, s) for s in trace.strikes)
        records.append(AnnealRecord(float(g), float(trace.energy[-1]), float(trace.variance[-1]), trace.steps))
    used = formula.label if formula is not None else "exact"
    return AnnealTrace(records, psi, used, order, fell_back, strikes)


def ground_cluster(h, rel_tol=1e-8, k=8):
    """(energies, orthonormal basis) of the lowest degenerate eigenspace."""
    d = 2**h.nq
    if d <= 1024:
        vals, vecs = np.linalg.eigh(h.to_dense())
    else:
        vals, vecs = spla.eigsh(h.to_sparse(), k=k, which="SA", tol=1e-12)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    tol = rel_tol * max(1.0, abs(vals[0]))
    mask = vals - vals[0] <= tol
    return vals[mask], vecs[:, mask]


def ground_fidelity(psi, h):
    """Weight of ``psi`` inside the (possibly degenerate) ground space of ``h``."""
    _, basis = ground_cluster(h)
    return float(np.sum(np.abs(basis.conj().T @ psi) ** 2))


@dataclass
class LevelCurves:
    g: np.ndarray
    levels: np.ndarray
    sector_ground: np.ndarray
    crossing: bool
    min_gap: float


def _lowest(m, k):
    if not hasattr(m, "tocsr"):
        return np.linalg.eigvalsh(m)
    if m.shape[0] <= 1024:
        return np.linalg.eigvalsh(m.toarray())
    return np.sort(spla.eigsh(m, k=k, which="SA", tol=1e-12, return_eigenvectors=False))


def level_curves(model, nq, r=0.5, g_grid=None, tol=1e-9, n_low=6):
    """Spectrum along the path plus a ground-level crossing check.

    Both models conserve the Z parity, so a true crossing shows up as a
    sign change of the difference between the two parity sectors' lowest
    levels.  ``min_gap`` is the smallest E1 - E0 on the grid excluding g=1.
    Up to nq = 10 every level is returned; above that only the lowest
    ``n_low`` (sparse solver).
    """
    if nq > 12:
        raise ConfigError("level curves need nq <= 12")
    g_grid = np.asarray(uniform_grid(0.05) if g_grid is None else g_grid, dtype=float)
    parity = z_parity(nq)
    sectors = [np.flatnonzero(parity == s) for s in (1, -1)]
    levels, sector_ground = [], []
    for g in g_grid:
        h = (build_tfi(nq, g) if model == "tfi" else build_xzy(nq, g, r)).to_sparse().tocsr()
        if nq <= 10:
            h = h.toarray()
            levels.append(np.linalg.eigvalsh(h))
            sector_ground.append([np.linalg.eigvalsh(h[np.ix_(s, s)])[0] for s in sectors])
        else:
            levels.append(_lowest(h, n_low))
            sector_ground.append([_lowest(h[s][:, s], 1)[0] for s in sectors])
    levels = np.array(levels)
    sector_ground = np.array(sector_ground)
    diff = sector_ground[:, 0] - sector_ground[:, 1]
    signs = [np.sign(x) for x in diff if abs(x) > tol]
    crossing = any(a != b for a, b in zip(signs, signs[1:]))
    interior = g_grid < 1.0 - 1e-12
    gaps = levels[interior, 1] - levels[interior, 0]
    return LevelCurves(g_grid, levels, sector_ground, crossing, float(gaps.min()) if gaps.size else float("nan"))
