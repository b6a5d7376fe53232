"""Iterated ancilla measurements driving a state onto an eigenstate."""

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import ExactPropagator, SpectralDecomposition
from .primitive import AncillaState, as_propagator, clamp_probability
from .validation import ConfigError, PreconditionError, check_random_state, check_state, normalize

KINDS = {
    "I": "fixed",
    "II": "phi_set",
    "III": "phi_random",
    "IV": "dt_list",
    "fixed": "fixed",
    "phi_set": "phi_set",
    "phi_random": "phi_random",
    "dt_list": "dt_list",
}

DEFAULT_DT_LIST = tuple(100.0 / 3**k for k in range(6))
ANNEAL_DT_LIST = (0.01, 0.1, 0.03, 0.01, 0.003)
ANNEAL_DT_REPEATS = (10, 10, 50, 100, 40)

TRAP_OBSTRUCTION = 1e-8
TRAP_MIN_VARIANCE = 1e-6
TRAP_WINDOW = 50


class ClassificationError(RuntimeError):
    """No degenerate cluster holds the required weight."""


class AmbiguousEstimateError(RuntimeError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class IncompleteSpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Sequence of (ancilla, dt) choices.

    kind is one of ``fixed`` (constant dt and phase), ``phi_set`` (constant
    dt, phases cycled in order), ``phi_random`` (constant dt, uniform random
    phase) and ``dt_list`` (dt cycled through ``dt_list`` with per-entry
    ``repeats``, uniform random phase).
    """

    kind: str = "dt_list"
    dt_list: tuple = DEFAULT_DT_LIST
    repeats: tuple = (5,) * 6
    phi_set: tuple = (0.0,)
    ancilla_magnitude: float = 1 / math.sqrt(2)
    recycle: bool = True
    dt_jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS.values():
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.dt_list or any(dt <= 0 for dt in self.dt_list):
            raise ConfigError("dt_list must be nonempty with positive entries")
        if len(self.repeats) != len(self.dt_list) or any(r < 1 for r in self.repeats):
            raise ConfigError("repeats must match dt_list and be >= 1")
        if self.kind in ("fixed", "phi_set") and not self.phi_set:
            raise ConfigError("phi_set must be nonempty")
        if not 0.0 < self.ancilla_magnitude < 1.0:
            raise ConfigError("ancilla_magnitude must lie in (0, 1)")
        if self.dt_jitter < 0:
            raise ConfigError("dt_jitter must be >= 0")

    @property
    def cycle_length(self):
        return sum(self.repeats)

    @property
    def is_plus_minus(self):
        """True when every step uses a real alpha* beta (the |+/-> family for |alpha|=1/sqrt2)."""
        if self.kind in ("phi_random", "dt_list"):
            return False
        return all(abs(math.sin(phi)) < 1e-15 for phi in self.phi_set)

    def steps(self, rng):
        """Yield (AncillaState, dt, phi) forever, or one pass when not recycling."""
        expanded = [dt for dt, n in zip(self.dt_list, self.repeats) for _ in range(n)]
        if self.kind != "dt_list":
            expanded = [self.dt_list[0]]
        fixed = {}
        k = 0
        while True:
            for dt in expanded:
                if self.kind in ("phi_random", "dt_list"):
                    phi = 2.0 * math.pi * rng.random()
                else:
                    phi = self.phi_set[k % len(self.phi_set)]
                k += 1
                if self.dt_jitter:
                    dt = dt * (1.0 + self.dt_jitter * rng.random())
                anc = fixed.get(phi)
                if anc is None:
                    anc = AncillaState.from_phase(phi, self.ancilla_magnitude)
                    if len(fixed) < 64:
                        fixed[phi] = anc
                yield anc, dt, phi
            if self.kind == "dt_list" and not self.recycle:
                return


def make_schedule(kind, dt=1.0, phi=0.0, phi_set=None, dt_list=None, repeats=None,
                  ancilla_magnitude=1 / math.sqrt(2), recycle=True, dt_jitter=0.0):
    """Build a Schedule; ``kind`` accepts the roman labels I-IV or the names."""
    try:
        name = KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown schedule kind {kind!r}") from None
    if name == "dt_list":
        dts = tuple(DEFAULT_DT_LIST if dt_list is None else dt_list)
        if not dts:
            raise ConfigError("empty dt_list")
        reps = tuple((5,) * len(dts) if repeats is None else repeats)
        return Schedule(name, dts, reps, (0.0,), ancilla_magnitude, recycle, dt_jitter)
    if name == "fixed":
        phis = (float(phi),)
    elif name == "phi_set":
        phis = tuple(phi_set) if phi_set is not None else tuple(k * math.pi / 4 for k in range(8))
    else:
        phis = (0.0,)
    return Schedule(name, (float(dt),), (1,), phis, ancilla_magnitude, recycle, dt_jitter)


@dataclass(frozen=True)
class ConvergenceCriteria:
    variance_threshold: float = 1e-10
    max_steps: int = 5000

    def __post_init__(self):
        if not self.variance_threshold > 0:
            raise ConfigError("variance_threshold must be > 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


@dataclass
class RunTrace:
    bits: np.ndarray
    p0: np.ndarray
    energy: np.ndarray
    variance: np.ndarray
    dt: np.ndarray
    phi: np.ndarray
    converged: bool
    final_state: np.ndarray
    initial_energy: float
    initial_variance: float
    trapped: bool = False
    strikes: tuple = ()

    @property
    def steps(self):
        return len(self.bits)

    def rows(self):
        """Rows in CSV column order: step, bit, p0, energy, variance, dt, phi."""
        for k in range(self.steps):
            yield (k + 1, int(self.bits[k]), float(self.p0[k]), float(self.energy[k]),
                   float(self.variance[k]), float(self.dt[k]), float(self.phi[k]))


@dataclass
class EigenAssignment:
    cluster_id: int
    indices: tuple
    eigen_value: float
    weight: float


@dataclass
class ProjectionResult:
    trace: RunTrace
    eigen_index: int = None
    eigen_value: float = math.nan
    cluster_weight: float = math.nan

    @property
    def converged(self):
        return self.trace.converged

    @property
    def steps(self):
        return self.trace.steps


def iterate(psi, prop, schedule, criteria, rng, hook=None, stop_on_convergence=True):
    """Core loop in whatever basis ``prop`` works in.

    ``hook(step, state, rng) -> (state, struck)`` runs after each
    measurement; the noise module uses it for decoherence strikes.
    """
    bits, p0s, energies, variances, dts, phis, strikes = [], [], [], [], [], [], []
    apply_h = prop.apply_h
    evolve = prop.evolve
    hpsi = apply_h(psi)
    h1 = np.vdot(psi, hpsi).real
    d = hpsi - h1 * psi
    init_energy, init_var = float(h1), float(np.vdot(d, d).real)
    watch_trap = schedule.is_plus_minus
    trap_run = 0
    trapped = converged = False
    threshold = criteria.variance_threshold
    stream = schedule.steps(rng)
    for step in range(1, criteria.max_steps + 1):
        try:
            anc, dt, phi = next(stream)
        except StopIteration:
            break
        upsi = evolve(psi, dt)
        ab = anc.overlap
        p0 = clamp_probability(0.5 + (ab * np.vdot(psi, upsi)).real)
        bit = 0 if rng.random() < p0 else 1
        post = anc.alpha * psi + anc.beta * upsi if bit == 0 else anc.alpha * psi - anc.beta * upsi
        psi = post / np.linalg.norm(post)
        if hook is not None:
            psi, struck = hook(step, psi, rng)
            if struck:
                strikes.append(step)
        hpsi = apply_h(psi)
        h1 = np.vdot(psi, hpsi).real
        d = hpsi - h1 * psi
        var = np.vdot(d, d).real
        bits.append(bit)
        p0s.append(p0)
        energies.append(h1)
        variances.append(var)
        dts.append(dt)
        phis.append(phi)
        if var < threshold:
            converged = True
            if stop_on_convergence:
                break
        else:
            converged = False
        if watch_trap:
            obstruction = np.vdot(hpsi, apply_h(hpsi)).real - np.vdot(hpsi, hpsi).real * h1
            trap_run = trap_run + 1 if (abs(obstruction) < TRAP_OBSTRUCTION and var > TRAP_MIN_VARIANCE) else 0
            if trap_run >= TRAP_WINDOW:
                trapped = True
                break
    return RunTrace(
        np.array(bits, dtype=np.int8), np.array(p0s), np.array(energies), np.array(variances),
        np.array(dts), np.array(phis), converged, psi, init_energy, init_var, trapped, tuple(strikes),
    )


def cluster_spectrum(eigenvalues, rel_gap=1e-8):
    """Group ascending eigenvalues closer than rel_gap * spectral range."""
    e = np.asarray(eigenvalues, dtype=float)
    span = float(e[-1] - e[0]) or 1.0
    clusters, current = [], [0]
    for i in range(1, len(e)):
        if e[i] - e[i - 1] <= rel_gap * span:
            current.append(i)
        else:
            clusters.append(tuple(current))
            current = [i]
    clusters.append(tuple(current))
    return clusters


def _assign(weights, eigenvalues, clusters, tol):
    for cid, idx in enumerate(clusters):
        w = float(np.sum(weights[list(idx)]))
        if w >= 1.0 - tol:
            return EigenAssignment(cid, idx, float(np.mean(eigenvalues[list(idx)])), w)
    raise ClassificationError(f"no eigen-cluster holds weight >= 1 - {tol:g}")


def classify_eigenstate(sd, psi, tol=1e-6, clusters=None):
    """Assign a converged state to the degenerate eigen-cluster holding its weight."""
    psi = check_state(psi, sd.dim)
    weights = np.abs(sd.to_eigenbasis(psi)) ** 2
    if clusters is None:
        clusters = cluster_spectrum(sd.eigenvalues)
    return _assign(weights, sd.eigenvalues, clusters, tol)


def _prepare(h):
    """Return (propagator, spectral decomposition or None)."""
    if isinstance(h, ExactPropagator):
        return h, h.sd
    if isinstance(h, SpectralDecomposition):
        return ExactPropagator(h.reconstruct(), sd=h), h
    prop = as_propagator(h)
    return prop, getattr(prop, "sd", None)


def run_projection(psi0, h, schedule=None, criteria=None, rng=None, classify=True, clusters=None,
                   classify_tol=1e-6):
    """Repeat the primitive until the energy variance drops below threshold.

    Exact propagators run in the eigenbasis (U is then diagonal); any other
    propagator, e.g. a product formula, runs in the computational basis.
    Unconverged runs come back flagged rather than raising.
    """
    schedule = schedule or Schedule()
    criteria = criteria or ConvergenceCriteria()
    rng = check_random_state(rng)
    prop, sd = _prepare(h)
    psi0 = check_state(psi0, prop.dim)
    if sd is not None:
        trace = iterate(sd.to_eigenbasis(psi0), prop.eigenbasis(), schedule, criteria, rng)
        weights = np.abs(trace.final_state) ** 2
        trace.final_state = sd.from_eigenbasis(trace.final_state)
    else:
        trace = iterate(psi0, prop, schedule, criteria, rng)
    result = ProjectionResult(trace)
    if trace.steps:
        result.eigen_value = float(trace.energy[-1])
    if trace.converged and classify and sd is not None:
        if clusters is None:
            clusters = cluster_spectrum(sd.eigenvalues)
        a = _assign(weights, sd.eigenvalues, clusters, classify_tol)
        result.eigen_index, result.eigen_value, result.cluster_weight = a.cluster_id, a.eigen_value, a.weight
    return result


def estimate_eigenvalue(samples, prior_range, ancilla_magnitude=1 / math.sqrt(2), grid_points=10_000,
                        ambiguity_tol=1e-8):
    """Least-squares eigenvalue from observed p0 on a converged eigenstate.

    ``samples`` holds (phi, dt, p0_hat) triples.  The model is
    p0 = (1 + 2|ab| cos(phi - E dt)) / 2.  A grid search over ``prior_range``
    is refined by golden-section search; competing minima within
    ``ambiguity_tol`` of the best raise AmbiguousEstimateError.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise PreconditionError("samples must be (phi, dt, p0_hat) triples")
    if len(np.unique(samples[:, 1])) < 2:
        raise AmbiguousEstimateError("a single dt cannot resolve the sign/2pi aliasing of E dt")
    phi, dt, p_hat = samples.T
    ab = ancilla_magnitude * math.sqrt(1.0 - ancilla_magnitude**2)

    def objective(e):
        e = np.atleast_1d(e)[:, None]
        model = 0.5 * (1.0 + 2.0 * ab * np.cos(phi[None, :] - e * dt[None, :]))
        return np.sum((p_hat[None, :] - model) ** 2, axis=1)

    lo, hi = map(float, prior_range)
    grid = np.linspace(lo, hi, grid_points)
    f = objective(grid)
    interior = np.flatnonzero((f[1:-1] <= f[:-2]) & (f[1:-1] <= f[2:])) + 1
    minima = list(interior)
    if f[0] < f[1]:
        minima.insert(0, 0)
    if f[-1] < f[-2]:
        minima.append(len(grid) - 1)
    step = grid[1] - grid[0]
    refined = []
    for i in minima:
        a, b = max(lo, grid[i] - step), min(hi, grid[i] + step)
        x = _golden_section(lambda v: float(objective(v)[0]), a, b, tol=1e-10 * max(1.0, abs(grid[i])))
        refined.append((float(objective(x)[0]), x))
    refined.sort()
    best_f, best_x = refined[0]
    rivals = [x for fx, x in refined[1:] if fx - best_f <= ambiguity_tol + 0.05 * best_f and abs(x - best_x) > 2 * step]
    if rivals:
        raise AmbiguousEstimateError("multiple eigenvalue candidates fit equally well", [best_x] + rivals)
    return best_x


def _golden_section(f, a, b, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def ancilla_bloch(psi, ancilla, propagator, dt):
    """Bloch vector and purity of the ancilla after the controlled evolution."""
    prop = as_propagator(propagator)
    psi = check_state(psi, prop.dim)
    z = np.vdot(psi, prop.evolve(psi, dt))
    # rho_01 = alpha beta* <U psi|psi>
    rho01 = ancilla.alpha * ancilla.beta.conjugate() * z.conjugate()
    rx, ry = 2.0 * rho01.real, -2.0 * rho01.imag
    rz = abs(ancilla.alpha) ** 2 - abs(ancilla.beta) ** 2
    purity = 0.5 * (1.0 + rx * rx + ry * ry + rz * rz)
    return float(rx), float(ry), float(rz), float(purity)


def _deflate(psi, found):
    for _ in range(2):
        for v in found:
            psi = psi - np.vdot(v, psi) * v
    return psi


def exhaust_spectrum(h, psi0, schedule=None, criteria=None, rng=None, retry_budget=None):
    """Find all d eigenpairs by repeated projection and deflation."""
    rng = check_random_state(rng)
    prop, sd = _prepare(h)
    if sd is None:
        prop = ExactPropagator(h)
        sd = prop.sd
    d = prop.dim
    if d > 64:
        raise PreconditionError("exhaust_spectrum is limited to d <= 64")
    psi0 = check_state(psi0, d)
    budget = 10 * d if retry_budget is None else retry_budget
    found = []
    base_exhausted = False
    retries = 0

    def random_start():
        while True:
            v = _deflate(rng.normal(size=d) + 1j * rng.normal(size=d), [f[1] for f in found])
            if np.linalg.norm(v) >= 1e-8:
                return normalize(v)

    while len(found) < d:
        start = None
        if not base_exhausted:
            v = _deflate(psi0, [f[1] for f in found])
            if np.linalg.norm(v) < 1e-8:
                base_exhausted = True
            else:
                start = normalize(v)
        if start is None:
            start = random_start()
        res = run_projection(start, prop, schedule, criteria, rng, classify=False)
        vec = res.trace.final_state
        duplicate = any(abs(np.vdot(f[1], vec)) ** 2 > 1.0 - 1e-6 for f in found)
        if not res.converged or duplicate:
            retries += 1
            base_exhausted = True
            if retries > budget:
                raise IncompleteSpectrumError(f"found {len(found)} of {d} eigenpairs before retry budget ran out")
            continue
        found.append((float(res.trace.energy[-1]), vec))
    return found


@dataclass
class BornStatistics:
    cluster_values: list
    ideal: np.ndarray
    counts: np.ndarray
    frequencies: np.ndarray
    tvd: float
    runs: int
    unconverged: int
    trapped: int
    steps_by_cluster: dict = field(default_factory=dict)

    def histogram(self):
        """{cluster_id: Counter(steps -> runs)}."""
        return {cid: Counter(steps) for cid, steps in self.steps_by_cluster.items()}


def _born_chunk(args):
    sd, clusters, psi0_eig, schedule, criteria, seed, indices = args
    prop = ExactPropagator.__new__(ExactPropagator)
    prop.sd = sd
    diag = prop.eigenbasis()
    out = []
    for i in indices:
        rng = np.random.default_rng([seed, i])
        trace = iterate(psi0_eig, diag, schedule, criteria, rng)
        if not trace.converged:
            out.append((i, -1, trace.steps, trace.trapped))
            continue
        weights = np.abs(trace.final_state) ** 2
        try:
            cid = _assign(weights, sd.eigenvalues, clusters, 1e-6).cluster_id
        except ClassificationError:
            cid = -2
        out.append((i, cid, trace.steps, False))
    return out


def born_statistics(h, psi0, schedule=None, criteria=None, runs=10_000, seed=0, workers=1):
    """Run independent seeded projections and tabulate final eigen-clusters.

    Run ``i`` draws from ``default_rng([seed, i])`` so results do not depend
    on ``workers``.
    """
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    schedule = schedule or Schedule()
    criteria = criteria or ConvergenceCriteria()
    prop, sd = _prepare(h)
    if sd is None:
        sd = ExactPropagator(h).sd
    psi0 = check_state(psi0, sd.dim)
    clusters = cluster_spectrum(sd.eigenvalues)
    w0 = np.abs(sd.to_eigenbasis(psi0)) ** 2
    ideal = np.array([w0[list(idx)].sum() for idx in clusters])
    psi0_eig = sd.to_eigenbasis(psi0)

    n_chunks = max(1, min(runs, 4 * workers))
    chunks = [list(range(runs))[k::n_chunks] for k in range(n_chunks)]
    jobs = [(sd, clusters, psi0_eig, schedule, criteria, seed, c) for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for chunk in pool.map(_born_chunk, jobs) for r in chunk]
    else:
        results = [r for job in jobs for r in _born_chunk(job)]
    results.sort()

    counts = np.zeros(len(clusters), dtype=int)
    steps_by_cluster = {cid: [] for cid in range(len(clusters))}
    unconverged = trapped = 0
    for _, cid, steps, was_trapped in results:
        if cid < 0:
            unconverged += 1
            trapped += was_trapped
            continue
        counts[cid] += 1
        steps_by_cluster[cid].append(steps)
    total = counts.sum()
    freq = counts / total if total else np.zeros_like(ideal)
    tvd = 0.5 * float(np.abs(freq - ideal).sum())
    return BornStatistics(
        [float(np.mean(sd.eigenvalues[list(idx)])) for idx in clusters],
        ideal, counts, freq, tvd, runs, unconverged, trapped, steps_by_cluster,
    )
