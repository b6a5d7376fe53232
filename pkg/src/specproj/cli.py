"""Command-line entry point: ``specproj <command> [--config PATH] ...``.

Exit status: 0 converged / completed, 2 unconverged, 1 configuration error.
"""

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as cfgmod
from .annealer import AnnealPlan, anneal, fig9_schedule, ground_cluster, level_curves, uniform_grid
from .hamiltonians import build_model, build_tfi, neel_x_state, product_state, split_even_odd
from .imagtime import consecutive_one_statistics, r_sequence
from .io import write_csv, write_json
from .linalg import eigendecompose, to_dense
from .noise import NoiseSpec, noisy_projection
from .projector import (
    ConvergenceCriteria, IncompleteSpectrumError, Schedule, born_statistics, exhaust_spectrum, make_schedule,
    run_projection,
)
from .trotter import formula_by_label, formula_errors, measure_formula_order
from .validation import ConfigError, PreconditionError, ShapeError

EXIT_OK, EXIT_CONFIG, EXIT_UNCONVERGED = 0, 1, 2
TRACE_COLUMNS = ("step", "bit", "p0", "energy", "variance", "dt", "phi")
EXPECTED_ORDERS = {"strang2": (3.0, 0.3), "yoshida4": (5.0, 0.5)}


def build_system(cfg):
    m = cfg.section("model")
    h, psi = build_model(m.name, m.nq, m.g, m.r, m.seed, m.dim)
    st = cfg.section("state")
    d = to_dense(h).shape[0] if m.name in ("h5", "random") else 2**m.nq
    if st.kind == "basis":
        if not 0 <= st.index < d:
            raise ConfigError(f"[state] index must lie in [0, {d})")
        psi = np.zeros(d, dtype=np.complex128)
        psi[st.index] = 1.0
    elif st.kind == "product":
        if m.name not in ("tfi", "xzy"):
            raise ConfigError("[state] product needs a qubit model")
        try:
            psi = product_state(m.nq, st.letters)
        except ValueError as exc:
            raise ConfigError(f"[state] {exc}") from None
    elif st.kind == "neel_x":
        psi = neel_x_state(m.nq)
    elif st.kind != "default":
        raise ConfigError(f"[state] unknown kind {st.kind!r}")
    return h, psi


def build_schedule(cfg, default=None):
    if cfg.schedule is None and default is not None:
        return default
    s = cfg.section("schedule")
    return make_schedule(s.kind, s.dt, s.phi, s.phi_set, s.dt_list, s.repeats, s.ancilla_magnitude, s.recycle,
                         s.dt_jitter)


def build_criteria(cfg):
    c = cfg.section("criteria")
    return ConvergenceCriteria(c.variance_threshold, c.max_steps)


def build_noise(cfg):
    n = cfg.section("noise")
    return NoiseSpec(n.epsilon, n.period, n.first_strike, n.last_strike)


def _out(cfg, name):
    return os.path.join(cfg.run.out, name)


def cmd_project(cfg):
    h, psi = build_system(cfg)
    sched, crit = build_schedule(cfg), build_criteria(cfg)
    res = run_projection(psi, h, sched, crit, np.random.default_rng(cfg.run.seed))
    tr = res.trace
    write_csv(_out(cfg, "trace.csv"), TRACE_COLUMNS, tr.rows())
    write_json(_out(cfg, "summary.json"), {
        "command": "project",
        "model": cfg.section("model").name,
        "seed": cfg.run.seed,
        "converged": tr.converged,
        "trapped": tr.trapped,
        "steps": tr.steps,
        "initial_energy": tr.initial_energy,
        "initial_variance": tr.initial_variance,
        "final_energy": float(tr.energy[-1]) if tr.steps else None,
        "final_variance": float(tr.variance[-1]) if tr.steps else None,
        "eigen_index": res.eigen_index,
        "eigen_value": res.eigen_value,
        "cluster_weight": res.cluster_weight,
    })
    if cfg.run.plot and tr.steps:
        from .plots import line_plot

        steps = np.arange(1, tr.steps + 1)
        line_plot(_out(cfg, "energy.svg"), steps, [tr.energy], "step", "energy")
        line_plot(_out(cfg, "variance.svg"), steps, [np.maximum(tr.variance, 1e-300)], "step", "variance", logy=True)
    return EXIT_OK if tr.converged else EXIT_UNCONVERGED


def cmd_born(cfg):
    h, psi = build_system(cfg)
    runs = cfg.section("born").runs
    stats = born_statistics(h, psi, build_schedule(cfg), build_criteria(cfg), runs, cfg.run.seed, cfg.run.workers)
    clusters = [
        {"cluster": k, "eigenvalue": e, "ideal": float(stats.ideal[k]), "frequency": float(stats.frequencies[k]),
         "count": int(stats.counts[k])}
        for k, e in enumerate(stats.cluster_values)
    ]
    write_json(_out(cfg, "born.json"), {
        "command": "born",
        "runs": stats.runs,
        "seed": cfg.run.seed,
        "converged": stats.runs - stats.unconverged,
        "unconverged": stats.unconverged,
        "trapped": stats.trapped,
        "tvd": stats.tvd,
        "clusters": clusters,
    })
    rows = []
    for cid, hist in stats.histogram().items():
        rows += [(cid, stats.cluster_values[cid], steps, n) for steps, n in sorted(hist.items())]
    write_csv(_out(cfg, "histogram.csv"), ("cluster", "eigenvalue", "steps", "count"), rows)
    if cfg.run.plot:
        from .plots import bar_plot

        bar_plot(_out(cfg, "born.svg"), [f"{e:.4f}" for e in stats.cluster_values],
                 [stats.ideal, stats.frequencies], ["ideal", "empirical"], "eigenvalue", "probability")
    return EXIT_OK if stats.unconverged == 0 else EXIT_UNCONVERGED


def anneal_plan(cfg):
    a = cfg.section("anneal")
    default = fig9_schedule() if a.model == "tfi" else Schedule()
    noise = build_noise(cfg) if cfg.noise is not None and cfg.noise.epsilon > 0 else None
    return AnnealPlan(a.model, a.nq, uniform_grid(a.dg), a.steps_per_g, build_schedule(cfg, default), a.initial,
                      a.propagator, a.r, noise)


def _anneal_one(args):
    plan, seed, i = args
    return anneal(plan, np.random.default_rng([seed, i]))


def cmd_anneal(cfg):
    plan = anneal_plan(cfg)
    reps = cfg.section("anneal").replicas
    if reps < 1:
        raise ConfigError("[anneal] replicas must be >= 1")
    jobs = [(plan, cfg.run.seed, i) for i in range(reps)]
    if cfg.run.workers > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.run.workers) as pool:
            traces = list(pool.map(_anneal_one, jobs))
    else:
        traces = [_anneal_one(j) for j in jobs]
    rows = [(i, r.g, r.energy, r.variance, r.steps) for i, t in enumerate(traces) for r in t.records]
    write_csv(_out(cfg, "anneal.csv"), ("replica", "g", "energy", "variance", "steps"), rows)

    summary = {"command": "anneal", "model": plan.model, "nq": plan.nq, "seed": cfg.run.seed,
               "propagator": traces[0].propagator, "formula_order": traces[0].formula_order,
               "fell_back": traces[0].fell_back}
    final_h = plan.hamiltonian(1.0)
    if plan.nq <= 12:
        lc = level_curves(plan.model, plan.nq, plan.r, plan.g_grid)
        summary["crossing"] = lc.crossing
        summary["min_gap"] = lc.min_gap
        header = ("g",) + tuple(f"level_{k}" for k in range(lc.levels.shape[1])) + ("even_ground", "odd_ground")
        write_csv(_out(cfg, "levels.csv"), header,
                  [(float(g),) + tuple(map(float, lv)) + tuple(map(float, sg))
                   for g, lv, sg in zip(lc.g, lc.levels, lc.sector_ground)])
        energies, basis = ground_cluster(final_h)
        summary["ground_energy"] = float(energies[0])
    replicas = []
    for t in traces:
        item = {"final_energy": t.records[-1].energy, "final_variance": t.records[-1].variance}
        if plan.nq <= 12:
            item["fidelity"] = float(np.sum(np.abs(basis.conj().T @ t.final_state) ** 2))
        replicas.append(item)
    summary["replicas"] = replicas
    write_json(_out(cfg, "summary.json"), summary)
    if cfg.run.plot:
        from .plots import line_plot

        g = traces[0].column("g")
        labels = [f"replica {i}" for i in range(reps)]
        line_plot(_out(cfg, "anneal_energy.svg"), g, [t.column("energy") for t in traces], "g", "energy",
                  labels=labels)
        line_plot(_out(cfg, "anneal_variance.svg"), g, [t.column("variance") for t in traces], "g", "variance",
                  labels=labels)
    return EXIT_OK


def cmd_noise(cfg):
    h, psi = build_system(cfg)
    n = cfg.section("noise")
    tr = noisy_projection(psi, h, build_schedule(cfg), build_criteria(cfg), build_noise(cfg),
                          np.random.default_rng(cfg.run.seed), n.stop_on_convergence, n.method)
    struck = set(tr.strikes)
    write_csv(_out(cfg, "trace.csv"), TRACE_COLUMNS + ("struck",),
              (row + (int(row[0] in struck),) for row in tr.rows()))
    tail = tr.variance[-50:]
    write_json(_out(cfg, "summary.json"), {
        "command": "noise",
        "method": n.method,
        "epsilon": n.epsilon,
        "seed": cfg.run.seed,
        "steps": tr.steps,
        "strikes": len(tr.strikes),
        "converged": tr.converged,
        "final_energy": float(tr.energy[-1]) if tr.steps else None,
        "final_variance": float(tr.variance[-1]) if tr.steps else None,
        "tail_median_variance": float(np.median(tail)) if tr.steps else None,
    })
    if cfg.run.plot and tr.steps:
        from .plots import line_plot

        line_plot(_out(cfg, "variance.svg"), np.arange(1, tr.steps + 1), [np.maximum(tr.variance, 1e-300)],
                  "step", "variance", logy=True)
    return EXIT_OK if tr.converged else EXIT_UNCONVERGED


def cmd_imagtime(cfg):
    h, psi = build_system(cfg)
    p = cfg.section("imagtime")
    if not p.r1 > 0 or p.dt < 0:
        raise ConfigError("[imagtime] needs r1 > 0 and dt >= 0")
    st = consecutive_one_statistics(psi, h, p.dt, p.r1, p.trials, np.random.default_rng(cfg.run.seed), p.n_max)
    rs = r_sequence(p.r1, p.n_max + 1)
    write_csv(_out(cfg, "imagtime.csv"), ("n", "r_n", "empirical", "analytic", "stderr"),
              [(int(n), float(rs[n - 1]), float(e), float(a), float(s))
               for n, e, a, s in zip(st.n, st.empirical, st.analytic, st.stderr)])
    rate = st.decay_rate()
    write_json(_out(cfg, "summary.json"), {
        "command": "imagtime",
        "r1": p.r1,
        "dt": p.dt,
        "trials": p.trials,
        "seed": cfg.run.seed,
        "p_first_one": float(st.empirical[0]),
        "p_all_ones_final": float(st.empirical[-1]),
        "analytic_final": float(st.analytic[-1]),
        "decay_rate_final": float(rate[-1]),
        "r_final": float(rs[-1]),
    })
    if cfg.run.plot:
        from .plots import line_plot

        line_plot(_out(cfg, "r_sequence.svg"), np.arange(1, len(rs) + 1), [rs], "n", "r_n")
        line_plot(_out(cfg, "all_ones.svg"), st.n, [st.empirical, st.analytic], "n", "probability",
                  labels=["empirical", "r_{n+1}/r_1"])
    return EXIT_OK


def cmd_spectrum(cfg):
    h, psi = build_system(cfg)
    sd = eigendecompose(to_dense(h))
    try:
        found = exhaust_spectrum(sd, psi, build_schedule(cfg), build_criteria(cfg),
                                 np.random.default_rng(cfg.run.seed), cfg.section("spectrum").retry_budget)
        complete = True
    except IncompleteSpectrumError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        found, complete = [], False
    energies = sorted(e for e, _ in found)
    exact = sd.eigenvalues
    rows = [(k, e, float(exact[k])) for k, e in enumerate(energies)]
    write_csv(_out(cfg, "spectrum.csv"), ("index", "energy", "exact"), rows)
    write_json(_out(cfg, "summary.json"), {
        "command": "spectrum",
        "seed": cfg.run.seed,
        "complete": complete,
        "found": len(energies),
        "dim": sd.dim,
        "max_error": max((abs(e - x) for _, e, x in rows), default=None),
    })
    return EXIT_OK if complete else EXIT_UNCONVERGED


def cmd_validate_trotter(cfg):
    t = cfg.section("trotter")
    try:
        split = split_even_odd(build_tfi(t.nq, t.g))
        rows, report, ok = [], {}, True
        for label in t.formulas:
            formula = formula_by_label(label)
            errors = formula_errors(formula, split, t.dts)
            order = measure_formula_order(formula, split, t.dts)
            rows += [(label, float(dt), float(e)) for dt, e in zip(t.dts, errors)]
            entry = {"order": order}
            if label in EXPECTED_ORDERS:
                want, tol = EXPECTED_ORDERS[label]
                entry["expected"] = want
                entry["ok"] = bool(abs(order - want) <= tol)
                ok &= entry["ok"]
            else:
                entry["fallback"] = "yoshida4" if not order >= 2.0 else None
            report[label] = entry
    except ValueError as exc:
        raise ConfigError(f"[trotter] {exc}") from None
    write_csv(_out(cfg, "trotter.csv"), ("formula", "dt", "error"), rows)
    write_json(_out(cfg, "summary.json"), {"command": "validate-trotter", "nq": t.nq, "g": t.g, "formulas": report})
    if cfg.run.plot:
        from .plots import line_plot

        line_plot(_out(cfg, "trotter.svg"), list(t.dts),
                  [[e for f, _, e in rows if f == label] for label in t.formulas], "dt", "error", logy=True,
                  labels=list(t.formulas))
    return EXIT_OK if ok else EXIT_UNCONVERGED


COMMANDS = {
    "project": cmd_project,
    "born": cmd_born,
    "anneal": cmd_anneal,
    "noise": cmd_noise,
    "imagtime": cmd_imagtime,
    "spectrum": cmd_spectrum,
    "validate-trotter": cmd_validate_trotter,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="specproj", description="Spectral projection by ancilla measurements.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--seed", type=int, help="base seed (overrides [run] seed)")
        p.add_argument("--workers", type=int, help="worker processes (overrides [run] workers)")
        p.add_argument("--out", help="output directory (overrides [run] out)")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")
    return parser


def resolve_config(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    run = cfg.run
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out is not None:
        changes["out"] = args.out
    if args.plot:
        changes["plot"] = True
    run = dataclasses.replace(run, **changes)
    if run.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg.replace(run=run)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ShapeError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
