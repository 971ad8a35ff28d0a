"""Batch driver: one config file describes one experiment and its sweeps."""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .baseline import local_dynamics_entry, local_thermal_entry, thermal_entry_bound
from .block_encoding import dilate, extract_block, resource_report
from .chebyshev import fermi_dirac_approx
from .clock import (
    average_target,
    best_time,
    gap_lower_bound,
    hopping_chain,
    parse_gate_file,
    randomized_time_average,
    build_clock_hamiltonian,
    theorem1_instance,
)
from .config import ConfigError, ExperimentConfig, parse_config, parse_entries
from .correlation import exact_reference, greens_fourier, thermal_correlation, time_evolved_correlation
from .estimation import (
    estimate_energy_density,
    estimate_entry,
    exact_free_energy_density,
    free_energy_density,
    particle_density,
    term_values,
)
from .oracles import (
    OracleTuple,
    build_fermi_sea,
    build_margulis,
    build_tight_binding,
    chain_spec,
    materialize,
)


@dataclass
class Plan:
    """Header schema plus one task per sweep point, in sweep order."""

    fields: list[str]
    complex_fields: set[str] = field(default_factory=set)
    tasks: list[Callable[[int], tuple[list[dict], list[str], list[str]]]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def csv_header(fields, complex_fields=()) -> list[str]:
    out = []
    for f in fields:
        out.extend([f"{f}_re", f"{f}_im"] if f in complex_fields else [f])
    return out


def emit_csv(rows, path, fields, complex_fields=(), truncated: str | None = None) -> None:
    """Write rows with a header; complex fields become ``_re``/``_im`` columns.

    Floats use ``repr`` so reruns are byte-identical. A ``# TRUNCATED`` line
    marks output cut short by an error.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(csv_header(fields, complex_fields))
        for row in rows:
            out = []
            for f in fields:
                v = row.get(f)
                if f in complex_fields:
                    z = complex(v) if v is not None else complex("nan")
                    out.extend([_fmt(z.real), _fmt(z.imag)])
                else:
                    out.append(_fmt(v))
            w.writerow(out)
        if truncated is not None:
            fh.write(f"# TRUNCATED: {' '.join(truncated.split())}\r\n")


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def build_model(cfg: ExperimentConfig) -> OracleTuple:
    m = cfg.model
    kind = m.get("type")
    if kind == "chain":
        return build_tight_binding(chain_spec(m["length"], m["hop"], boundary=m["boundary"]))
    if kind == "lattice":
        return build_tight_binding(m["spec"])
    if kind == "margulis":
        return build_margulis(m["N"])
    if kind == "fermi-sea":
        return build_fermi_sea(m["n"], m["fill"])
    if kind == "clock":
        return build_clock_hamiltonian(parse_gate_file(m["gate_text"]))
    raise ValueError("experiment needs a model")


def _site_projector(cfg: ExperimentConfig, dim: int) -> np.ndarray:
    sites = [int(v) for v in str(cfg.get("m0_sites", "0")).replace(",", " ").split()]
    M0 = np.zeros((dim, dim), dtype=complex)
    for k in sites:
        M0[k, k] = 1.0
    return M0


def _read(be, i, j, cfg, seed):
    """Entry of ``alpha * block``: exact read or Hadamard-test estimate."""
    if cfg.get("estimator") == "hadamard":
        est = estimate_entry(be, i, j, cfg.get("eps2"), cfg.get("delta"), seed)
        return est.value, est.error_bound, est.samples
    return complex(be.alpha * be.top_block[i, j]), be.eps, 0


def _resources(label: str, be) -> list[str]:
    lines = [f"{label}:"] + ["  " + ln for ln in resource_report(be).splitlines()]
    if "call_formula" in be.meta:
        lines.append(f"  oracle_call_formula = {be.meta['call_formula']}")
    return lines


# ---------------------------------------------------------------------------
# Experiment plans
# ---------------------------------------------------------------------------


ENTRY_FIELDS = ["i", "j", "value", "exact", "eps_declared", "deviation", "samples", "within"]


def _entry_rows(be, ref, entries, cfg, seed, prefix: dict) -> list[dict]:
    rows = []
    ss = np.random.SeedSequence(seed).generate_state(len(entries))
    for (i, j), s in zip(entries, ss):
        value, bound, samples = _read(be, i, j, cfg, int(s))
        dev = float(abs(value - ref[i, j]))
        rows.append({**prefix, "i": i, "j": j, "value": value, "exact": complex(ref[i, j]),
                     "eps_declared": bound, "deviation": dev, "samples": samples,
                     "within": dev <= bound})
    return rows


def plan_thermal(cfg, o):
    h = materialize(o)
    entries = parse_entries(cfg.get("entries"), ((0, 0), (0, 1)))
    plan = Plan(["beta", "degree"] + ENTRY_FIELDS, {"value", "exact"})
    for beta in cfg.sweep("beta"):
        def task(seed, beta=beta):
            be = thermal_correlation(o, beta, cfg.get("degree"), eps_PA=cfg.get("eps_pa"))
            ref = exact_reference(h, "thermal", beta=beta)
            d = be.meta["degree"]
            rows = _entry_rows(be, ref, entries, cfg, seed, {"beta": beta, "degree": d})
            note = [f"beta={beta!r}: degree {d}, declared eps_Tot (alpha=4) {be.eps!r}, "
                    f"max deviation {max(r['deviation'] for r in rows)!r}"]
            return rows, note, _resources(f"thermal beta={beta!r}", be)
        plan.tasks.append(task)
    return plan


def plan_dynamics(cfg, o):
    h = materialize(o)
    M0 = _site_projector(cfg, o.dim)
    be_M0 = dilate(M0)
    entries = parse_entries(cfg.get("entries"), ((0, 0),))
    if cfg.get("t") is not None:
        times = [(t, t) for t in cfg.sweep("t")]
    else:
        times = list(itertools.product(cfg.sweep("t1", [0.0]), cfg.sweep("t2", [0.0])))
    plan = Plan(["t1", "t2", "trace"] + ENTRY_FIELDS, {"value", "exact"})
    for t1, t2 in times:
        def task(seed, t1=t1, t2=t2):
            be = time_evolved_correlation(o, be_M0, t1, t2)
            ref = exact_reference(h, "evolved", M0=M0, t1=t1, t2=t2)
            tr = float(np.trace(extract_block(be)).real)
            rows = _entry_rows(be, ref, entries, cfg, seed, {"t1": t1, "t2": t2, "trace": tr})
            note = [f"t1={t1!r} t2={t2!r}: trace {tr!r} vs {float(np.trace(M0).real)!r}"]
            return rows, note, _resources(f"evolved t1={t1!r} t2={t2!r}", be)
        plan.tasks.append(task)
    return plan


def plan_greens(cfg, o):
    h = materialize(o)
    entries = parse_entries(cfg.get("entries"), ((0, 0), (0, 1)))
    plan = Plan(["beta", "eta", "omega", "degree"] + ENTRY_FIELDS, {"value", "exact"})
    grid = itertools.product(cfg.sweep("beta"), cfg.sweep("eta"), cfg.sweep("omega", [0.0]))
    for beta, eta, omega in grid:
        def task(seed, beta=beta, eta=eta, omega=omega):
            be = greens_fourier(o, beta, eta, omega, cfg.get("degree"), eps_PA=cfg.get("eps_pa"))
            ref = exact_reference(h, "greens", beta=beta, eta=eta, omega=omega)
            prefix = {"beta": beta, "eta": eta, "omega": omega, "degree": be.meta["degree"]}
            rows = _entry_rows(be, ref, entries, cfg, seed, prefix)
            b = be.meta["budget"]
            note = [f"beta={beta!r} eta={eta!r} omega={omega!r}: eps_PA {b['eps_PA']!r} + "
                    f"eps_ph {b['eps_ph']!r} + delta {b['delta_qsvt']!r}, physical {be.eps!r}"]
            return rows, note, _resources(f"greens beta={beta!r} eta={eta!r} omega={omega!r}", be)
        plan.tasks.append(task)
    return plan


def plan_energy(cfg, o):
    h = materialize(o)
    eps, delta = cfg.get("eps", 0.05), cfg.get("delta")
    plan = Plan(["beta", "estimate", "exact", "eps", "delta", "samples", "terms", "deviation", "within"])
    for beta in cfg.sweep("beta"):
        def task(seed, beta=beta):
            be = thermal_correlation(o, beta, cfg.get("degree"), eps_PA=cfg.get("eps_pa", 2.5e-3))
            est = estimate_energy_density(be, o, eps, delta, seed)
            _, vals = term_values(o, exact_reference(h, "thermal", beta=beta))
            exact = float(np.mean(vals))
            dev = float(abs(est.value - exact))
            row = {"beta": beta, "estimate": est.value, "exact": exact, "eps": eps, "delta": delta,
                   "samples": est.samples, "terms": len(vals), "deviation": dev, "within": dev <= eps}
            return [row], [f"beta={beta!r}: {est.samples} sampled terms of {len(vals)}"], \
                _resources(f"thermal beta={beta!r}", be)
        plan.tasks.append(task)
    return plan


def plan_particle(cfg, o):
    h = materialize(o)
    samples, delta = cfg.get("samples", 1000), cfg.get("delta")
    tol = math.sqrt(math.log(2 / delta) / (2 * samples))
    plan = Plan(["beta", "estimate", "exact", "tolerance", "samples", "deviation", "within"])
    for beta in cfg.sweep("beta", [1.0]):
        def task(seed, beta=beta):
            if o.label.startswith("fermi-sea") or o.label == "diagonal":
                be = dilate(h)
                exact = float(np.trace(h).real / o.dim)
            else:
                be = thermal_correlation(o, beta, cfg.get("degree"), eps_PA=cfg.get("eps_pa", 2.5e-3))
                exact = float(np.trace(exact_reference(h, "thermal", beta=beta)).real / o.dim)
            est = particle_density(be, samples, seed)
            dev = float(abs(est - exact))
            row = {"beta": beta, "estimate": est, "exact": exact, "tolerance": tol,
                   "samples": samples, "deviation": dev, "within": dev <= tol + be.eps}
            return [row], [f"beta={beta!r}: density {est!r} (exact {exact!r})"], []
        plan.tasks.append(task)
    return plan


def plan_free_energy(cfg, o):
    h = materialize(o)
    d, samples, delta = cfg.get("degree", 200), cfg.get("samples", 1000), cfg.get("delta")
    plan = Plan(["beta", "degree", "estimate", "exact", "eps1", "eps2", "deviation", "within"])
    for beta in cfg.sweep("beta", [1.0]):
        def task(seed, beta=beta):
            est = free_energy_density(o, beta, d, samples, seed, delta=delta)
            exact = exact_free_energy_density(h, beta)
            dev = float(abs(est.value - exact))
            row = {"beta": beta, "degree": d, "estimate": est.value, "exact": exact, "eps1": est.eps1,
                   "eps2": est.eps2, "deviation": dev, "within": dev <= est.error_bound}
            return [row], [f"beta={beta!r}: F/N {est.value!r} (exact {exact!r})"], []
        plan.tasks.append(task)
    return plan


def plan_clock_overlap(cfg, o):
    plan = Plan(["L", "time_average", "target", "tolerance", "best_t", "best_overlap",
                 "overlap_threshold", "min_gap", "gap_bound", "within"])
    for L in cfg.sweep("L", [15]):
        def task(seed, L=L):
            avg = randomized_time_average(L)
            target, tol = average_target(L), 1 / (2 * (L + 2))
            t_best, best = best_time(L)
            gap = hopping_chain(L).min_gap
            row = {"L": L, "time_average": avg, "target": target, "tolerance": tol, "best_t": t_best,
                   "best_overlap": best, "overlap_threshold": tol, "min_gap": gap,
                   "gap_bound": gap_lower_bound(L), "within": abs(avg - target) <= tol and best >= tol}
            note = [f"L={L}: max overlap {best!r} at t={t_best!r}; time average {avg!r}; "
                    f"reference 3/(2(L+2)) = {target!r}"]
            return [row], note, []
        plan.tasks.append(task)
    return plan


def plan_theorem1(cfg, o):
    gates = parse_gate_file(cfg.model["gate_text"])
    plan = Plan(["t", "estimate", "exact", "overlap", "yes_threshold", "no_threshold", "decision",
                 "error_bound", "within"], {"estimate"})
    for t in cfg.sweep("t", [1.0]):
        def task(seed, t=t):
            r = theorem1_instance(gates, t, cfg.get("eps2"), cfg.get("delta"), seed)
            dev = float(abs(r.estimate.value - r.exact))
            row = {"t": t, "estimate": r.estimate.value, "exact": r.exact, "overlap": r.overlap,
                   "yes_threshold": r.yes_threshold, "no_threshold": r.no_threshold,
                   "decision": r.decision, "error_bound": r.estimate.error_bound,
                   "within": dev <= r.estimate.error_bound}
            return [row], [f"t={t!r}: p={r.exact!r}, decision {r.decision}"], []
        plan.tasks.append(task)
    return plan


def plan_baseline(cfg, o):
    h = materialize(o)
    entries = parse_entries(cfg.get("entries"), ((0, 0), (0, 1)))
    K = cfg.get("K", 200)
    plan = Plan(["method", "beta", "t", "i", "j", "estimate", "exact", "error", "declared_bound",
                 "work"], {"estimate", "exact"})
    for beta in cfg.sweep("beta", [1.0]):
        def task(seed, beta=beta):
            ref = exact_reference(h, "thermal", beta=beta)
            be = thermal_correlation(o, beta, cfg.get("degree"), eps_PA=cfg.get("eps_pa", 2.5e-3))
            rows = []
            for i, j in entries:
                q = complex(be.alpha * be.top_block[i, j])
                rows.append({"method": "quantum-pipeline", "beta": beta, "t": 0.0, "i": i, "j": j,
                             "estimate": q, "exact": complex(ref[i, j]), "error": abs(q - ref[i, j]),
                             "declared_bound": be.eps, "work": be.meta["degree"]})
                v, work = local_thermal_entry(o, beta, i, j, K, with_work=True)
                rows.append({"method": "classical-local", "beta": beta, "t": 0.0, "i": i, "j": j,
                             "estimate": v, "exact": complex(ref[i, j]), "error": abs(v - ref[i, j]),
                             "declared_bound": thermal_entry_bound(beta, o.norm_bound, K), "work": work})
            return rows, [f"beta={beta!r}: K={K}, quantum degree {be.meta['degree']}"], \
                _resources(f"thermal beta={beta!r}", be)
        plan.tasks.append(task)
    if cfg.get("t") is not None:
        M0 = _site_projector(cfg, o.dim)
        Kt = cfg.get("K_time", 60)
        for t in cfg.sweep("t"):
            def dyn(seed, t=t):
                ref = exact_reference(h, "evolved", M0=M0, t1=t, t2=t)
                rows = []
                for i, j in entries:
                    v, work = local_dynamics_entry(o, lambda k, l: M0[k, l], t, i, j, Kt, with_work=True)
                    rows.append({"method": "classical-local", "beta": "", "t": t, "i": i, "j": j,
                                 "estimate": v, "exact": complex(ref[i, j]),
                                 "error": abs(v - ref[i, j]), "declared_bound": "", "work": work})
                return rows, [f"t={t!r}: Taylor order {Kt}"], []
            plan.tasks.append(dyn)
    return plan


def plan_approx_bound(cfg, o):
    plan = Plan(["c", "d", "measured", "certified", "bernstein", "within"])
    for c, d in itertools.product(cfg.sweep("c", [4.0, 8.0]), cfg.sweep("d", [500, 2000])):
        def task(seed, c=c, d=d):
            a = fermi_dirac_approx(c, d)
            err = a.grid_error()
            row = {"c": c, "d": d, "measured": err, "certified": a.certified_bound,
                   "bernstein": a.target.get("bernstein", 0.0), "within": err <= a.certified_bound}
            return [row], [f"c={c!r} d={d}: measured {err!r} <= certified {a.certified_bound!r}"], []
        plan.tasks.append(task)
    return plan


PLANS = {
    "thermal-entry": plan_thermal,
    "dynamics-entry": plan_dynamics,
    "greens": plan_greens,
    "energy-density": plan_energy,
    "particle-density": plan_particle,
    "free-energy": plan_free_energy,
    "clock-overlap": plan_clock_overlap,
    "theorem1-demo": plan_theorem1,
    "baseline-compare": plan_baseline,
    "approx-bound": plan_approx_bound,
}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _task_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path = ".", jobs: int = 1) -> int:
    """Run every sweep point, then write the CSV and report in sweep order.

    Returns 0 on success and 1 if any point failed; rows computed before the
    first failure are kept and the CSV ends with a truncation marker.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    notes: list[str] = []
    resources: list[str] = []
    failure = None
    plan = Plan([])
    try:
        o = None if cfg.command in ("clock-overlap", "approx-bound") and not cfg.model else build_model(cfg)
        plan = PLANS[cfg.command](cfg, o)
        seeds = _task_seeds(cfg.seed, len(plan.tasks))

        def guarded(k):
            try:
                return plan.tasks[k](seeds[k]), None
            except Exception as exc:  # reported per point, merged in order
                return None, f"{type(exc).__name__}: {exc}"

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(guarded, range(len(plan.tasks))))
        else:
            results = []
            for k in range(len(plan.tasks)):
                results.append(guarded(k))
                if results[-1][1] is not None:
                    break
        for res, err in results:
            if err is not None:
                failure = err
                break
            r, n, rc = res
            rows.extend(r)
            notes.extend(n)
            resources.extend(rc)
    except Exception as exc:
        failure = f"{type(exc).__name__}: {exc}"

    emit_csv(rows, out / cfg.csv, plan.fields, plan.complex_fields, truncated=failure)
    report = [
        "fermiblock experiment report",
        f"command: {cfg.command}",
        f"seed: {cfg.seed}",
        f"rows: {len(rows)}",
        "",
        "[declared vs measured]",
        *notes,
        "",
        "[resource formulas, informational only; not desk-scale costs]",
        *(resources or ["(none)"]),
    ]
    if failure:
        report += ["", "[error]", failure]
    (out / cfg.report).write_text("\n".join(report) + "\n", encoding="utf-8")
    if failure:
        print(f"fermiblock: {failure}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fermiblock", description="Run a free-fermion block-encoding experiment.")
    parser.add_argument("config", help="experiment config file")
    parser.add_argument("--output-dir", default=".", help="directory for CSV and report (default: .)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    args = parser.parse_args(argv)
    path = Path(args.config)
    try:
        cfg = parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
    except OSError as exc:
        print(f"fermiblock: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for e in exc.errors:
            print(f"fermiblock: config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    return run_experiment(cfg, args.output_dir, max(1, args.jobs))


if __name__ == "__main__":
    sys.exit(main())
