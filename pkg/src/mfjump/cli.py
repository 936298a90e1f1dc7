"""Batch command line: simulate | approx | validate | uniqueness.

Every command is a pure function of (scenario bytes, flags, seed): outputs
carry no timestamps, JSON keys are sorted, floats are written with repr, and
ensemble reductions run in fixed path order, so reruns are byte-identical at
any parallelism degree.

Exit codes: 0 success, 1 validation failure, 2 numeric failure, 3 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .approx import (check_monotone, hierarchy_refinement_study,
                     moment_bound_check, run_hierarchy_ensemble)
from .noise import make_batch
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import NumericsError, SchemeConfig, solve_batch
from .system import run_ensemble
from .uniqueness import TestFunctionFamily, refinement_study
from .validate import SamplingPlan, validate_system

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mfjump", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None,
                       help="output directory (default $MFJUMP_OUT or ./mfjump-out)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes (results are jobs-independent)")
        p.add_argument("--dt", type=float, default=None,
                       help="override the scenario grid resolution")

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of the system")
    common(p)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--dump-paths", type=int, default=100,
                   help="trajectories written to paths.csv (aggregates cover all)")

    p = sub.add_parser("approx", help="monotone approximation hierarchy")
    common(p)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--levels", type=int, default=6, help="highest level n_max")
    p.add_argument("--mode", choices=("realized", "nested-mc", "deterministic"),
                   default="realized")
    p.add_argument("--inner", type=int, default=8, help="nested-mc branch count")
    p.add_argument("--refinements", type=int, default=1,
                   help="repeat with halved steps this many times")

    p = sub.add_parser("validate", help="run the coefficient assumption validators")
    common(p)
    p.add_argument("--budget", type=int, default=400, help="sample budget")

    p = sub.add_parser("uniqueness", help="shared-noise refinement diagnostic")
    common(p)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--levels", type=int, default=3, help="refinement rung count")
    p.add_argument("--phi-k", type=int, nargs="*", default=[2, 4],
                   help="test-function indices for the phi-moment curves")

    return parser


def _out_dir(args) -> str:
    out = args.out or os.environ.get("MFJUMP_OUT") or "mfjump-out"
    os.makedirs(out, exist_ok=True)
    return out


def _steps(scenario: Scenario, args) -> int:
    if args.dt is None:
        return scenario.grid_steps
    steps = round(scenario.horizon / args.dt)
    if steps < 1 or not np.isclose(steps * args.dt, scenario.horizon):
        raise ScenarioError(f"--dt {args.dt} does not tile the horizon "
                            f"{scenario.horizon}")
    return steps


def _seed(scenario: Scenario, args) -> int:
    if args.seed is not None:
        return args.seed
    return scenario.seed if scenario.seed is not None else 0


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.paths < 1:
        raise ScenarioError("--paths must be at least 1")
    out = _out_dir(args)
    seed = _seed(scenario, args)
    grid = scenario.grid(_steps(scenario, args))
    cfg = SchemeConfig()
    spec = scenario.system

    result = run_ensemble(spec, cfg, grid, args.paths, seed, jobs=args.jobs)
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    quants = result.quantiles(qs)

    with open(os.path.join(out, "aggregate.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["time", "component", "mean", "se"])
        for i in range(spec.n):
            for j, t in enumerate(grid.points):
                w.writerow([repr(float(t)), str(i),
                            repr(float(result.mean[i, j])), repr(float(result.se[i, j]))])
        for j, t in enumerate(grid.points):
            w.writerow([repr(float(t)), "average",
                        repr(float(result.avg_mean[j])), repr(float(result.avg_se[j]))])

    dump = min(args.dump_paths, args.paths)
    with open(os.path.join(out, "paths.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["path_id", "component", "time", "value"])
        if dump > 0:
            batch = make_batch(grid, spec.noise_layout(), seed, range(dump))
            res = solve_batch(spec.components, spec.drifts, batch, cfg,
                              initial=spec.initial[:, None])
            for p in range(dump):
                for i in range(spec.n):
                    for t, v in zip(grid.points, res.values[i, p]):
                        w.writerow([str(p), str(i), repr(float(t)), repr(float(v))])

    summary = {
        "name": scenario.name,
        "seed": seed,
        "n_paths": args.paths,
        "grid_steps": grid.n_steps,
        "horizon": scenario.horizon,
        "integral_mean": [float(v) for v in result.integral_mean],
        "integral_se": [float(v) for v in result.integral_se],
        "section_times": [float(t) for t in result.section_times],
        "section_mean": [[float(result.section_values[:, i, s].mean())
                          for s in range(result.section_times.size)]
                         for i in range(spec.n)],
        "section_quantiles": {str(q): [[float(quants[qi, i, s])
                                        for s in range(result.section_times.size)]
                                       for i in range(spec.n)]
                              for qi, q in enumerate(qs)},
        "average_mean_start": float(result.avg_mean[0]),
        "average_mean_end": float(result.avg_mean[-1]),
        "warnings": result.warnings,
        "scenario": scenario.raw,
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    print(f"simulate: {args.paths} paths, {grid.n_steps} steps -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    plan = SamplingPlan(budget=args.budget)
    reports = validate_system(scenario.system, plan)
    payload = []
    failed = False
    for report in reports:
        payload.append({
            "subject": report.subject,
            "passed": report.passed,
            "conditions": [{
                "name": c.name, "status": c.status, "detail": c.detail,
                "witness": None if c.witness is None else repr(c.witness),
            } for c in report.conditions],
        })
        failed = failed or not report.passed
        for line in report.lines():
            print(line)
    _write_json(os.path.join(out, "validation.json"), payload)
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_approx(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    seed = _seed(scenario, args)
    cfg = SchemeConfig()
    spec = scenario.system
    base_steps = _steps(scenario, args)
    if base_steps & (base_steps - 1):
        raise ScenarioError("approx needs a power-of-two step count so dyadic "
                            "partitions land on grid points")
    mode = args.mode
    if scenario.deterministic_drift and mode == "realized":
        mode = "deterministic"

    a_bar = max(c.a for c in spec.components)
    growth_b = max(d.growth_bound for d in spec.drifts)
    growth_l = max(d.growth_slope for d in spec.drifts)
    k_const = max(c.growth_k for c in spec.components)

    grid = scenario.grid(base_steps)
    hier = run_hierarchy_ensemble(spec, cfg, grid, args.paths, seed,
                                  args.levels, mode=mode, n_inner=args.inner,
                                  jobs=args.jobs)
    mono = check_monotone(hier.levels)
    bound = moment_bound_check(hier.levels, grid, a_bar, growth_b, growth_l,
                               k_const)
    refinement_rows = []
    if args.refinements > 1:
        ladder = [base_steps * 2 ** r for r in range(args.refinements)]
        refinement_rows = hierarchy_refinement_study(
            spec, cfg, scenario.horizon, ladder, args.paths, seed, args.levels,
            mode=mode, n_inner=args.inner, jobs=args.jobs)

    with open(os.path.join(out, "level_gaps.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["steps", "level_from", "level_to", "mean_sup_gap", "max_sup_gap"])
        for li, pair_gap in enumerate(hier.sup_gaps):
            w.writerow([str(grid.n_steps), str(li + 1), str(li + 2),
                        repr(float(pair_gap.mean())), repr(float(pair_gap.max()))])

    with open(os.path.join(out, "monotonicity.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["steps", "level_from", "level_to",
                    "max_violation", "violating_fraction"])
        for row in mono:
            w.writerow([str(grid.n_steps), str(row.level_from), str(row.level_to),
                        repr(row.max_violation), repr(row.violating_fraction)])

    with open(os.path.join(out, "refinements.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["steps", "dt", "max_violation", "mean_sup_violation",
                    "violating_fraction", "cauchy_gap"])
        for row in refinement_rows:
            w.writerow([str(row.steps), repr(row.dt), repr(row.max_violation),
                        repr(row.mean_sup_violation), repr(row.violating_fraction),
                        repr(row.cauchy_gap)])

    with open(os.path.join(out, "moment_bound.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["time", "level", "sup_mean", "envelope"])
        for li in range(bound.sup_mean.shape[0]):
            for j, t in enumerate(bound.curve_times):
                w.writerow([repr(float(t)), str(li + 1),
                            repr(float(bound.sup_mean[li, j])),
                            repr(float(bound.envelope[j]))])

    report = {
        "mode_requested": args.mode,
        "mode_used": hier.mode,
        "levels": args.levels,
        "paths": args.paths,
        "seed": seed,
        "steps": grid.n_steps,
        "constants": {"a_bar": a_bar, "B": growth_b, "L": growth_l,
                      "K": k_const, "K_provenance": "declared"},
        "cauchy_gap": hier.cauchy_gap(),
        "monotonicity": [{
            "level_from": m.level_from, "level_to": m.level_to,
            "max_violation": m.max_violation,
            "violating_fraction": m.violating_fraction} for m in mono],
        "moment_bound": {
            "M": bound.m_const, "B_prime": bound.b_prime,
            "L_prime": bound.l_prime, "K": bound.k_const,
            "passed": bound.passed, "max_violation": bound.max_violation},
        "refinements": [{
            "steps": r.steps, "dt": r.dt, "max_violation": r.max_violation,
            "mean_sup_violation": r.mean_sup_violation,
            "violating_fraction": r.violating_fraction,
            "cauchy_gap": r.cauchy_gap} for r in refinement_rows],
    }
    _write_json(os.path.join(out, "approx_report.json"), report)
    print(f"approx: mode={report['mode_used']} levels={args.levels} -> {out}")
    return EXIT_OK


def cmd_uniqueness(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args)
    seed = _seed(scenario, args)
    cfg = SchemeConfig()
    spec = scenario.system
    base_steps = _steps(scenario, args)
    ladder = [base_steps * 2 ** r for r in range(args.levels)]

    phi_ks = tuple(sorted(set(args.phi_k))) if args.phi_k else ()
    family = None
    if phi_ks:
        family = TestFunctionFamily(rho=spec.components[0].rho, x_m=scenario.x_m,
                                    k_max=max(phi_ks))
    report = refinement_study(spec, cfg, scenario.horizon, ladder, args.paths,
                              seed, family=family, phi_ks=phi_ks)

    with open(os.path.join(out, "divergence.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        header = ["steps", "dt", "mean_sup_diff", "mean_sup_diff_se",
                  "mean_abs_terminal"] + [f"phi_moment_k{k}" for k in phi_ks]
        w.writerow(header)
        for row in report.rows:
            cells = [str(row.steps_coarse), repr(row.dt_coarse),
                     repr(row.mean_sup_diff), repr(row.mean_sup_diff_se),
                     repr(row.mean_abs_terminal)]
            cells += [repr(row.phi_moments[k]) for k in phi_ks]
            w.writerow(cells)

    with open(os.path.join(out, "ak_table.csv"), "w", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["k", "a_k"])
        for k, a in enumerate(report.a_seq):
            w.writerow([str(k), repr(float(a))])

    _write_json(os.path.join(out, "uniqueness_report.json"), {
        "seed": seed,
        "paths": args.paths,
        "ladder_steps": ladder,
        "x_m": scenario.x_m,
        "strictly_decreasing": report.strictly_decreasing(),
        "rows": [{
            "steps": r.steps_coarse, "dt": r.dt_coarse,
            "mean_sup_diff": r.mean_sup_diff,
            "mean_sup_diff_se": r.mean_sup_diff_se,
            "phi_moments": {str(k): v for k, v in r.phi_moments.items()},
        } for r in report.rows],
    })
    print(f"uniqueness: ladder={ladder} decreasing="
          f"{report.strictly_decreasing()} -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "approx": cmd_approx,
                "validate": cmd_validate, "uniqueness": cmd_uniqueness}
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
