"""Command-line experiment harness.

Three subcommands:

``run``
    One scenario, one strategy; writes the solve report as JSON.
``sweep``
    Grid of uniform demands x strategies x seeds; writes one CSV row each.
``fit-bias``
    Fits per-cell selection biases to a saved joint solution and optionally
    re-runs the fixed-association minimization with them.

Exit codes: 0 success, 2 infeasible demand, 1 any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (BiasFitConfig, BiasVector, fit_biases,
                        fixed_assoc_minimize, re_associate, reuse1_minimize,
                        rsrp_from_gains)
from .energymin import SolveReport, minimize_energy
from .errors import HetsleepError
from .netmodel import CellKind, build_rate_table
from .oracle import exhaustive_min_power
from .scenario import Scenario, load_scenario

CSV_COLUMNS = ["scenario_id", "seed", "strategy", "demand_bps", "K", "P_tot_W",
               "n_active_cells", "n_active_patterns", "avg_serving_cells",
               "feasible", "outer_iters", "wall_ms"]
CSV_UNITS_COMMENT = ("# units: demand_bps in bit/s, P_tot_W in watts, wall_ms in "
                     "milliseconds; avg_serving_cells is association ones per point")


@dataclass
class RunOutcome:
    report: SolveReport
    strategy: str
    seed: int
    demand_bps: list[float]
    wall_ms: float
    oracle: dict | None = None


def _parse_fixed_re(strategy: str) -> float:
    try:
        return float(strategy.split(":", 1)[1])
    except (IndexError, ValueError):
        raise HetsleepError(
            f"strategy {strategy!r} must look like fixed-re:<pico bias dB>")


def execute_strategy(scn: Scenario, strategy: str, seed: int,
                     demand_override: float | None = None) -> RunOutcome:
    """End-to-end solve of one (scenario, strategy, seed) cell."""
    topo, points, gains = scn.realize(seed)
    radio = scn.radio()
    cfg = scn.solver_config()
    demand = np.array([p.demand_bps for p in points])
    if demand_override is not None:
        demand = np.full(len(points), float(demand_override))

    start = time.perf_counter()
    if strategy == "joint":
        patterns = scn.build_patterns(topo)
        rates = build_rate_table(topo, gains, radio, patterns)
        report = minimize_energy(topo, rates, demand, patterns, cfg, seed=seed)
    elif strategy == "reuse1":
        report = reuse1_minimize(topo, gains, radio, demand, cfg, seed=seed)
    elif strategy in ("feature", "clusters"):
        override = "feature" if strategy == "feature" else scn.doc.get("patterns")
        if strategy == "clusters" and not (isinstance(override, dict) and "clusters" in override):
            raise HetsleepError("strategy 'clusters' needs a cluster map in the scenario")
        patterns = scn.build_patterns(topo, override)
        rates = build_rate_table(topo, gains, radio, patterns)
        report = minimize_energy(topo, rates, demand, patterns, cfg, seed=seed)
    elif strategy.startswith("fixed-re"):
        pico_bias = _parse_fixed_re(strategy)
        patterns = scn.build_patterns(topo)
        rates = build_rate_table(topo, gains, radio, patterns)
        eta = BiasVector(np.array([0.0 if c.kind is CellKind.MACRO else pico_bias
                                   for c in topo.cells]))
        assoc = re_associate(rsrp_from_gains(topo, gains), eta)
        report = fixed_assoc_minimize(topo, rates, assoc, demand, patterns, cfg, seed=seed)
    else:
        raise HetsleepError(f"unknown strategy {strategy!r}")
    wall_ms = (time.perf_counter() - start) * 1000.0
    return RunOutcome(report, strategy, seed, demand.tolist(), wall_ms)


def _report_doc(scn: Scenario, outcome: RunOutcome) -> dict:
    return {
        "meta": {
            "scenario_id": scn.id,
            "strategy": outcome.strategy,
            "seed": outcome.seed,
            "version": __version__,
        },
        "demand_bps": outcome.demand_bps,
        "report": outcome.report.to_dict(),
        "oracle": outcome.oracle,
    }


def cmd_run(args) -> int:
    scn = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scn.base_seed
    outcome = execute_strategy(scn, args.strategy, seed)

    if args.oracle:
        topo, points, gains = scn.realize(seed)
        patterns = scn.build_patterns(topo)
        rates = build_rate_table(topo, gains, scn.radio(), patterns)
        demand = np.array(outcome.demand_bps)
        p_star, active = exhaustive_min_power(topo, rates, demand, patterns)
        outcome.oracle = {"p_tot": p_star, "active_cells": sorted(active)}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = f"{scn.id}_{args.strategy.replace(':', '-')}_{seed}.report.json"
    path = out_dir / name
    path.write_text(json.dumps(_report_doc(scn, outcome), indent=2, sort_keys=True) + "\n")

    rep = outcome.report
    print(f"scenario={scn.id} strategy={outcome.strategy} seed={seed}")
    print(f"feasible={rep.feasible} P_tot={rep.p_tot:.3f} W "
          f"active_cells={rep.active_cells} active_patterns={rep.n_active_patterns}")
    if outcome.oracle:
        gap = rep.p_tot - outcome.oracle["p_tot"]
        print(f"oracle P_tot={outcome.oracle['p_tot']:.3f} W gap={gap:+.3e} W")
    print(f"report -> {path}")
    return 0 if rep.feasible else 2


def _parse_grid(spec: str) -> list[float]:
    try:
        lo, hi, steps = spec.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise HetsleepError("--sweep-demands must be lo:hi:steps")
    if steps < 1 or hi < lo:
        raise HetsleepError("--sweep-demands must have steps >= 1 and hi >= lo")
    if steps == 1:
        return [lo]
    return list(np.linspace(lo, hi, steps))


def cmd_sweep(args) -> int:
    scn = load_scenario(args.scenario)
    grid = _parse_grid(args.sweep_demands)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise HetsleepError("need at least one strategy")
    seeds = [scn.base_seed + s for s in range(args.seeds)]

    rows = []
    for demand in grid:
        for strategy in strategies:
            for seed in seeds:
                row = {"scenario_id": scn.id, "seed": seed, "strategy": strategy,
                       "demand_bps": repr(float(demand))}
                try:
                    outcome = execute_strategy(scn, strategy, seed, demand_override=demand)
                    rep = outcome.report
                    k_n = rep.association.shape[0]
                    row.update({
                        "K": k_n,
                        "P_tot_W": repr(rep.p_tot) if rep.feasible else "",
                        "n_active_cells": len(rep.active_cells),
                        "n_active_patterns": rep.n_active_patterns,
                        "avg_serving_cells": repr(rep.association.sum() / k_n) if rep.feasible else "",
                        "feasible": rep.feasible,
                        "outer_iters": rep.outer_iters,
                        "wall_ms": f"{outcome.wall_ms:.1f}",
                    })
                except HetsleepError as exc:
                    print(f"row failed ({strategy}, seed {seed}, demand {demand}): {exc}",
                          file=sys.stderr)
                    row.update({"K": "", "P_tot_W": "", "n_active_cells": "",
                                "n_active_patterns": "", "avg_serving_cells": "",
                                "feasible": False, "outer_iters": "", "wall_ms": ""})
                rows.append(row)

    rows.sort(key=lambda r: (r["scenario_id"], r["strategy"],
                             float(r["demand_bps"]), r["seed"]))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{scn.id}_sweep.csv"
    with path.open("w", newline="") as fh:
        fh.write(CSV_UNITS_COMMENT + "\n")
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"{len(rows)} rows -> {path}")
    return 0


def cmd_fit_bias(args) -> int:
    scn = load_scenario(args.scenario)
    doc = json.loads(Path(args.joint_report).read_text())
    if "report" not in doc or "association" not in doc["report"]:
        raise HetsleepError("joint report file carries no association")
    report = SolveReport.from_dict(doc["report"])
    seed = int(doc["meta"]["seed"])

    topo, points, gains = scn.realize(seed)
    reference = report.association
    if reference.shape != (len(points), topo.n_cells):
        raise HetsleepError("joint report association does not match the scenario")

    rsrp = rsrp_from_gains(topo, gains)
    cfg = BiasFitConfig(grid_hi_db=args.grid_hi, seed=seed, n_orders=args.orders)
    eta, err = fit_biases(reference, rsrp, cfg, topo)
    fitted_assoc = re_associate(rsrp, eta)
    mismatch = float((fitted_assoc != reference).any(axis=1).mean())

    result = {
        "meta": {"scenario_id": scn.id, "seed": seed, "version": __version__},
        "eta_db": eta.eta.tolist(),
        "weighted_error": err,
        "mismatch_fraction": mismatch,
    }

    if args.refit_run:
        patterns = scn.build_patterns(topo)
        rates = build_rate_table(topo, gains, scn.radio(), patterns)
        demand = np.array(doc["demand_bps"])
        rerun = fixed_assoc_minimize(topo, rates, fitted_assoc, demand, patterns,
                                     scn.solver_config(), seed=seed)
        result["refit_p_tot"] = rerun.p_tot
        result["joint_p_tot"] = report.p_tot
        result["refit_gap_fraction"] = ((rerun.p_tot - report.p_tot) / report.p_tot
                                        if report.p_tot > 0 else 0.0)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{scn.id}_bias_fit.json"
    path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"mismatch={mismatch:.2%} weighted_error={err:.3f}")
    if args.refit_run:
        print(f"joint P_tot={report.p_tot:.3f} W refit P_tot={result['refit_p_tot']:.3f} W "
              f"gap={result['refit_gap_fraction']:.2%}")
    print(f"result -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetsleep",
                                     description="Energy-minimizing cell activation "
                                                 "and channel allocation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one scenario with one strategy")
    run.add_argument("--scenario", required=True)
    run.add_argument("--strategy", default="joint",
                     help="joint | reuse1 | feature | clusters | fixed-re:<bias dB>")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--oracle", action="store_true",
                     help="cross-check against exhaustive enumeration (desk size only)")
    run.add_argument("--out", default="results")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="demand grid x strategies x seeds to CSV")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--sweep-demands", required=True, metavar="LO:HI:STEPS")
    sweep.add_argument("--strategies", default="joint")
    sweep.add_argument("--seeds", type=int, default=1)
    sweep.add_argument("--out", default="results")
    sweep.set_defaults(func=cmd_sweep)

    fit = sub.add_parser("fit-bias", help="map a joint association to selection biases")
    fit.add_argument("--scenario", required=True)
    fit.add_argument("--joint-report", required=True)
    fit.add_argument("--grid-hi", type=float, default=60.0)
    fit.add_argument("--orders", type=int, default=10)
    fit.add_argument("--refit-run", action="store_true",
                     help="re-minimize with the fitted association and report the gap")
    fit.add_argument("--out", default="results")
    fit.set_defaults(func=cmd_fit_bias)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HetsleepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
