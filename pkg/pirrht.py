# pirrht.py
"""PI-RRHT* command line: validate, plan, run, hsig en history.

Gebruik:
    python3 pirrht.py validate --scenario scenarios/integrator_two_obstacles.json
    python3 pirrht.py plan --scenario ... --iters 2000 --seed 7 --out tree.json
    python3 pirrht.py run --scenario ... --tree tree.json --seed 1 --runs 5 --out runs/
    python3 pirrht.py hsig pad.csv --scenario ...
"""

import argparse
import copy
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from csv_io import read_path_csv, write_curve_csv, write_references_csv, write_run_csv
from database import DEFAULT_DB, get_plans, get_runs, get_success_rates, init_db, insert_runs, log_plan
from dynamics import NonFiniteState, check_model, require_consistent, tpbvp
from environment import validate_workspace
from pi_control import DegenerateEstimate, run_receding_horizon
from planner import PlannerGraph, Unreachable
from scenarios import (
    ScenarioError, build_model, build_planner, build_workspace, control_config, load_scenario,
)
from topology import path_signature, realized_class

log = logging.getLogger("pirrht")

N_MODEL_STATES = 100
N_TPBVP_PAIRS = 20
TPBVP_TOLERANCE = 1e-6


def _json_float(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def _random_states(ws, model, n: int, rng: np.random.Generator) -> np.ndarray:
    xmin, ymin, xmax, ymax = ws.bounds
    pts = np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])
    if model.heading_index is not None:
        pts = np.column_stack([pts, rng.uniform(-math.pi, math.pi, n)])
    return pts


def _check(ok: bool, label: str) -> bool:
    print(f"  {'✓' if ok else '✗'} {label}")
    return ok


# ── validate ──

def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"Scenario: {scenario.name}")
    ws = build_workspace(scenario)
    model = build_model(scenario)
    rng = np.random.default_rng(args.seed)
    ok = True

    print("\nWerkruimte...")
    problems = validate_workspace(ws)
    for p in problems:
        _check(False, p)
    ok &= _check(not problems, f"{len(ws.obstacles)} obstakels, doel r={ws.goal.radius}")
    ok &= _check(ws.contains_free(scenario.start[:2]), f"start {scenario.start} ligt in de vrije ruimte")

    print("\nModel...")
    model_problems = check_model(model, _random_states(ws, model, N_MODEL_STATES, rng))
    for p in model_problems:
        _check(False, p)
    ok &= _check(not model_problems, f"lambda = {model.lam:.6g} consistent op {N_MODEL_STATES} toestanden")

    print("\nTPBVP...")
    worst = 0.0
    for _ in range(N_TPBVP_PAIRS):
        a, b = _random_states(ws, model, 2, rng)
        sol = tpbvp(model, a, b, ws.resolution)
        end = sol.traj.states[-1]
        err = np.abs(end - b)
        if model.heading_index is not None:
            k = model.heading_index
            err[k] = abs((end[k] - b[k] + math.pi) % (2 * math.pi) - math.pi)
        worst = max(worst, float(err.max()))
    ok &= _check(worst < TPBVP_TOLERANCE, f"{N_TPBVP_PAIRS} paren, max eindpuntfout {worst:.2e}")

    print("\nAlle controles geslaagd." if ok else "\nValidatie mislukt.")
    return 0 if ok else 1


# ── plan ──

def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    model = build_model(scenario)
    require_consistent(model)
    graph = build_planner(scenario, model)
    iters = args.iters if args.iters is not None else scenario.planner.iters
    seed = args.seed if args.seed is not None else scenario.planner.seed
    rng = np.random.default_rng(seed)
    start = np.asarray(scenario.start, dtype=float)

    print(f"Expansie: {scenario.name}, {iters} iteraties, seed {seed}")
    curve = []
    if args.curve:
        every = max(1, scenario.planner.curve_every)
        done = 0
        while done < iters:
            chunk = min(every, iters - done)
            graph.expand(chunk, rng)
            done += chunk
            for label, cost in sorted(graph.class_costs(start).items()):
                curve.append({"iteration": done, "class": label, "cost": cost})
    else:
        graph.expand(iters, rng)

    print(f"  {len(graph.vertices)} vertices, {len(graph.edges)} edges, "
          f"{len(graph.live_nodes())} knopen")
    if iters > 0:
        try:
            refs = graph.extract_reference(start)
            print(f"  ✓ {len(refs)} homologieklassen vanaf de start")
            for ref in refs:
                print(f"    [{ref.label}] kost {ref.cost:.3f}")
        except Unreachable as e:
            print(f"  ✗ {e}")

    out = Path(args.out)
    _write_json(out, graph.to_dict())
    print(f"\nOpgeslagen in {out}")
    if args.curve:
        write_curve_csv(args.curve, curve)
        print(f"Opgeslagen in {args.curve}")
    if args.db:
        init_db(args.db)
        log_plan(args.db, scenario.name, seed, iters, len(graph.vertices), len(graph.edges), str(out))
    return 0


# ── run ──

def _load_tree(path: str, model, ws) -> PlannerGraph:
    with open(path, encoding="utf-8") as f:
        return PlannerGraph.from_dict(json.load(f), model, ws)


def _run_summary(result, ws, tol: float) -> dict:
    refs = result.initial_references
    cls = -1
    if result.reached_goal:
        cls = realized_class(result.trace.states, ws.goal.rep, refs, ws, tol)
    return {
        "reached_goal": result.reached_goal,
        "realized_cost": _json_float(result.realized_cost),
        "steps": result.steps,
        "exit": result.exit.name.lower(),
        "realized_class": cls,
        "realized_label": refs[cls].label if cls >= 0 else "",
        "final_class": result.class_history[-1] if result.records else "",
        "reason": result.reason,
        "references": [{"class": r.label, "cost": r.cost} for r in refs],
        "class_history": result.class_history,
        "psi_history": [r.psi_per_class for r in result.records],
        "log_psi_history": [{k: _json_float(v) for k, v in r.log_psi_per_class.items()}
                            for r in result.records],
        "fallbacks": sum(r.fallback for r in result.records),
    }


def _failed_summary(reason: str) -> dict:
    """Zelfde sleutels als _run_summary, voor runs die geen resultaat opleveren."""
    return {
        "reached_goal": False,
        "realized_cost": "inf",
        "steps": 0,
        "exit": "failure",
        "realized_class": -1,
        "realized_label": "",
        "final_class": "",
        "reason": reason,
        "references": [],
        "class_history": [],
        "psi_history": [],
        "log_psi_history": [],
        "fallbacks": 0,
    }


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.b is not None:
        scenario.model.b = args.b
    if args.samples is not None:
        scenario.control.n_samples = args.samples
    model = build_model(scenario)
    require_consistent(model)
    ws = build_workspace(scenario)
    base = _load_tree(args.tree, model, ws)
    runs = args.runs if args.runs is not None else scenario.control.runs
    config = control_config(scenario, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = np.asarray(scenario.start, dtype=float)

    print(f"Uitvoering: {scenario.name}, b={model.params['b']}, N={config.n_samples}, {runs} runs")
    summaries = []
    for k in range(runs):
        run_seed = [args.seed, k]
        name = f"run_{k:03d}"
        graph = copy.deepcopy(base)
        try:
            result = run_receding_horizon(model, ws, graph, start, run_seed, config)
        except (Unreachable, NonFiniteState) as e:
            print(f"  ✗ {name}: {e}")
            summary = _failed_summary(str(e))
        else:
            write_run_csv(out / f"{name}.csv", result)
            if k == 0:
                write_references_csv(out / "references.csv", result.initial_references)
            summary = _run_summary(result, ws, base.tol)
            mark = "✓" if result.reached_goal else "✗"
            print(f"  {mark} {name}: {result.steps} stappen, kost {result.realized_cost:.3f}, "
                  f"klasse {summary['realized_label'] or '-'}")
        summary.update({"run": k, "seed": args.seed, "summary_file": f"{name}.json"})
        _write_json(out / f"{name}.json", summary)
        summaries.append(summary)

    reached = sum(s["reached_goal"] for s in summaries)
    _write_json(out / "summary.json", {
        "scenario": scenario.name, "seed": args.seed, "b": model.params["b"],
        "n_samples": config.n_samples, "runs": runs, "reached_goal": reached, "per_run": summaries,
    })
    print(f"\nDoel bereikt in {reached}/{runs} runs")
    print(f"Opgeslagen in {out}")

    if args.db:
        init_db(args.db)
        for s in summaries:
            s.update({"b": model.params["b"], "n_samples": config.n_samples})
            if s["realized_cost"] == "inf":
                s["realized_cost"] = None
        insert_runs(args.db, summaries, scenario.name)
        print(f"Opgeslagen in {args.db}")
    return 0


# ── hsig / history ──

def cmd_hsig(args) -> int:
    scenario = load_scenario(args.scenario)
    ws = build_workspace(scenario)
    points = read_path_csv(args.path)
    h = path_signature(points, ws)
    print(" ".join(f"{v:.9f}" for v in np.round(h, 9) + 0.0))
    return 0


def cmd_history(args) -> int:
    if not Path(args.db).exists():
        print(f"Geen archief gevonden: {args.db}")
        return 1
    plans = pd.DataFrame(get_plans(args.db, args.scenario))
    if not plans.empty:
        print("Expansies:")
        cols = ["scenario", "seed", "iters", "vertices", "edges", "tree_file", "created_at"]
        print(plans[cols].to_string(index=False))
        print()
    runs = pd.DataFrame(get_runs(args.db, args.scenario))
    if runs.empty:
        print("Nog geen runs gearchiveerd.")
        return 0
    cols = ["scenario", "seed", "run_index", "b", "n_samples", "reached_goal",
            "realized_cost", "steps", "realized_class", "reason"]
    print(runs[cols].to_string(index=False))
    print("\nSlagingspercentage:")
    print(pd.DataFrame(get_success_rates(args.db)).to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    default_scenario = os.getenv("PIRRHT_SCENARIO")
    default_db = os.getenv("PIRRHT_DB", DEFAULT_DB)
    default_workers = int(os.getenv("PIRRHT_WORKERS", "1"))

    parser = argparse.ArgumentParser(description="PI-RRHT* planner en path-integral regelaar")
    parser.add_argument("--verbose", "-v", action="store_true", help="Toon voortgang (INFO-logging)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p):
        p.add_argument("--scenario", default=default_scenario, required=default_scenario is None,
                       help="Scenario JSON (of naam van een meegeleverd scenario)")

    p = sub.add_parser("validate", help="Controleer werkruimte, model en TPBVP")
    scenario_arg(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="Expansiefase: bouw de graaf")
    scenario_arg(p)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="tree.json")
    p.add_argument("--curve", metavar="CSV", help="Schrijf de kostcurve per klasse")
    p.add_argument("--db", nargs="?", const=default_db, help="Log de expansie in het run-archief")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="Uitvoeringsfase: gesloten-lus runs")
    scenario_arg(p)
    p.add_argument("--tree", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int)
    p.add_argument("--out", default="runs")
    p.add_argument("--b", type=float, help="Overschrijf de ruisintensiteit b")
    p.add_argument("--samples", type=int, help="Overschrijf N per klasse")
    p.add_argument("--workers", type=int, default=default_workers)
    p.add_argument("--db", nargs="?", const=default_db, help="Archiveer de runs in SQLite")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("hsig", help="H-signatuur van een pad (CSV met x,y)")
    p.add_argument("path")
    scenario_arg(p)
    p.set_defaults(func=cmd_hsig)

    p = sub.add_parser("history", help="Toon het run-archief")
    p.add_argument("--db", default=default_db)
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_history)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, Unreachable, DegenerateEstimate, NonFiniteState,
            FileNotFoundError, ValueError) as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
