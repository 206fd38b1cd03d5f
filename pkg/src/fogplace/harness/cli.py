"""Command line entry point.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import FogplaceError
from ..evaluator import Evaluator, Weights
from ..infra import load_scenario
from ..mobility import MobilityProfile, analytic_cell_masses, simulate_rwp
from ..solvers import TabuParams, exhaustive_optimal, initial_placement, objective_scale, tabu_search
from .experiment import MAKESPAN_NORM, SOLVERS, ResultRow, build_workload, emit_csv, load_config, \
    run_experiment, solve, write_sweep, ExperimentConfig
from .instances import tiny_instance
from .io import csv_text, placement_from_doc, read_document, workload_from_doc, workload_to_doc, \
    write_document, write_text

log = logging.getLogger("fogplace")

TRACE_COLUMNS = ("iteration", "fitness", "best", "move", "elapsed_ms")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _count(text: str) -> int:
    # accepts 1e6 style counts
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v < 1 or v != int(v):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _probability(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alpha", type=_probability, default=0.5)
    g.add_argument("--out", default=None, help="output file or directory")
    g.add_argument("--grid", type=int, default=24, help="quadrature points per axis")
    g.add_argument("--force", action="store_true", help="overwrite existing outputs")
    g.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="fogplace", description="VNF placement on hybrid cloud/fog networks with mobile fog nodes")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(sp):
        grp = sp.add_mutually_exclusive_group()
        grp.add_argument("--preset", choices=("topology-10", "topology-20"), default=None)
        grp.add_argument("--scenario", help="scenario document (YAML/JSON)")
        sp.add_argument("--p-static", type=_probability, default=None,
                        help="override the static probability of every fog node")

    def workload_args(sp):
        grp = sp.add_mutually_exclusive_group()
        grp.add_argument("--workload", help="workload document (YAML/JSON)")
        grp.add_argument("--requests", type=int, default=15, help="generate this many requests")

    sp = sub.add_parser("generate", parents=[common], help="write a synthetic workload")
    sp.add_argument("--count", type=int, default=15)
    sp.add_argument("--n-types", type=int, default=10)

    sp = sub.add_parser("solve", parents=[common], help="place one workload with one solver")
    scenario_args(sp)
    workload_args(sp)
    sp.add_argument("--solver", choices=SOLVERS, default="tscp")
    sp.add_argument("--tabu-tenure", type=int, default=60)
    sp.add_argument("--stop-after", type=int, default=20)
    sp.add_argument("--neighborhood-size", type=int, default=16)

    sp = sub.add_parser("sweep", parents=[common], help="run an experiment config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("evaluate", parents=[common], help="score a placement document")
    scenario_args(sp)
    sp.add_argument("--workload", required=True)
    sp.add_argument("--placement", required=True)

    sp = sub.add_parser("validate-mobility", parents=[common], help="analytic vs simulated density grid")
    sp.add_argument("--samples", type=_count, default=1_000_000)
    sp.add_argument("--p-static", type=_probability, default=0.0)
    sp.add_argument("--velocity", type=float, default=1.0)
    sp.add_argument("--pause", type=float, default=0.0, help="expected pause time")
    sp.add_argument("--bins", type=int, default=32)

    sp = sub.add_parser("oracle", parents=[common], help="exhaustive optimum of a tiny instance")
    sp.add_argument("--nodes", type=int, default=3)
    sp.add_argument("--types", type=int, default=2)
    sp.add_argument("--requests", type=int, default=2)
    return p


def _network(args):
    if args.scenario:
        doc = read_document(args.scenario)
        doc.setdefault("quadrature_grid", args.grid)
        net = load_scenario(doc)
    else:
        net = load_scenario({"preset": args.preset or "topology-10", "seed": args.seed,
                             "quadrature_grid": args.grid})
    if args.p_static is not None:
        net = net.with_mobility(p_static=args.p_static)
    return net


def _out_dir(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_generate(args):
    cfg = ExperimentConfig(workload={"n_types": args.n_types})
    reqs = build_workload(cfg, args.seed, args.count)
    path = Path(args.out or "workload.yaml")
    write_document(path, workload_to_doc(reqs, args.seed), args.force)
    print(f"wrote {len(reqs)} requests to {path}")


def cmd_solve(args):
    net = _network(args)
    if args.workload:
        reqs = workload_from_doc(read_document(args.workload))
    else:
        reqs = build_workload(ExperimentConfig(), args.seed, args.requests)
    params = TabuParams(tabu_tenure=args.tabu_tenure, stop_after=args.stop_after,
                        neighborhood_size=args.neighborhood_size, alpha=args.alpha, seed=args.seed,
                        makespan_norm=MAKESPAN_NORM)
    ev = Evaluator(net, reqs, params.weights)
    scale = objective_scale(ev, initial_placement(net, reqs, args.seed))
    placement, evals, result = solve(args.solver, net, reqs, params)
    rep = ev.report(placement, scale)
    row = ResultRow(args.preset or (args.scenario and Path(args.scenario).stem) or "topology-10",
                    "hybrid", args.solver, args.seed, args.alpha, len(reqs), args.p_static,
                    rep.makespan_sum * 1e3, rep.cost_sum, rep.deployment_cost, rep.objective, rep.fitness,
                    rep.feasible, evals, rep.fog_usage, rep.cloud_usage)
    out = _out_dir(args, "out")
    emit_csv([row], out / "results.csv", force=args.force)
    trace = [vars(t) for t in result.trace] if result is not None else []
    write_text(out / "trace.csv", csv_text(trace, TRACE_COLUMNS), args.force)
    write_document(out / "placement.yaml", placement.to_doc(), args.force)
    print(f"{args.solver}: fitness={rep.fitness:.6g} objective={rep.objective:.6g} "
          f"makespan_ms={rep.makespan_sum * 1e3:.6g} feasible={rep.feasible} -> {out}")


def cmd_sweep(args):
    data = read_document(args.config)
    if args.workers is not None:
        data["workers"] = args.workers
    cfg = load_config(data)
    rows = run_experiment(cfg)
    paths = write_sweep(rows, args.out or cfg.out, force=args.force)
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows ({failed} with errors) -> {', '.join(map(str, paths))}")


def cmd_evaluate(args):
    net = _network(args)
    reqs = workload_from_doc(read_document(args.workload))
    placement = placement_from_doc(read_document(args.placement))
    ev = Evaluator(net, reqs, Weights(args.alpha, MAKESPAN_NORM))
    scale = objective_scale(ev, initial_placement(net, reqs, args.seed))
    row = ev.report(placement, scale).row()
    row = {("makespan_sum_ms" if k == "makespan_sum" else k): (v * 1e3 if k == "makespan_sum" else v)
           for k, v in row.items()}
    text = csv_text([row], list(row))
    if args.out:
        write_text(args.out, text, args.force)
    print(text, end="")


def cmd_validate_mobility(args):
    prof = MobilityProfile(p_static=args.p_static, velocity=args.velocity, expected_pause=args.pause)
    k = 20
    sim = simulate_rwp(prof, -(-args.samples // k), args.seed, samples_per_trajectory=k)
    emp = sim.histogram(args.bins)
    ana = analytic_cell_masses(prof, args.bins)
    b = args.bins
    rows = [{"i": i, "j": j, "x": (i + 0.5) / b, "y": (j + 0.5) / b,
             "analytic": float(ana[i, j]) * b * b, "empirical": float(emp[i, j]) * b * b}
            for i in range(b) for j in range(b)]
    path = Path(args.out or "density.csv")
    write_text(path, csv_text(rows, ("i", "j", "x", "y", "analytic", "empirical")), args.force)
    err = np.mean(np.abs(ana - emp)) / np.mean(ana)
    legs = float(sim.leg_lengths.mean()) if len(sim.leg_lengths) else float("nan")
    print(f"mean abs cell error {100 * err:.2f}%  mean leg length {legs:.4f}  -> {path}")


def cmd_oracle(args):
    net, reqs = tiny_instance(args.seed, args.nodes, args.types, args.requests, grid=args.grid)
    weights = Weights(args.alpha, MAKESPAN_NORM)
    opt = exhaustive_optimal(net, reqs, weights=weights, seed=args.seed)
    tab = tabu_search(net, reqs, TabuParams(alpha=args.alpha, seed=args.seed, makespan_norm=MAKESPAN_NORM))
    gap = (tab.fitness - opt.fitness) / abs(opt.fitness) if opt.fitness else 0.0
    rows = [{"solver": "optimal", "fitness": opt.fitness, "evaluations": opt.evaluations},
            {"solver": "tscp", "fitness": tab.fitness, "evaluations": tab.evaluations}]
    if args.out:
        write_text(args.out, csv_text(rows, ("solver", "fitness", "evaluations")), args.force)
    print(f"optimal={opt.fitness:.6g} ({opt.evaluations} placements)  tscp={tab.fitness:.6g}  gap={100 * gap:.2f}%")


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "validate-mobility": cmd_validate_mobility,
    "oracle": cmd_oracle,
}


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fogplace: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (FogplaceError, OSError) as exc:
        print(f"fogplace: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
