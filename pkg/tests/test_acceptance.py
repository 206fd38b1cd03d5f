"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected in
the terminal summary) before asserting, so a failing run still shows every
verdict with its measured numbers.
"""
import time

import numpy as np
import pytest

from fogplace.evaluator import Evaluator, Placement, Weights
from fogplace.harness import cli, run_experiment, tiny_instance
from fogplace.harness.experiment import MAKESPAN_NORM
from fogplace.infra import preset_network
from fogplace.mobility import MobilityProfile, analytic_cell_masses, simulate_rwp
from fogplace.solvers import TabuParams, exhaustive_optimal, tabu_search
from fogplace.vnffg import generate_workload, vnf_catalog

from oracles import naive_request

pytestmark = pytest.mark.acceptance

SEEDS = list(range(10))
TABU = {"tabu_tenure": 60, "stop_after": 20, "neighborhood_size": 16}


def means(rows, key, value):
    out = {}
    for r in rows:
        out.setdefault(key(r), []).append(value(r))
    return {k: float(np.mean(v)) for k, v in out.items()}


def spearman(x, y):
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    return float(np.corrcoef(rx, ry)[0, 1])


def test_criterion_1_rwp_density(verdict):
    t0 = time.perf_counter()
    worst_mass = worst_cell = 0.0
    legs = []
    for k, (p_static, pause) in enumerate([(0.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 1.0)]):
        prof = MobilityProfile(p_static=p_static, velocity=1.0, expected_pause=pause)
        worst_mass = max(worst_mass, abs(analytic_cell_masses(prof, 32, sub=16).sum() - 1.0))
        sim = simulate_rwp(prof, 1_000_000, 100 + k, samples_per_trajectory=20)
        ana = analytic_cell_masses(prof, 32)
        emp = sim.histogram(32)
        worst_cell = max(worst_cell, float(np.mean(np.abs(ana - emp)) / np.mean(ana)))
        legs.append(sim.leg_lengths)
    mean_leg = float(np.concatenate(legs).mean())
    elapsed = time.perf_counter() - t0
    ok = worst_mass <= 1e-3 and worst_cell < 0.02 and abs(mean_leg - 0.5214) <= 0.002 and elapsed < 120
    verdict(1, ok, f"mass err {worst_mass:.1e}, cell err {100 * worst_cell:.2f}%, "
                   f"mean leg {mean_leg:.4f}, {elapsed:.0f}s")
    assert ok


def test_criterion_2_evaluator_oracle(verdict):
    net = preset_network("topology-10", 0)
    reqs = generate_workload(100, 0)
    types = vnf_catalog(reqs)
    ev = Evaluator(net, reqs, 0.5)
    worst = 0.0
    for s in range(10):
        rng = np.random.default_rng(s)
        p = Placement()
        for t in types:
            for i in range(types[t].instance_count):
                p.deployed[(t, i)] = int(rng.integers(len(net)))
        for r in reqs:
            for t in r.leaf_types:
                i = int(rng.integers(types[t].instance_count))
                p.assigned[(r.id, t)] = (i, p.deployed[(t, i)])
        rep = ev.report(p)
        for k, r in enumerate(reqs):
            m, c = naive_request(p, r, net)
            for got, want in ((rep.makespans[k], m), (rep.costs[k], c)):
                if got != want:
                    worst = max(worst, abs(got - want) / max(abs(got), abs(want)))
    ok = worst <= 1e-12
    verdict(2, ok, f"100 trees x 10 placements, max relative deviation {worst:.1e}")
    assert ok


def test_criterion_3_optimality_gap(verdict):
    t0 = time.perf_counter()
    gaps = []
    never_worse = True
    weights = Weights(0.5, MAKESPAN_NORM)
    for seed in range(20):
        net, reqs = tiny_instance(seed, nodes=4, types=3, requests=3)
        opt = exhaustive_optimal(net, reqs, weights=weights, seed=seed)
        tab = tabu_search(net, reqs, TabuParams(seed=seed, makespan_norm=MAKESPAN_NORM, **TABU))
        never_worse &= opt.fitness <= tab.fitness * (1 + 1e-12)
        gaps.append((tab.fitness - opt.fitness) / abs(opt.fitness))
    elapsed = time.perf_counter() - t0
    gap = float(np.mean(gaps))
    ok = gap <= 0.10 and never_worse and elapsed < 300
    verdict(3, ok, f"mean gap {100 * gap:.2f}% (max {100 * max(gaps):.2f}%), "
                   f"exhaustive <= tabu: {never_worse}, {elapsed:.0f}s")
    assert ok


def test_criterion_4_baseline_ordering(verdict):
    rows = run_experiment({"preset": "topology-10", "solvers": ["tscp", "random_explore", "greedy"],
                           "alphas": [0.5], "requests": [15], "seeds": SEEDS, "tabu": TABU, "workers": 1})
    fit = {(r.solver, r.seed): r.fitness for r in rows}
    m = means(rows, lambda r: r.solver, lambda r: r.fitness)
    wins = sum(fit[("tscp", s)] < fit[("greedy", s)] for s in SEEDS) / len(SEEDS)
    ok = m["tscp"] <= m["random_explore"] <= m["greedy"] and wins >= 0.9
    verdict(4, ok, f"mean fitness tscp {m['tscp']:.1f} <= random_explore {m['random_explore']:.1f} "
                   f"<= greedy {m['greedy']:.1f}; tscp beats greedy on {100 * wins:.0f}% of seeds")
    assert ok


def test_criterion_5_mobility_awareness(verdict):
    p_static = [1.0, 0.75, 0.5, 0.25, 0.0]
    rows = run_experiment({"preset": "topology-10", "solvers": ["tscp", "psf"], "alphas": [0.5],
                           "requests": [15], "p_static": p_static, "seeds": SEEDS, "tabu": TABU, "workers": 1})
    m = means(rows, lambda r: (r.solver, r.p_static), lambda r: r.fitness)
    p_mobile = [1 - p for p in p_static]
    ratio = [m[("psf", p)] / m[("tscp", p)] for p in p_static]
    static_ok = abs(ratio[0] - 1.0) <= 0.02
    above = all(r > 1.0 for r in ratio[1:])
    monotone = all(b >= a for a, b in zip(ratio, ratio[1:]))
    rho = spearman(p_mobile, ratio)
    ok = static_ok and above and monotone and rho > 0
    shown = ", ".join(f"{pm:g}:{r:.4f}" for pm, r in zip(p_mobile, ratio))
    verdict(5, ok, f"PSF/TSCP by p_mobile [{shown}]; static within 2%: {static_ok}, "
                   f"all mobile > 1: {above}, non-decreasing: {monotone}, spearman {rho:.2f}")
    assert ok


def test_criterion_6_alpha_sweep(verdict):
    alphas = [0.0, 0.25, 0.5, 0.75, 1.0]
    rows = run_experiment({"preset": "topology-20", "solvers": ["tscp"], "alphas": alphas, "requests": [15],
                           "seeds": SEEDS, "tabu": TABU, "workers": 1})
    fog = means(rows, lambda r: r.alpha, lambda r: r.fog_usage)
    series = [fog[a] for a in alphas]
    monotone = all(b >= a - 1e-9 for a, b in zip(series, series[1:]))
    all_cloud = all(r.fog_usage == 0.0 for r in rows if r.alpha == 0.0)
    ok = monotone and all_cloud and series[-1] >= 90.0
    shown = ", ".join(f"{a:g}:{v:.2f}" for a, v in zip(alphas, series))
    verdict(6, ok, f"fog usage % by alpha [{shown}]; non-decreasing: {monotone}, alpha=0 all cloud: {all_cloud}")
    assert ok


def test_criterion_7_infrastructures(verdict):
    rows = run_experiment({"preset": "topology-10", "infrastructures": ["hybrid", "cloud", "fog"],
                           "solvers": ["tscp"], "alphas": [0.5], "requests": [15], "seeds": SEEDS,
                           "tabu": TABU, "workers": 1})
    key = lambda r: r.infrastructure  # noqa: E731
    cost = means(rows, key, lambda r: r.cost_sum + r.deployment_cost)
    span = means(rows, key, lambda r: r.makespan_sum_ms)
    obj = means(rows, key, lambda r: r.objective)
    fit = means(rows, key, lambda r: r.fitness)
    feasible = means(rows, key, lambda r: float(r.feasible))
    ok = (min(cost, key=cost.get) == "cloud" and min(span, key=span.get) == "fog"
          and min(fit, key=fit.get) == "hybrid")
    fmt = lambda d: ", ".join(f"{k} {d[k]:.1f}" for k in ("cloud", "fog", "hybrid"))  # noqa: E731
    verdict(7, ok, f"cost [{fmt(cost)}]; makespan ms [{fmt(span)}]; fitness [{fmt(fit)}]; "
                   f"raw objective [{fmt(obj)}]; feasible share [{fmt(feasible)}]")
    assert ok


def test_criterion_8_runtime(verdict):
    sizes = [5, 10, 15, 50]
    runtime = {}
    for n in sizes:
        walls = []
        for seed in range(3):
            net = preset_network("topology-20", seed)
            reqs = generate_workload(n, seed)
            net.cache  # link expectations are shared setup, not search time
            res = tabu_search(net, reqs, TabuParams(seed=seed, makespan_norm=MAKESPAN_NORM, **TABU))
            walls.append(res.wall_time)
        runtime[n] = float(np.mean(walls))
    series = [runtime[n] for n in sizes]
    ok = all(b > a for a, b in zip(series, series[1:])) and runtime[50] < 300
    shown = ", ".join(f"{n}:{runtime[n]:.2f}s" for n in sizes)
    verdict(8, ok, f"mean tabu runtime by request count [{shown}]")
    assert ok


def test_criterion_9_sweep_determinism(verdict, tmp_path):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text(
        "preset: topology-10\n"
        "solvers: [tscp, random_explore, greedy, psf]\n"
        "alphas: [0.25, 0.75]\n"
        "p_static: [0.5, 1.0]\n"
        "requests: [4]\n"
        "seeds: [0, 1]\n"
        "tabu: {stop_after: 5}\n"
        "workers: 1\n"
    )
    outs = []
    for run in ("a", "b"):
        assert cli(["sweep", "--config", str(cfg), "--out", str(tmp_path / run)]) == 0
        outs.append({name: (tmp_path / run / name).read_bytes() for name in ("results.csv", "summary.csv")})
    ok = outs[0] == outs[1] and len(outs[0]["results.csv"]) > 0
    verdict(9, ok, "results.csv and summary.csv byte-identical across two sweep runs"
            if ok else "sweep outputs differ between identical runs")
    assert ok
