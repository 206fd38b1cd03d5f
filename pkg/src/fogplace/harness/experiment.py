"""Experiment sweeps: scenarios x workloads x solvers x sweep points x seeds."""
from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import FogplaceError
from ..evaluator import Evaluator, Placement
from ..infra import NetworkModel, preset_network
from ..schema import validate
from ..solvers import (ExhaustiveLimits, TabuParams, exhaustive_optimal, greedy_place, initial_placement,
                       objective_scale, psf_place, tabu_random_explore, tabu_search)
from ..vnffg import Request, WorkloadParams, generate_catalog, generate_workload
from .io import csv_text, write_text

SOLVERS = ("tscp", "random_explore", "greedy", "psf", "optimal")
INFRASTRUCTURES = ("hybrid", "cloud", "fog")

# makespan is reported and weighted in milliseconds
MAKESPAN_NORM = 1e-3
DEFAULT_REQUESTS = {"topology-10": [1, 5, 10, 15], "topology-20": [10, 25, 50]}


class TabuDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    tabu_tenure: int = Field(60, ge=1)
    stop_after: int = Field(20, ge=1)
    neighborhood_size: int = Field(16, ge=1)


class WorkloadOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n_types: int = Field(10, ge=1)
    instance_count: int = Field(2, ge=1)
    vnfs: tuple[int, int] = (3, 10)
    heights: tuple[int, ...] = (2, 4, 6, 8)
    users: tuple[int, int] = (5, 30)
    iot_vnfs: tuple[int, int] = (1, 2)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str = "experiment"
    preset: Literal["topology-10", "topology-20"] = "topology-10"
    infrastructures: list[Literal["hybrid", "cloud", "fog"]] = ["hybrid"]
    solvers: list[Literal["tscp", "random_explore", "greedy", "psf", "optimal"]] = ["tscp"]
    alphas: list[float] = [0.5]
    p_static: list[Optional[float]] = [None]
    requests: Optional[list[int]] = None
    seeds: list[int] = list(range(10))
    grid: int = Field(24, ge=2, le=256)
    makespan_norm: float = Field(MAKESPAN_NORM, gt=0)
    cost_norm: float = Field(1.0, gt=0)
    tabu: TabuDoc = Field(default_factory=TabuDoc)
    workload: WorkloadOverrides = Field(default_factory=WorkloadOverrides)
    workers: int = Field(1, ge=1)
    out: str = "results"

    @model_validator(mode="after")
    def _default_requests(self):
        if self.requests is None:
            self.requests = list(DEFAULT_REQUESTS[self.preset])
        return self

    @field_validator("solvers", "seeds", "alphas", "p_static", "infrastructures")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v

    @field_validator("alphas")
    @classmethod
    def _alpha_range(cls, v):
        if any(not 0 <= a <= 1 for a in v):
            raise ValueError("alpha values must lie in [0, 1]")
        return v

    @field_validator("p_static")
    @classmethod
    def _p_range(cls, v):
        if any(p is not None and not 0 <= p <= 1 for p in v):
            raise ValueError("p_static values must lie in [0, 1]")
        return v

    @field_validator("requests")
    @classmethod
    def _req_range(cls, v):
        if v is not None and not v:
            raise ValueError("must not be empty")
        if v is not None and any(k < 0 for k in v):
            raise ValueError("request counts must be >= 0")
        return v


def load_config(data) -> ExperimentConfig:
    if isinstance(data, ExperimentConfig):
        return data
    return validate(ExperimentConfig, data)


RESULT_COLUMNS = (
    "scenario", "infrastructure", "solver", "seed", "alpha", "requests", "p_static",
    "makespan_sum_ms", "cost_sum", "deployment_cost", "objective", "fitness", "feasible",
    "evaluations", "fog_usage", "cloud_usage", "error",
)
TIMING_COLUMNS = ("scenario", "infrastructure", "solver", "seed", "alpha", "requests", "p_static", "wall_ms")


@dataclass
class ResultRow:
    scenario: str
    infrastructure: str
    solver: str
    seed: int
    alpha: float
    requests: int
    p_static: Optional[float]
    makespan_sum_ms: float = float("nan")
    cost_sum: float = float("nan")
    deployment_cost: float = float("nan")
    objective: float = float("nan")
    fitness: float = float("nan")
    feasible: bool = False
    evaluations: int = 0
    fog_usage: float = float("nan")
    cloud_usage: float = float("nan")
    error: str = ""
    wall_ms: float = 0.0
    placement: Optional[Placement] = None

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("placement")
        return d

    def sort_key(self):
        return (self.scenario, self.infrastructure, -1.0 if self.p_static is None else self.p_static,
                self.alpha, self.requests, SOLVERS.index(self.solver), self.seed)


def build_network(preset: str, seed: int, grid: int, infrastructure: str = "hybrid",
                  p_static: float | None = None) -> NetworkModel:
    net = preset_network(preset, seed, grid=grid)
    if infrastructure != "hybrid":
        net = net.subset(infrastructure)
    if p_static is not None:
        net = net.with_mobility(p_static=p_static)
    return net


def build_workload(config: ExperimentConfig, seed: int, count: int) -> list[Request]:
    w = config.workload
    types = generate_catalog(w.n_types, seed, instance_count=w.instance_count)
    params = WorkloadParams(vnfs=tuple(w.vnfs), heights=tuple(w.heights), users=tuple(w.users),
                            iot_vnfs=tuple(w.iot_vnfs))
    return generate_workload(count, seed, params, types)


def solve(solver: str, network: NetworkModel, requests: Sequence[Request], params: TabuParams):
    """Run one solver; returns (placement, evaluations)."""
    if solver == "tscp":
        r = tabu_search(network, requests, params)
    elif solver == "random_explore":
        r = tabu_random_explore(network, requests, params)
    elif solver == "psf":
        r = psf_place(network, requests, params)
    elif solver == "optimal":
        r = exhaustive_optimal(network, requests, ExhaustiveLimits(), weights=params.weights, seed=params.seed)
    elif solver == "greedy":
        return greedy_place(network, requests), 0, None
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return r.placement, r.evaluations, r


def _run_point(args) -> list[ResultRow]:
    config, infra, p_static, alpha, seed = args
    net = build_network(config.preset, seed, config.grid, infra, p_static)
    full = build_workload(config, seed, max(config.requests))
    rows = []
    for count in config.requests:
        reqs = full[:count]
        params = TabuParams(tabu_tenure=config.tabu.tabu_tenure, stop_after=config.tabu.stop_after,
                            neighborhood_size=config.tabu.neighborhood_size, alpha=alpha, seed=seed,
                            makespan_norm=config.makespan_norm, cost_norm=config.cost_norm)
        ev = Evaluator(net, reqs, params.weights)
        # one penalty scale per point so the solvers' fitness values compare
        scale = objective_scale(ev, initial_placement(net, reqs, seed))
        for solver in config.solvers:
            row = ResultRow(config.name, infra, solver, seed, alpha, count, p_static)
            t0 = time.perf_counter()
            try:
                placement, evals, _ = solve(solver, net, reqs, params)
            except FogplaceError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
                row.wall_ms = 1e3 * (time.perf_counter() - t0)
                rows.append(row)
                continue
            row.wall_ms = 1e3 * (time.perf_counter() - t0)
            rep = ev.report(placement, scale)
            row.makespan_sum_ms = rep.makespan_sum * 1e3
            row.cost_sum = rep.cost_sum
            row.deployment_cost = rep.deployment_cost
            row.objective = rep.objective
            row.fitness = rep.fitness
            row.feasible = rep.feasible
            row.evaluations = evals
            row.fog_usage = rep.fog_usage
            row.cloud_usage = rep.cloud_usage
            row.placement = placement
            rows.append(row)
    return rows


def run_experiment(config) -> list[ResultRow]:
    """All rows of a sweep, sorted deterministically."""
    config = load_config(config)
    points = [(config, infra, p, a, s)
              for infra in config.infrastructures
              for p in config.p_static
              for a in config.alphas
              for s in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(_run_point, points))
    else:
        chunks = [_run_point(pt) for pt in points]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=ResultRow.sort_key)
    return rows


def emit_csv(rows: Sequence[ResultRow], path, *, force: bool = False, columns=RESULT_COLUMNS):
    write_text(path, csv_text([r.as_dict() for r in rows], columns), force)


def write_sweep(rows: Sequence[ResultRow], out_dir, *, force: bool = False) -> tuple[Path, Path]:
    out = Path(out_dir)
    results, timings, summary = out / "results.csv", out / "timings.csv", out / "summary.csv"
    emit_csv(rows, results, force=force)
    emit_csv(rows, timings, force=force, columns=TIMING_COLUMNS)
    write_text(summary, csv_text(summarise(rows), SUMMARY_COLUMNS), force)
    return results, timings, summary


GROUP_COLUMNS = ("scenario", "infrastructure", "solver", "alpha", "requests", "p_static")
MEAN_COLUMNS = ("makespan_sum_ms", "cost_sum", "deployment_cost", "objective", "fitness",
                "fog_usage", "cloud_usage")
SUMMARY_COLUMNS = GROUP_COLUMNS + ("runs",) + MEAN_COLUMNS + tuple(f"{c}_norm" for c in MEAN_COLUMNS[:4])


def normalise(values) -> list[float]:
    """Each value divided by the series maximum (0 stays 0)."""
    v = np.asarray(values, dtype=float)
    top = np.nanmax(v) if len(v) else 0.0
    if not top:
        return [0.0] * len(v)
    return [float(x) for x in v / top]


def summarise(rows: Sequence[ResultRow]) -> list[dict]:
    """Means over seeds per sweep point; ``*_norm`` columns divide each scenario/solver series by its max."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        if r.error:
            continue
        groups.setdefault(tuple(getattr(r, c) for c in GROUP_COLUMNS), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: groups[k][0].sort_key()):
        rs = groups[key]
        d = dict(zip(GROUP_COLUMNS, key))
        d["runs"] = len(rs)
        for c in MEAN_COLUMNS:
            d[c] = float(np.mean([getattr(r, c) for r in rs]))
        out.append(d)
    series: dict[tuple, list[dict]] = {}
    for d in out:
        series.setdefault((d["scenario"], d["infrastructure"], d["solver"]), []).append(d)
    for ds in series.values():
        for c in MEAN_COLUMNS[:4]:
            for d, v in zip(ds, normalise([d[c] for d in ds])):
                d[f"{c}_norm"] = v
    return out
