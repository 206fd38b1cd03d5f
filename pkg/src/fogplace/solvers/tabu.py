"""Tabu search over placements, its random-target variant and the static-fog baseline."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError, NoMoveAvailable
from ..evaluator import Evaluator, Placement, Weights
from ..infra import NetworkModel
from ..vnffg import Request
from .moves import MOVE_KINDS, MoveContext, initial_placement, propose_moves

IMPROVE_RTOL = 1e-12


@dataclass(frozen=True)
class TabuParams:
    tabu_tenure: int = 60
    stop_after: int = 20
    neighborhood_size: int = 16
    alpha: float = 0.5
    seed: int = 0
    makespan_norm: float = 1.0
    cost_norm: float = 1.0
    max_iterations: int = 100_000

    def __post_init__(self):
        if self.tabu_tenure < 1 or self.stop_after < 1 or self.neighborhood_size < 1:
            raise DomainError("tenure, stop_after and neighborhood_size must be >= 1")

    @property
    def weights(self) -> Weights:
        return Weights(self.alpha, self.makespan_norm, self.cost_norm)


@dataclass
class TraceRow:
    iteration: int
    fitness: float
    best: float
    move: str
    elapsed_ms: float


@dataclass
class SolveResult:
    placement: Placement
    fitness: float
    trace: list[TraceRow] = field(default_factory=list)
    wall_time: float = 0.0
    evaluations: int = 0
    obj_scale: float = 1.0
    solver: str = ""


class TabuList:
    """Move attributes with the last iteration at which each is still tabu."""

    def __init__(self, tenure: int):
        self.tenure = tenure
        self.expires: dict = {}

    def add(self, attribute, iteration: int):
        self.expires[attribute] = iteration + self.tenure

    def remove(self, attribute):
        self.expires.pop(attribute, None)

    def active(self, attribute, iteration: int) -> bool:
        exp = self.expires.get(attribute)
        if exp is None:
            return False
        if iteration > exp:
            del self.expires[attribute]
            return False
        return True

    def __len__(self):
        return len(self.expires)


def objective_scale(ev: Evaluator, placement: Placement) -> float:
    obj = ev.parts(placement)[3]
    return obj if obj > 0 else 1.0


def _search(network: NetworkModel, requests: Sequence[Request], params: TabuParams,
            random_targets: bool, name: str) -> SolveResult:
    t0 = time.perf_counter()
    ev = Evaluator(network, requests, params.weights)
    ctx = MoveContext(ev, random_targets=random_targets)
    rng = np.random.default_rng([params.seed, 2])

    cur = initial_placement(network, requests, params.seed)
    scale = objective_scale(ev, cur)
    cur_fit = ev.fitness(cur, scale)
    best_fit, best = cur_fit, cur.copy()
    tabu = TabuList(params.tabu_tenure)
    trace = [TraceRow(0, cur_fit, best_fit, "init", 0.0)]

    j = 0
    it = 0
    while j <= params.stop_after and it < params.max_iterations:
        it += 1
        try:
            moves = propose_moves(cur, rng, params.neighborhood_size, ctx)
        except NoMoveAvailable:
            break
        chosen = None
        for k, mv in enumerate(moves):
            mv.apply(cur)
            f = ev.fitness(cur, scale)
            mv.revert(cur)
            is_tabu = tabu.active(mv.reversal, it)
            # a tabu move is admissible only when it beats the best so far
            if is_tabu and not f < best_fit:
                continue
            if chosen is None or f < chosen[0]:
                chosen = (f, mv, is_tabu)
        j += 1
        if chosen is None:
            trace.append(TraceRow(it, cur_fit, best_fit, "none", 1e3 * (time.perf_counter() - t0)))
            continue
        f, mv, is_tabu = chosen
        mv.apply(cur)
        cur_fit = f
        if is_tabu:
            tabu.remove(mv.reversal)
        tabu.add(mv.attribute, it)
        if f < best_fit - IMPROVE_RTOL * abs(best_fit):
            best_fit, best = f, cur.copy()
            j = 0
        trace.append(TraceRow(it, cur_fit, best_fit, mv.kind, 1e3 * (time.perf_counter() - t0)))

    return SolveResult(best, best_fit, trace, time.perf_counter() - t0, ev.evaluations, scale, name)


def tabu_search(network: NetworkModel, requests: Sequence[Request], params: TabuParams = TabuParams()) -> SolveResult:
    """Tabu search with moves steered towards the cheapest target."""
    return _search(network, requests, params, False, "tscp")


def tabu_random_explore(network: NetworkModel, requests: Sequence[Request],
                        params: TabuParams = TabuParams()) -> SolveResult:
    """Same search, but each move picks its target uniformly among those with room."""
    return _search(network, requests, params, True, "random_explore")


def psf_place(network: NetworkModel, requests: Sequence[Request], params: TabuParams = TabuParams()) -> SolveResult:
    """Tabu search that believes every node stays at its initial location.

    The returned fitness is re-evaluated under the true mobility model with the
    same objective scale, so it is comparable with ``tabu_search`` results.
    """
    res = _search(network.pinned(), requests, params, False, "psf")
    ev = Evaluator(network, requests, params.weights)
    scale = objective_scale(ev, initial_placement(network, requests, params.seed))
    res.fitness = ev.fitness(res.placement, scale)
    res.obj_scale = scale
    return res


__all__ = ["MOVE_KINDS", "SolveResult", "TabuList", "TabuParams", "TraceRow", "psf_place",
           "tabu_random_explore", "tabu_search", "objective_scale"]
