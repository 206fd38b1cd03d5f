from .baselines import ExhaustiveLimits, enumerate_placements, exhaustive_optimal, greedy_place, set_partitions
from .moves import MOVE_KINDS, Move, MoveContext, initial_placement, propose_moves
from .tabu import (SolveResult, TabuList, TabuParams, TraceRow, objective_scale, psf_place,
                   tabu_random_explore, tabu_search)

__all__ = [
    "ExhaustiveLimits", "MOVE_KINDS", "Move", "MoveContext", "SolveResult", "TabuList", "TabuParams",
    "TraceRow", "enumerate_placements", "exhaustive_optimal", "greedy_place", "initial_placement",
    "objective_scale", "propose_moves", "psf_place", "set_partitions", "tabu_random_explore", "tabu_search",
]
