"""First-fit greedy placement and exhaustive enumeration for tiny instances."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..errors import TooLarge
from ..evaluator import EPS, Evaluator, Placement, Weights
from ..infra import NetworkModel
from ..units import bits
from ..vnffg import Request, vnf_catalog
from .moves import initial_placement
from .tabu import SolveResult, objective_scale


def greedy_place(network: NetworkModel, requests: Sequence[Request]) -> Placement:
    """First fit: reuse a deployed instance with spare capacity, else open one on the lowest-id node that fits.

    A node fits when it has room for the type and the links from the nodes of
    the VNF's immediate predecessors can carry the extra traffic.
    """
    types = vnf_catalog(requests)
    cache = network.cache
    used = [0.0] * len(network.nodes)
    inst_load: dict[tuple[int, int], float] = {}
    link_load: dict[tuple[int, int], float] = {}
    p = Placement()
    for r in requests:
        w = r.execution_weights
        for t in r.leaf_types:
            vt = types[t]
            traffic = w[t] * (r.traffic_in[t] + sum(a for _, a in r.iot_links[t]))
            limit = vt.util_threshold * vt.capacity
            pick = None
            for i in range(vt.instance_count):
                if (t, i) in p.deployed and inst_load.get((t, i), 0.0) + traffic <= limit:
                    pick = (i, p.deployed[(t, i)])
                    break
            if pick is None:
                free = [i for i in range(vt.instance_count) if (t, i) not in p.deployed]
                preds = [p.assigned[(r.id, q)][1] for q in sorted(r.predecessors[t])]
                load = w[t] * bits(r.traffic_in[t])

                def fits(n):
                    if used[n] + vt.resource_req > network.nodes[n].budget + EPS:
                        return False
                    for m in preds:
                        if m != n and link_load.get((m, n), 0.0) + load > \
                                network.link_class(m, n).bw_threshold * cache.bw[m, n]:
                            return False
                    return True

                if free:
                    n = next((n for n in range(len(network.nodes)) if fits(n)), 0)
                    i = free[0]
                    p.deployed[(t, i)] = n
                    used[n] += vt.resource_req
                    pick = (i, n)
                else:
                    # every instance is full; overload the least loaded one
                    i = min(range(vt.instance_count), key=lambda k: (inst_load.get((t, k), 0.0), k))
                    pick = (i, p.deployed[(t, i)])
            p.assigned[(r.id, t)] = pick
            inst_load[(t, pick[0])] = inst_load.get((t, pick[0]), 0.0) + traffic
            for q in sorted(r.predecessors[t]):
                m = p.assigned[(r.id, q)][1]
                if m != pick[1]:
                    link_load[(m, pick[1])] = link_load.get((m, pick[1]), 0.0) + w[t] * bits(r.traffic_in[t])
    return p


@dataclass(frozen=True)
class ExhaustiveLimits:
    nodes: int = 4
    types: int = 3
    instances: int = 2
    requests: int = 3


def set_partitions(items: Sequence, max_blocks: int) -> Iterator[list[list]]:
    """All partitions of ``items`` into at most ``max_blocks`` blocks, in canonical order."""
    items = list(items)
    if not items:
        yield []
        return

    def rec(k, blocks):
        if k == len(items):
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(items[k])
            yield from rec(k + 1, blocks)
            b.pop()
        if len(blocks) < max_blocks:
            blocks.append([items[k]])
            yield from rec(k + 1, blocks)
            blocks.pop()

    yield from rec(0, [])


def enumerate_placements(network: NetworkModel, requests: Sequence[Request]) -> Iterator[Placement]:
    """Every placement where each used instance serves at least one request.

    Per type, the requests using it are split into at most ``instance_count``
    groups, one instance per group, and every instance goes to some node.
    Deploying an instance nobody uses only adds cost, so those are skipped.
    """
    types = vnf_catalog(requests)
    N = len(network.nodes)
    per_type = []
    for t in sorted(types):
        users = [r.id for r in requests if t in r.required_types]
        options = []
        for blocks in set_partitions(users, types[t].instance_count):
            for nodes in itertools.product(range(N), repeat=len(blocks)):
                options.append((t, blocks, nodes))
        per_type.append(options)
    for combo in itertools.product(*per_type):
        p = Placement()
        for t, blocks, nodes in combo:
            for i, (block, n) in enumerate(zip(blocks, nodes)):
                p.deployed[(t, i)] = n
                for rid in block:
                    p.assigned[(rid, t)] = (i, n)
        yield p


def exhaustive_optimal(network: NetworkModel, requests: Sequence[Request],
                       limits: ExhaustiveLimits = ExhaustiveLimits(), *,
                       weights: Weights | float = Weights(), obj_scale: float | None = None,
                       seed: int = 0) -> SolveResult:
    """Global minimum of the penalised fitness by brute force.

    The penalty scale defaults to the objective of ``initial_placement(seed)``,
    the same scale a Tabu run with that seed uses.
    """
    types = vnf_catalog(requests)
    if len(network.nodes) > limits.nodes:
        raise TooLarge(f"{len(network.nodes)} nodes exceed the limit of {limits.nodes}")
    if len(types) > limits.types:
        raise TooLarge(f"{len(types)} types exceed the limit of {limits.types}")
    if any(vt.instance_count > limits.instances for vt in types.values()):
        raise TooLarge(f"instance counts exceed the limit of {limits.instances}")
    if len(requests) > limits.requests:
        raise TooLarge(f"{len(requests)} requests exceed the limit of {limits.requests}")

    t0 = time.perf_counter()
    ev = Evaluator(network, requests, weights)
    if obj_scale is None:
        obj_scale = objective_scale(ev, initial_placement(network, requests, seed))
    best, best_fit = None, float("inf")
    count = 0
    for p in enumerate_placements(network, requests):
        count += 1
        f = ev.fitness(p, obj_scale)
        if f < best_fit:
            best, best_fit = p, f
    return SolveResult(best, best_fit, [], time.perf_counter() - t0, count, obj_scale, "optimal")
