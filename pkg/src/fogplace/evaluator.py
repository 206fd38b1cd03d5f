"""Expected makespan and cost of placed requests, constraints and penalised fitness.

Per-VNF quantities are combined bottom-up over each request tree:
sequences add, parallel blocks take the max of the time columns and add cost,
selections weight children by their probabilities and loops multiply the
sequence totals by the expected iteration count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, UnassignedVnf
from .infra import ExpectedLinkCache, NetworkModel
from .units import bits
from .vnffg import GraphNode, Request, VnfType, expected_loop_iterations, vnf_catalog

EPS = 1e-9

# constraint ids follow the usual numbering of the placement model
NODE_CAPACITY = 19
NODE_LINK = 20
USER_LINK = 21
INSTANCE_CAPACITY = 22
ASSIGNED_DEPLOYED = 23
TYPE_DEPLOYED = 24


@dataclass
class Placement:
    """``deployed[(t, i)] = n`` and ``assigned[(R, t)] = (i, n)``."""

    deployed: dict[tuple[int, int], int] = field(default_factory=dict)
    assigned: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)

    def copy(self) -> "Placement":
        return Placement(dict(self.deployed), dict(self.assigned))

    def node_of(self, request_id: int, type_id: int) -> int:
        try:
            return self.assigned[(request_id, type_id)][1]
        except KeyError:
            raise UnassignedVnf(f"request {request_id} has no instance of type {type_id}") from None

    def users_of(self, t: int, i: int) -> list[int]:
        return sorted(r for (r, tt), (ii, _) in self.assigned.items() if tt == t and ii == i)

    def instances_on(self, n: int) -> list[tuple[int, int]]:
        return sorted(k for k, m in self.deployed.items() if m == n)

    def key(self):
        return (tuple(sorted(self.deployed.items())), tuple(sorted(self.assigned.items())))

    def __eq__(self, other):
        return isinstance(other, Placement) and self.key() == other.key()

    def to_doc(self) -> dict:
        return {
            "deployed": [[t, i, n] for (t, i), n in sorted(self.deployed.items())],
            "assigned": [[r, t, i, n] for (r, t), (i, n) in sorted(self.assigned.items())],
        }

    @classmethod
    def from_doc(cls, doc) -> "Placement":
        deployed = {(int(t), int(i)): int(n) for t, i, n in doc.get("deployed", [])}
        assigned = {(int(r), int(t)): (int(i), int(n)) for r, t, i, n in doc.get("assigned", [])}
        return cls(deployed, assigned)


@dataclass(frozen=True)
class Weights:
    alpha: float = 0.5
    makespan_norm: float = 1.0  # seconds per reported makespan unit
    cost_norm: float = 1.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.makespan_norm <= 0 or self.cost_norm <= 0:
            raise DomainError("normalisers must be positive")

    @property
    def time_weight(self):
        return self.alpha / self.makespan_norm

    @property
    def cost_weight(self):
        return (1 - self.alpha) / self.cost_norm


@dataclass(frozen=True)
class Violation:
    constraint: int
    subject: tuple
    g: float
    b: float

    @property
    def excess(self) -> float:
        return max(0.0, self.g - self.b)


# --------------------------------------------------------------------------
# per-VNF quantities
# --------------------------------------------------------------------------

def vnf_processing_time(placement: Placement, request: Request, vnf: int, network: NetworkModel) -> float:
    n = placement.node_of(request.id, vnf)
    return request.traffic_in[vnf] * network.nodes[n].delay_for(vnf)


def _user_links(cache: ExpectedLinkCache, request: Request):
    return cache.users(request.users) if request.users else None


def vnf_communication_time(placement: Placement, request: Request, vnf: int,
                           cache: ExpectedLinkCache, users=None) -> float:
    n = placement.node_of(request.id, vnf)
    A = request.traffic_in[vnf]
    ip = sum(cache.delay(placement.node_of(request.id, p), n, A) for p in sorted(request.predecessors[vnf]))
    links = request.iot_links[vnf]
    iot = 0.0
    if links:
        ul = users if users is not None else _user_links(cache, request)
        iot = sum(a * ul.sec_per_byte[n, u] + ul.lat[n, u] for u, a in links)
    return max(ip, iot)


def vnf_communication_cost(placement: Placement, request: Request, vnf: int,
                           cache: ExpectedLinkCache, users=None) -> float:
    n = placement.node_of(request.id, vnf)
    A = request.traffic_in[vnf]
    total = sum(A * cache.cost[placement.node_of(request.id, p), n] for p in sorted(request.predecessors[vnf]))
    links = request.iot_links[vnf]
    if links:
        ul = users if users is not None else _user_links(cache, request)
        total += sum(a * ul.cost[n, u] for u, a in links)
    return total


def aggregate(kind: str, child_metrics: Sequence[tuple[float, float, float]],
              sel_probs: Sequence[float] | None = None, q: float | None = None):
    """Combine children's (proc_time, comm_time, comm_cost) into the parent's."""
    if not child_metrics:
        raise DomainError("aggregate needs at least one child")
    if kind == "seq":
        return tuple(math.fsum(c[k] for c in child_metrics) for k in range(3))
    if kind == "par":
        return (max(c[0] for c in child_metrics), max(c[1] for c in child_metrics),
                math.fsum(c[2] for c in child_metrics))
    if kind == "sel":
        if sel_probs is None or len(sel_probs) != len(child_metrics):
            raise DomainError("sel aggregation needs one probability per child")
        return tuple(math.fsum(h * c[k] for h, c in zip(sel_probs, child_metrics)) for k in range(3))
    if kind == "loop":
        it = expected_loop_iterations(q)
        return tuple(it * math.fsum(c[k] for c in child_metrics) for k in range(3))
    raise DomainError(f"unknown sub-structure {kind!r}")


def _tree_metrics(placement, request, network, cache):
    users = _user_links(cache, request)

    def walk(node: GraphNode):
        if node.kind == "leaf":
            t = node.vnf.id
            return (vnf_processing_time(placement, request, t, network),
                    vnf_communication_time(placement, request, t, cache, users),
                    vnf_communication_cost(placement, request, t, cache, users))
        return aggregate(node.kind, [walk(c) for c in node.children], node.sel_probs, node.loop_prob)

    return walk(request.root)


def request_makespan(placement: Placement, request: Request, cache: ExpectedLinkCache) -> float:
    proc, comm, _ = _tree_metrics(placement, request, cache.network, cache)
    return proc + comm


def request_cost(placement: Placement, request: Request, cache: ExpectedLinkCache) -> float:
    return _tree_metrics(placement, request, cache.network, cache)[2]


def deployment_cost(placement: Placement, network: NetworkModel,
                    types: Mapping[int, VnfType]) -> tuple[float, float]:
    """(license cost, hosting cost) of every deployed instance."""
    lic = hst = 0.0
    for (t, _), n in sorted(placement.deployed.items()):
        vt = types[t]
        lic += vt.license_cost
        hst += network.nodes[n].unit_cost * vt.resource_req
    return lic, hst


def objective(makespan_sum: float, cost_sum: float, deploy_cost: float, alpha: float | Weights) -> float:
    w = alpha if isinstance(alpha, Weights) else Weights(alpha)
    return w.time_weight * makespan_sum + w.cost_weight * (cost_sum + deploy_cost)


def penalty(violations: Iterable[Violation], obj_scale: float) -> float:
    # >=-type constraints are stored with |b| as their scale
    return math.fsum(obj_scale / max(abs(v.b), EPS) * v.excess for v in violations)


# --------------------------------------------------------------------------
# compiled evaluator
# --------------------------------------------------------------------------

@dataclass
class _Leaf:
    t: int
    A: float
    weight: float
    preds: tuple[int, ...]  # leaf indices
    delay: np.ndarray  # processing seconds per node
    iot_time: np.ndarray  # per node
    iot_cost: np.ndarray
    users: tuple[tuple[int, float], ...]
    traffic: float  # execution-weighted bytes handled by the instance


@dataclass
class _Program:
    request: Request
    leaves: list[_Leaf]
    ops: list  # post-order: ("leaf", k) or (kind, n_children, probs, q)
    user_bw: np.ndarray | None  # expected bandwidth, (nodes, users)


@dataclass
class RequestEval:
    makespan: float
    cost: float
    pair_loads: tuple[tuple[tuple[int, int], float], ...]
    user_violations: tuple[Violation, ...]


@dataclass
class EvaluationReport:
    makespans: tuple[float, ...]
    costs: tuple[float, ...]
    license_cost: float
    hosting_cost: float
    objective: float
    violations: tuple[Violation, ...]
    penalty: float
    fitness: float
    weights: Weights
    fog_usage: float = 0.0
    cloud_usage: float = 0.0

    @property
    def makespan_sum(self) -> float:
        return math.fsum(self.makespans)

    @property
    def cost_sum(self) -> float:
        return math.fsum(self.costs)

    @property
    def deployment_cost(self) -> float:
        return self.license_cost + self.hosting_cost

    @property
    def feasible(self) -> bool:
        return not self.violations

    def row(self) -> dict:
        return {
            "makespan_sum": self.makespan_sum,
            "cost_sum": self.cost_sum,
            "license_cost": self.license_cost,
            "hosting_cost": self.hosting_cost,
            "deployment_cost": self.deployment_cost,
            "objective": self.objective,
            "penalty": self.penalty,
            "fitness": self.fitness,
            "feasible": self.feasible,
            "violations": len(self.violations),
            "fog_usage": self.fog_usage,
            "cloud_usage": self.cloud_usage,
        }


class Evaluator:
    """Fitness of placements for one (network, requests, weights) triple.

    Request trees are compiled once; the per-request metrics are memoised on
    the tuple of hosting nodes, so a move only re-evaluates the requests it
    touches.
    """

    def __init__(self, network: NetworkModel, requests: Sequence[Request],
                 weights: Weights | float = Weights()):
        self.network = network
        self.requests = list(requests)
        self.weights = weights if isinstance(weights, Weights) else Weights(weights)
        self.cache = network.cache
        self.types = vnf_catalog(self.requests)
        self.required = sorted({t for r in self.requests for t in r.leaf_types})
        self.index = {r.id: k for k, r in enumerate(self.requests)}
        if len(self.index) != len(self.requests):
            raise DomainError("request ids must be unique")
        self.programs = [self._compile(r) for r in self.requests]
        self.memo: dict = {}
        self.evaluations = 0

    # -- compilation --
    def _compile(self, r: Request) -> _Program:
        N = len(self.network.nodes)
        ul = self.cache.users(r.users) if r.users else None
        pos = {t: k for k, t in enumerate(r.leaf_types)}
        leaves = []
        for t in r.leaf_types:
            links = r.iot_links[t]
            iot_time = np.zeros(N)
            iot_cost = np.zeros(N)
            for u, a in links:
                iot_time += a * ul.sec_per_byte[:, u] + ul.lat[:, u]
                iot_cost += a * ul.cost[:, u]
            delay = np.array([nd.delay_for(t) for nd in self.network.nodes])
            w = r.execution_weights[t]
            A = r.traffic_in[t]
            leaves.append(_Leaf(
                t=t, A=A, weight=w,
                preds=tuple(pos[p] for p in sorted(r.predecessors[t])),
                delay=delay, iot_time=iot_time, iot_cost=iot_cost, users=links,
                traffic=w * (A + math.fsum(a for _, a in links)),
            ))
        ops = []

        def walk(node):
            if node.kind == "leaf":
                ops.append(("leaf", pos[node.vnf.id]))
                return
            for c in node.children:
                walk(c)
            ops.append((node.kind, len(node.children), node.sel_probs, node.loop_prob))

        walk(r.root)
        return _Program(r, leaves, ops, ul.bw if ul is not None else None)

    # -- per request --
    def nodes_of(self, placement: Placement, k: int) -> tuple[int, ...]:
        r = self.requests[k]
        return tuple(placement.node_of(r.id, t) for t in r.leaf_types)

    def request_eval(self, k: int, nodes: tuple[int, ...]) -> RequestEval:
        key = (k, nodes)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        prog = self.programs[k]
        c = self.cache
        metrics = []
        loads: dict[tuple[int, int], float] = {}
        for leaf, n in zip(prog.leaves, nodes):
            ip_time = ip_cost = 0.0
            for p in leaf.preds:
                m = nodes[p]
                ip_time += leaf.A * c.sec_per_byte[m, n] + c.lat[m, n]
                ip_cost += leaf.A * c.cost[m, n]
                if m != n:
                    loads[(m, n)] = loads.get((m, n), 0.0) + leaf.weight * bits(leaf.A)
            metrics.append((leaf.A * leaf.delay[n], max(ip_time, leaf.iot_time[n]),
                            ip_cost + leaf.iot_cost[n]))
        stack = []
        for op in prog.ops:
            if op[0] == "leaf":
                stack.append(metrics[op[1]])
                continue
            kind, nc, probs, q = op
            children = stack[-nc:]
            del stack[-nc:]
            stack.append(aggregate(kind, children, probs, q))
        proc, comm, cost = stack[0]

        user_viol = []
        if prog.user_bw is not None:
            uload: dict[tuple[int, int], float] = {}
            for leaf, n in zip(prog.leaves, nodes):
                for u, a in leaf.users:
                    uload[(n, u)] = uload.get((n, u), 0.0) + leaf.weight * bits(a)
            for (n, u), g in sorted(uload.items()):
                b = self.network.user_class(n).bw_threshold * prog.user_bw[n, u]
                if g > b:
                    user_viol.append(Violation(USER_LINK, (prog.request.id, n, u), g, b))
        out = RequestEval(proc + comm, cost, tuple(sorted(loads.items())), tuple(user_viol))
        self.memo[key] = out
        return out

    # -- whole placement --
    def parts(self, placement: Placement):
        evals = [self.request_eval(k, self.nodes_of(placement, k)) for k in range(len(self.requests))]
        lic, hst = deployment_cost(placement, self.network, self.types)
        obj = objective(math.fsum(e.makespan for e in evals), math.fsum(e.cost for e in evals),
                        lic + hst, self.weights)
        return evals, lic, hst, obj

    def violations(self, placement: Placement, evals=None) -> list[Violation]:
        net = self.network
        if evals is None:
            evals = [self.request_eval(k, self.nodes_of(placement, k)) for k in range(len(self.requests))
                     if all((r.id, t) in placement.assigned for r in self.requests[k:k + 1] for t in r.leaf_types)]
        out: list[Violation] = []

        used = [0.0] * len(net.nodes)
        for (t, _), n in placement.deployed.items():
            used[n] += self.types[t].resource_req if t in self.types else 0.0
        for n, g in enumerate(used):
            b = net.nodes[n].budget
            if g > b + EPS:
                out.append(Violation(NODE_CAPACITY, (n,), g, b))

        loads: dict[tuple[int, int], float] = {}
        for e in evals:
            for key, v in e.pair_loads:
                loads[key] = loads.get(key, 0.0) + v
        for (m, n), g in sorted(loads.items()):
            b = net.link_class(m, n).bw_threshold * self.cache.bw[m, n]
            if g > b:
                out.append(Violation(NODE_LINK, (m, n), g, b))

        for e in evals:
            out.extend(e.user_violations)

        inst: dict[tuple[int, int], float] = {}
        for k, prog in enumerate(self.programs):
            rid = prog.request.id
            for leaf in prog.leaves:
                if (rid, leaf.t) not in placement.assigned:
                    continue
                i, n = placement.assigned[(rid, leaf.t)]
                inst[(leaf.t, i)] = inst.get((leaf.t, i), 0.0) + leaf.traffic
                if placement.deployed.get((leaf.t, i)) != n:
                    out.append(Violation(ASSIGNED_DEPLOYED, (rid, leaf.t, i, n), 1.0, 0.0))
        for (t, i), g in sorted(inst.items()):
            vt = self.types[t]
            b = vt.util_threshold * vt.capacity
            if g > b:
                out.append(Violation(INSTANCE_CAPACITY, (t, i), g, b))

        have = {t for (t, _) in placement.deployed}
        for t in self.required:
            if t not in have:
                # count >= 1 written as -count <= -1
                out.append(Violation(TYPE_DEPLOYED, (t,), 0.0, -1.0))
        return out

    def fitness(self, placement: Placement, obj_scale: float | None = None) -> float:
        self.evaluations += 1
        evals, _, _, obj = self.parts(placement)
        viol = self.violations(placement, evals)
        if not viol:
            return obj
        return obj + penalty(viol, obj if obj_scale is None else obj_scale)

    def report(self, placement: Placement, obj_scale: float | None = None) -> EvaluationReport:
        evals, lic, hst, obj = self.parts(placement)
        viol = tuple(self.violations(placement, evals))
        pen = penalty(viol, obj if obj_scale is None else obj_scale) if viol else 0.0
        fog, cloud = usage_percentages(placement, self.network, self.types)
        return EvaluationReport(
            makespans=tuple(e.makespan for e in evals),
            costs=tuple(e.cost for e in evals),
            license_cost=lic, hosting_cost=hst, objective=obj,
            violations=viol, penalty=pen, fitness=obj + pen, weights=self.weights,
            fog_usage=fog, cloud_usage=cloud,
        )


def usage_percentages(placement: Placement, network: NetworkModel,
                      types: Mapping[int, VnfType]) -> tuple[float, float]:
    """Share (in %) of deployed vCPUs sitting on fog and on cloud nodes."""
    per_tier = {"fog": 0.0, "cloud": 0.0}
    for (t, _), n in placement.deployed.items():
        per_tier[network.nodes[n].tier] += types[t].resource_req
    total = per_tier["fog"] + per_tier["cloud"]
    if total == 0:
        return 0.0, 0.0
    return 100.0 * per_tier["fog"] / total, 100.0 * per_tier["cloud"] / total


def check_constraints(placement: Placement, network: NetworkModel,
                      requests: Sequence[Request]) -> list[Violation]:
    return Evaluator(network, requests).violations(placement)


def fitness(placement: Placement, network: NetworkModel, requests: Sequence[Request],
            alpha: float | Weights = 0.5, obj_scale: float | None = None) -> EvaluationReport:
    """Full report; ``obj_scale`` defaults to the placement's own objective."""
    return Evaluator(network, requests, alpha).report(placement, obj_scale)
