"""VNF types, structured VNF forwarding-graph trees and the fork-join workload generator.

A request is a tree whose middle nodes are sub-structures (``seq``, ``par``,
``sel``, ``loop``) and whose leaves are VNFs. Every VNF type appears at most
once per request, so a leaf is identified by its type id inside a request.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, InfeasibleShape, MalformedTree, UnknownVnf
from .units import GB, KB

MIDDLE_KINDS = ("seq", "par", "sel", "loop")
NODE_KINDS = ("leaf",) + MIDDLE_KINDS

PROB_TOL = 1e-9


@dataclass(frozen=True)
class VnfType:
    id: int
    resource_req: float  # vCPU per instance
    capacity: float  # bytes an instance may process
    license_cost: float = 100.0
    util_threshold: float = 1.0
    instance_count: int = 2
    name: str = ""

    def __post_init__(self):
        if self.resource_req <= 0:
            raise DomainError(f"VNF type {self.id}: resource_req must be > 0")
        if self.capacity <= 0:
            raise DomainError(f"VNF type {self.id}: capacity must be > 0")
        if not 0 < self.util_threshold <= 1:
            raise DomainError(f"VNF type {self.id}: util_threshold must be in (0, 1]")
        if self.instance_count < 1:
            raise DomainError(f"VNF type {self.id}: instance_count must be >= 1")

    @property
    def label(self):
        return self.name or f"f{self.id}"


@dataclass(frozen=True)
class GraphNode:
    kind: str
    vnf: VnfType | None = None
    children: tuple[GraphNode, ...] = ()
    sel_probs: tuple[float, ...] | None = None
    loop_prob: float | None = None

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise MalformedTree(f"unknown node kind {self.kind!r}")
        if self.kind == "leaf":
            if self.vnf is None:
                raise MalformedTree("leaf without a VNF type")
            if self.children:
                raise MalformedTree("leaf nodes cannot have children")
            return
        if len(self.children) < 2:
            raise MalformedTree(f"{self.kind} node needs at least two children, got {len(self.children)}")
        if self.kind == "sel":
            if self.sel_probs is None or len(self.sel_probs) != len(self.children):
                raise MalformedTree("sel node needs one probability per child")
            if any(p < 0 for p in self.sel_probs):
                raise MalformedTree("sel probabilities must be nonnegative")
            if abs(math.fsum(self.sel_probs) - 1.0) > PROB_TOL:
                raise MalformedTree(f"sel probabilities sum to {math.fsum(self.sel_probs):.6g}, not 1")
        if self.kind == "loop":
            if self.loop_prob is None or not 0 <= self.loop_prob < 1:
                raise MalformedTree(f"loop probability must lie in [0, 1), got {self.loop_prob}")

    def leaves(self) -> Iterator[GraphNode]:
        if self.kind == "leaf":
            yield self
            return
        for child in self.children:
            yield from child.leaves()

    def branch_weights(self) -> tuple[float, ...]:
        """Weight of each child in the Table-II style aggregation of this node."""
        if self.kind == "sel":
            return tuple(self.sel_probs)
        if self.kind == "loop":
            it = expected_loop_iterations(self.loop_prob)
            return (it,) * len(self.children)
        return (1.0,) * len(self.children)

    def height(self) -> int:
        """Number of VNFs on the longest root-to-sink execution path."""
        if self.kind == "leaf":
            return 1
        hs = [c.height() for c in self.children]
        return sum(hs) if self.kind in ("seq", "loop") else max(hs)


# Small constructors, mostly for tests and hand-built requests.
def leaf(vnf: VnfType) -> GraphNode:
    return GraphNode("leaf", vnf=vnf)


def seq(*children: GraphNode) -> GraphNode:
    return GraphNode("seq", children=tuple(children))


def par(*children: GraphNode) -> GraphNode:
    return GraphNode("par", children=tuple(children))


def sel(*children: GraphNode, probs: Sequence[float] | None = None) -> GraphNode:
    if probs is None:
        probs = [1.0 / len(children)] * len(children)
    return GraphNode("sel", children=tuple(children), sel_probs=tuple(float(p) for p in probs))


def loop(*children: GraphNode, q: float) -> GraphNode:
    return GraphNode("loop", children=tuple(children), loop_prob=float(q))


def expected_loop_iterations(q: float) -> float:
    """Expected extra iterations of a loop whose back edge is taken with probability ``q``."""
    if q is None or not 0 <= q < 1:
        raise DomainError(f"loop probability must lie in [0, 1), got {q}")
    return q / (1.0 - q)


@dataclass(frozen=True)
class Request:
    """One structured VNF-FG request.

    ``traffic_in`` maps a VNF type id to the bytes it receives from its
    immediate predecessors (shared by all of them). ``iot_traffic`` maps
    ``(user index, type id)`` to the bytes exchanged with that IoT/end-user;
    a key is present exactly when the user talks to that VNF.
    """

    id: int
    root: GraphNode
    traffic_in: Mapping[int, float]
    users: tuple[tuple[float, float], ...] = ()
    iot_traffic: Mapping[tuple[int, int], float] = field(default_factory=dict)

    @cached_property
    def leaf_types(self) -> tuple[int, ...]:
        return tuple(node.vnf.id for node in self.root.leaves())

    @cached_property
    def types(self) -> dict[int, VnfType]:
        return {node.vnf.id: node.vnf for node in self.root.leaves()}

    @property
    def required_types(self) -> frozenset[int]:
        return frozenset(self.leaf_types)

    @cached_property
    def predecessors(self) -> dict[int, frozenset[int]]:
        out: dict[int, frozenset[int]] = {}
        _walk_predecessors(self.root, frozenset(), out)
        return out

    @cached_property
    def execution_weights(self) -> dict[int, float]:
        """Expected number of executions of each VNF (sel probabilities and loop counts multiplied down)."""
        out: dict[int, float] = {}

        def walk(node, w):
            if node.kind == "leaf":
                out[node.vnf.id] = w
                return
            for child, bw in zip(node.children, node.branch_weights()):
                walk(child, w * bw)

        walk(self.root, 1.0)
        return out

    @cached_property
    def iot_links(self) -> dict[int, tuple[tuple[int, float], ...]]:
        """type id -> ((user index, bytes), ...) in user order."""
        links: dict[int, list[tuple[int, float]]] = {t: [] for t in self.leaf_types}
        for (u, t), a in sorted(self.iot_traffic.items()):
            links[t].append((u, a))
        return {t: tuple(v) for t, v in links.items()}

    def iot_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """The l x k communication (0/1) and traffic matrices, columns in leaf order."""
        col = {t: k for k, t in enumerate(self.leaf_types)}
        omega = np.zeros((len(self.users), len(col)))
        traffic = np.zeros_like(omega)
        for (u, t), a in self.iot_traffic.items():
            omega[u, col[t]] = 1.0
            traffic[u, col[t]] = a
        return omega, traffic

    @property
    def iot_types(self) -> frozenset[int]:
        return frozenset(t for (_, t) in self.iot_traffic)


def _walk_predecessors(node, preds, out):
    # returns the set of VNFs whose output leaves this sub-structure
    if node.kind == "leaf":
        out[node.vnf.id] = preds
        return frozenset({node.vnf.id})
    if node.kind in ("seq", "loop"):
        current = preds
        for child in node.children:
            current = _walk_predecessors(child, current, out)
        return current
    exits = set()
    for child in node.children:
        exits |= _walk_predecessors(child, preds, out)
    return frozenset(exits)


def immediate_predecessors(request: Request, vnf: int | VnfType) -> frozenset[int]:
    t = vnf.id if isinstance(vnf, VnfType) else vnf
    try:
        return request.predecessors[t]
    except KeyError:
        raise UnknownVnf(f"VNF type {t} is not a leaf of request {request.id}") from None


def vnf_catalog(requests: Sequence[Request]) -> dict[int, VnfType]:
    """Union of the VNF types used by ``requests``; a type id must mean the same type everywhere."""
    catalog: dict[int, VnfType] = {}
    for r in requests:
        for t, vt in r.types.items():
            if catalog.setdefault(t, vt) != vt:
                raise MalformedTree(f"type id {t} is declared with two different definitions")
    return dict(sorted(catalog.items()))


# --------------------------------------------------------------------------
# construction from nested documents
# --------------------------------------------------------------------------

def node_from_spec(spec, types: Mapping[int, VnfType] | None = None) -> GraphNode:
    """Build a GraphNode from a nested dict ``{"kind": ..., "children": [...], ...}``.

    Leaves are ``{"kind": "leaf", "vnf": <type id>}``; when ``types`` is given the
    id is resolved against it, otherwise a default VnfType is created.
    """
    if isinstance(spec, GraphNode):
        return spec
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise MalformedTree(f"tree node must be a mapping with a 'kind' key, got {spec!r}")
    kind = spec["kind"]
    if kind == "leaf":
        ref = spec.get("vnf")
        if isinstance(ref, VnfType):
            return leaf(ref)
        if types is None:
            return leaf(VnfType(id=int(ref), resource_req=1.0, capacity=GB))
        if ref not in types:
            raise MalformedTree(f"leaf references undeclared VNF type {ref!r}")
        return leaf(types[ref])
    children = tuple(node_from_spec(c, types) for c in spec.get("children", ()))
    probs = spec.get("sel_probs")
    return GraphNode(
        kind,
        children=children,
        sel_probs=tuple(float(p) for p in probs) if probs is not None else None,
        loop_prob=spec.get("loop_prob"),
    )


def node_to_spec(node: GraphNode) -> dict:
    if node.kind == "leaf":
        return {"kind": "leaf", "vnf": node.vnf.id}
    out = {"kind": node.kind, "children": [node_to_spec(c) for c in node.children]}
    if node.kind == "sel":
        out["sel_probs"] = list(node.sel_probs)
    if node.kind == "loop":
        out["loop_prob"] = node.loop_prob
    return out


def build_request(tree_spec, traffic_spec, iot_spec=None, *, request_id: int = 0,
                  types: Mapping[int, VnfType] | None = None) -> Request:
    """Validate and assemble a Request.

    ``traffic_spec`` is either one number (used for every VNF) or a mapping from
    type id to bytes. ``iot_spec`` holds ``users`` (list of [x, y]) and either
    ``links`` ([user, type, bytes] triples) or the ``omega``/``traffic``
    matrices with one column per leaf in traversal order.
    """
    root = node_from_spec(tree_spec, types)
    leaf_types = [n.vnf.id for n in root.leaves()]
    if len(set(leaf_types)) != len(leaf_types):
        raise MalformedTree("a VNF type appears more than once in one request")
    if types is not None:
        for n in root.leaves():
            if types.get(n.vnf.id) != n.vnf:
                raise MalformedTree(f"leaf type {n.vnf.id} is not declared")

    if isinstance(traffic_spec, (int, float)):
        traffic = {t: float(traffic_spec) for t in leaf_types}
    else:
        traffic = {int(t): float(a) for t, a in dict(traffic_spec).items()}
    missing = [t for t in leaf_types if t not in traffic]
    if missing:
        raise MalformedTree(f"no traffic given for VNF types {missing}")
    if any(a < 0 for a in traffic.values()):
        raise MalformedTree("traffic amounts must be nonnegative")
    traffic = {t: traffic[t] for t in leaf_types}

    users: tuple[tuple[float, float], ...] = ()
    iot: dict[tuple[int, int], float] = {}
    if iot_spec:
        users = tuple((float(x), float(y)) for x, y in iot_spec.get("users", ()))
        for x, y in users:
            if not (0 <= x <= 1 and 0 <= y <= 1):
                raise MalformedTree(f"user location ({x}, {y}) lies outside [0,1]^2")
        if "links" in iot_spec:
            for u, t, a in iot_spec["links"]:
                iot[(int(u), int(t))] = float(a)
        elif "omega" in iot_spec:
            omega = np.asarray(iot_spec["omega"], dtype=float)
            amount = np.asarray(iot_spec.get("traffic", omega), dtype=float)
            if omega.shape != (len(users), len(leaf_types)) or amount.shape != omega.shape:
                raise MalformedTree("IoT matrices must be (users x VNFs) in leaf order")
            if not np.array_equal(omega != 0, amount != 0):
                raise MalformedTree("communication and traffic matrices have different sparsity")
            for u, k in zip(*np.nonzero(omega)):
                iot[(int(u), leaf_types[k])] = float(amount[u, k])
        for (u, t), a in iot.items():
            if not 0 <= u < len(users):
                raise MalformedTree(f"IoT link references unknown user {u}")
            if t not in traffic:
                raise MalformedTree(f"IoT link references VNF type {t} outside the request")
            if a <= 0:
                raise MalformedTree("IoT traffic entries must be positive")
    return Request(id=request_id, root=root, traffic_in=traffic, users=users, iot_traffic=iot)


def request_to_spec(request: Request) -> dict:
    return {
        "id": request.id,
        "tree": node_to_spec(request.root),
        "traffic": {str(t): a for t, a in request.traffic_in.items()},
        "users": [list(u) for u in request.users],
        "links": [[u, t, a] for (u, t), a in sorted(request.iot_traffic.items())],
    }


def request_from_spec(spec: Mapping, types: Mapping[int, VnfType]) -> Request:
    return build_request(
        spec["tree"],
        {int(t): a for t, a in spec["traffic"].items()},
        {"users": spec.get("users", []), "links": spec.get("links", [])},
        request_id=int(spec.get("id", 0)),
        types=types,
    )


def type_to_spec(vt: VnfType) -> dict:
    return {
        "id": vt.id, "name": vt.name, "resource_req": vt.resource_req, "capacity": vt.capacity,
        "license_cost": vt.license_cost, "util_threshold": vt.util_threshold,
        "instance_count": vt.instance_count,
    }


# --------------------------------------------------------------------------
# synthetic workload
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkloadParams:
    vnfs: tuple[int, int] = (3, 10)
    heights: tuple[int, ...] = (2, 4, 6, 8)
    edge_ratios: tuple[float, ...] = (1.1, 1.3, 1.5, 1.7, 1.9)
    sel_ratios: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    traffic: tuple[float, float] = (100.0, 80 * KB)
    users: tuple[int, int] = (5, 30)
    iot_vnfs: tuple[int, int] = (1, 2)


# OpenStack tiny/small/medium/large flavours
FLAVOUR_VCPUS = (1, 1, 2, 4)


def generate_catalog(n_types: int, seed: int, *, instance_count: int = 2,
                     license_cost: float = 100.0) -> dict[int, VnfType]:
    rng = np.random.default_rng([seed, 0xCA7])
    out = {}
    for t in range(n_types):
        out[t] = VnfType(
            id=t,
            resource_req=float(rng.choice(FLAVOUR_VCPUS)),
            capacity=float(rng.uniform(1.0, 2.0)) * GB,
            license_cost=license_cost,
            instance_count=instance_count,
        )
    return out


def fork_degrees(n_vnfs: int, height: int, edge_ratio: float, rng) -> list[int]:
    """Out-degree of each of the ``height`` stages of a fork-join chain (1 = plain VNF).

    Step one spreads the ``n_vnfs - height`` extra VNFs over equal-degree splits;
    step two scales each split's degree by ``edge_ratio`` (rounded down, capped by
    the remaining budget) and drops the splits left without budget.
    """
    if not 1 <= height <= n_vnfs:
        raise InfeasibleShape(f"cannot build height {height} from {n_vnfs} VNFs")
    extra = n_vnfs - height
    degrees = [1] * height
    if extra == 0:
        return degrees
    n_split = min(height, extra)
    splits = sorted(int(s) for s in rng.choice(height, size=n_split, replace=False))
    base, rest = divmod(extra, n_split)
    for k, s in enumerate(splits):
        degrees[s] = 1 + base + (1 if k < rest else 0)

    budget = extra
    for s in rng.permutation(splits):
        want = max(2, math.floor(degrees[s] * edge_ratio))
        add = min(want - 1, budget)
        degrees[s] = 1 + add
        budget -= add
    # ratios below 1 can leave budget behind
    live = [s for s in splits if degrees[s] > 1] or splits[:1]
    k = 0
    while budget > 0:
        degrees[live[k % len(live)]] += 1
        budget -= 1
        k += 1
    return degrees


def generate_workload(count: int, seed: int, params: WorkloadParams | None = None,
                      types: Mapping[int, VnfType] | None = None) -> list[Request]:
    """``count`` loop-free fork-join requests, fully determined by ``seed``."""
    params = params or WorkloadParams()
    if types is None:
        types = generate_catalog(max(10, params.vnfs[1]), seed)
    type_ids = sorted(types)
    lo, hi = params.vnfs
    if lo > hi or lo < 1:
        raise InfeasibleShape(f"bad VNF count range {params.vnfs}")
    if hi > len(type_ids):
        raise InfeasibleShape(f"requests of {hi} VNFs need at least {hi} types, catalog has {len(type_ids)}")
    if not any(h <= hi for h in params.heights):
        raise InfeasibleShape(f"no height in {params.heights} fits at most {hi} VNFs")

    rng = np.random.default_rng(seed)
    out = []
    for rid in range(count):
        while True:
            n = int(rng.integers(lo, hi + 1))
            heights = [h for h in params.heights if h <= n]
            if heights:
                break
        h = int(rng.choice(heights))
        ratio = float(rng.choice(params.edge_ratios))
        degrees = fork_degrees(n, h, ratio, rng)
        chosen = [int(t) for t in rng.choice(type_ids, size=n, replace=False)]
        it = iter(chosen)
        stages = []
        for d in degrees:
            if d == 1:
                stages.append(leaf(types[next(it)]))
                continue
            branches = [leaf(types[next(it)]) for _ in range(d)]
            sel_ratio = float(rng.choice(params.sel_ratios))
            stages.append(sel(*branches) if rng.random() < sel_ratio else par(*branches))
        root = seq(*stages) if len(stages) > 1 else stages[0]

        t_lo, t_hi = params.traffic
        traffic = {t: float(rng.integers(int(t_lo), int(t_hi) + 1)) for t in chosen}
        n_users = int(rng.integers(params.users[0], params.users[1] + 1))
        users = [tuple(float(v) for v in rng.random(2)) for _ in range(n_users)]
        n_iot = min(n, int(rng.integers(params.iot_vnfs[0], params.iot_vnfs[1] + 1)))
        leaf_order = [node.vnf.id for node in root.leaves()]
        # the entry VNF always ingests sensor data
        facing = [leaf_order[0]] + [int(t) for t in rng.choice(leaf_order[1:], size=n_iot - 1, replace=False)]
        links = []
        for u in range(n_users):
            t = facing[int(rng.integers(len(facing)))]
            links.append((u, t, float(rng.integers(int(t_lo), int(t_hi) + 1))))
        out.append(build_request(root, traffic, {"users": users, "links": links},
                                 request_id=rid, types=types))
    return out
