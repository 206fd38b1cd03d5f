"""Initial placement and the four neighbourhood moves of the Tabu search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import NoMoveAvailable
from ..evaluator import EPS, Evaluator, Placement
from ..infra import NetworkModel
from ..vnffg import Request, vnf_catalog

MOVE_KINDS = ("vnf_reassign", "bulk_vnf_reassign", "request_reassign", "bulk_request_reassign")


def initial_placement(network: NetworkModel, requests: Sequence[Request], seed: int = 0) -> Placement:
    """One instance per required type: IoT-facing types on random fog nodes, the rest on random cloud nodes.

    Nodes without room for the type are skipped; when no preferred node fits the
    type goes to any node with room, and failing that to any node at all.
    """
    rng = np.random.default_rng([seed, 1])
    types = vnf_catalog(requests)
    iot = {t for r in requests for t in r.iot_types}
    used = [0.0] * len(network.nodes)
    p = Placement()
    for t in sorted(types):
        need = types[t].resource_req
        tier = "fog" if t in iot else "cloud"
        pools = [
            [n.id for n in network.nodes if n.tier == tier and used[n.id] + need <= n.budget + EPS],
            [n.id for n in network.nodes if used[n.id] + need <= n.budget + EPS],
            [n.id for n in network.nodes],
        ]
        pool = next(x for x in pools if x)
        n = pool[int(rng.integers(len(pool)))]
        used[n] += need
        p.deployed[(t, 0)] = n
    for r in requests:
        for t in r.leaf_types:
            p.assigned[(r.id, t)] = (0, p.deployed[(t, 0)])
    return p


@dataclass
class Move:
    kind: str
    subject: tuple
    source: object
    target: object
    # (table, key, before, after); None means absent
    changes: list = field(default_factory=list, repr=False)

    @property
    def attribute(self):
        return (self.kind, self.subject, self.source)

    @property
    def reversal(self):
        """Attribute a stored entry must have to forbid this move."""
        return (self.kind, self.subject, self.target)

    def _set(self, placement, table, key, value):
        d = placement.deployed if table == "d" else placement.assigned
        if value is None:
            d.pop(key, None)
        else:
            d[key] = value

    def apply(self, placement: Placement):
        for table, key, _, after in self.changes:
            self._set(placement, table, key, after)

    def revert(self, placement: Placement):
        for table, key, before, _ in reversed(self.changes):
            self._set(placement, table, key, before)


class MoveContext:
    """Precomputed data for proposing and scoring moves."""

    def __init__(self, evaluator: Evaluator, random_targets: bool = False, successors: bool = True):
        self.ev = evaluator
        self.random_targets = random_targets
        self.successors = successors
        net = evaluator.network
        self.N = len(net.nodes)
        self.budget = np.array([n.budget for n in net.nodes])
        self.unit_cost = np.array([n.unit_cost for n in net.nodes])
        self.leaf = {}  # (R, t) -> (program index, leaf)
        for k, prog in enumerate(evaluator.programs):
            for leaf in prog.leaves:
                self.leaf[(prog.request.id, leaf.t)] = (k, leaf)
        self.request_ids = [r.id for r in evaluator.requests]
        self.succ = []
        for prog in evaluator.programs:
            out = [[] for _ in prog.leaves]
            for k, leaf in enumerate(prog.leaves):
                for q in leaf.preds:
                    out[q].append(k)
            self.succ.append(out)

    # -- state summaries --
    def index(self, p: Placement):
        used = np.zeros(self.N)
        for (t, _), n in p.deployed.items():
            used[n] += self.ev.types[t].resource_req
        users: dict[tuple[int, int], list[int]] = {k: [] for k in p.deployed}
        load: dict[tuple[int, int], float] = {}
        for (r, t), (i, _) in sorted(p.assigned.items()):
            users.setdefault((t, i), []).append(r)
            load[(t, i)] = load.get((t, i), 0.0) + self.leaf[(r, t)][1].traffic
        return used, users, load

    # -- scoring --
    def score(self, p: Placement, pairs, hosted_types=()) -> np.ndarray:
        """Weighted cost of hosting the given (R, t) assignments on each node.

        Counts processing time, communication time and cost with immediate
        predecessors (at their current nodes) and IoT users, plus the hosting
        cost of ``hosted_types``.
        """
        w = self.ev.weights
        c = self.ev.cache
        total = np.zeros(self.N)
        for r, t in pairs:
            k, leaf = self.leaf[(r, t)]
            prog = self.ev.programs[k]
            ip_time = np.zeros(self.N)
            ip_cost = np.zeros(self.N)
            for q in leaf.preds:
                m = p.assigned[(r, prog.leaves[q].t)][1]
                ip_time += leaf.A * c.sec_per_byte[m] + c.lat[m]
                ip_cost += leaf.A * c.cost[m]
            time = leaf.A * leaf.delay + np.maximum(ip_time, leaf.iot_time)
            total += leaf.weight * (w.time_weight * time + w.cost_weight * (ip_cost + leaf.iot_cost))
            if not self.successors:
                continue
            pos = next(q for q, lf in enumerate(prog.leaves) if lf is leaf)
            for q in self.succ[k][pos]:
                nxt = prog.leaves[q]
                m = p.assigned[(r, nxt.t)][1]
                total += nxt.weight * (w.time_weight * (nxt.A * c.sec_per_byte[:, m] + c.lat[:, m])
                                       + w.cost_weight * nxt.A * c.cost[:, m])
        for t in hosted_types:
            total += w.cost_weight * self.unit_cost * self.ev.types[t].resource_req
        return total

    def pick(self, rng, candidates, scores):
        """Index into ``candidates`` of the chosen target."""
        if self.random_targets:
            return int(rng.integers(len(candidates))) if len(candidates) > 1 else 0
        # lowest score, ties to the earliest (lowest id) candidate
        return int(np.argmin(scores))


def _reassign_changes(p: Placement, t: int, i: int, new_i: int, new_n: int, requests):
    ch = []
    for r in requests:
        ch.append(("a", (r, t), p.assigned[(r, t)], (new_i, new_n)))
    return ch


def _vnf_reassign(p, rng, ctx: MoveContext, used, users, load):
    keys = sorted(p.deployed)
    if not keys:
        return None
    t, i = keys[int(rng.integers(len(keys)))]
    src = p.deployed[(t, i)]
    need = ctx.ev.types[t].resource_req
    targets = [n for n in range(ctx.N) if n != src and used[n] + need <= ctx.budget[n] + EPS]
    if not targets:
        return None
    rs = users.get((t, i), [])
    s = ctx.score(p, [(r, t) for r in rs], (t,))
    n = targets[ctx.pick(rng, targets, s[targets])]
    ch = [("d", (t, i), src, n)] + _reassign_changes(p, t, i, i, n, rs)
    return Move("vnf_reassign", (t, i), src, n, ch)


def _bulk_vnf_reassign(p, rng, ctx: MoveContext, used, users, load):
    hosts = sorted(set(p.deployed.values()))
    if not hosts:
        return None
    src = hosts[int(rng.integers(len(hosts)))]
    inst = p.instances_on(src)
    need = sum(ctx.ev.types[t].resource_req for t, _ in inst)
    targets = [n for n in range(ctx.N) if n != src and used[n] + need <= ctx.budget[n] + EPS]
    if not targets:
        return None
    pairs = [(r, t) for t, i in inst for r in users.get((t, i), [])]
    s = ctx.score(p, pairs, [t for t, _ in inst])
    n = targets[ctx.pick(rng, targets, s[targets])]
    ch = []
    for t, i in inst:
        ch.append(("d", (t, i), src, n))
        ch += _reassign_changes(p, t, i, i, n, users.get((t, i), []))
    return Move("bulk_vnf_reassign", tuple(inst), src, n, ch)


def _instance_targets(p, ctx: MoveContext, t, i, extra_load, src_node, used, load):
    """Other instances of type t that could absorb ``extra_load`` bytes.

    Returns (instance, node, is_new) triples; undeployed instances may be
    instantiated on any node other than ``src_node`` with room for the type.
    """
    vt = ctx.ev.types[t]
    out = []
    for j in range(vt.instance_count):
        if j == i:
            continue
        if (t, j) in p.deployed:
            if load.get((t, j), 0.0) + extra_load <= vt.util_threshold * vt.capacity:
                out.append((j, p.deployed[(t, j)], False))
        elif extra_load <= vt.util_threshold * vt.capacity:
            for n in range(ctx.N):
                if n != src_node and used[n] + vt.resource_req <= ctx.budget[n] + EPS:
                    out.append((j, n, True))
            break  # one fresh instance id is enough
    return out


def _instance_move(p, rng, ctx, kind, subject, t, i, rs, used, users, load):
    src_node = p.deployed.get((t, i), p.assigned[(rs[0], t)][1])
    extra = sum(ctx.leaf[(r, t)][1].traffic for r in rs)
    targets = _instance_targets(p, ctx, t, i, extra, src_node, used, load)
    if not targets:
        return None
    base = ctx.score(p, [(r, t) for r in rs])
    hosting = ctx.ev.weights.cost_weight * ctx.unit_cost * ctx.ev.types[t].resource_req
    scores = np.array([base[n] + (hosting[n] if new else 0.0) for _, n, new in targets])
    j, n, new = targets[ctx.pick(rng, targets, scores)]
    ch = []
    if new:
        ch.append(("d", (t, j), None, n))
    ch += _reassign_changes(p, t, i, j, n, rs)
    if set(users.get((t, i), [])) <= set(rs) and (t, i) in p.deployed:
        # the old instance has no users left
        ch.append(("d", (t, i), p.deployed[(t, i)], None))
    return Move(kind, subject, i, j, ch)


def _request_reassign(p, rng, ctx: MoveContext, used, users, load):
    rid = ctx.request_ids[int(rng.integers(len(ctx.request_ids)))]
    prog = ctx.ev.programs[ctx.ev.index[rid]]
    t = prog.leaves[int(rng.integers(len(prog.leaves)))].t
    i, _ = p.assigned[(rid, t)]
    return _instance_move(p, rng, ctx, "request_reassign", (rid, t), t, i, [rid], used, users, load)


def _bulk_request_reassign(p, rng, ctx: MoveContext, used, users, load):
    keys = sorted(k for k in p.deployed if users.get(k))
    if not keys:
        return None
    t, i = keys[int(rng.integers(len(keys)))]
    return _instance_move(p, rng, ctx, "bulk_request_reassign", (t,), t, i, users[(t, i)], used, users, load)


_BUILDERS = {
    "vnf_reassign": _vnf_reassign,
    "bulk_vnf_reassign": _bulk_vnf_reassign,
    "request_reassign": _request_reassign,
    "bulk_request_reassign": _bulk_request_reassign,
}


def propose_moves(placement: Placement, rng, count: int, ctx: MoveContext,
                  kinds: Sequence[str] = MOVE_KINDS) -> list[Move]:
    """Up to ``count`` candidate moves; kinds drawn uniformly, dead draws skipped.

    Raises NoMoveAvailable when a generous number of draws yields nothing.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    used, users, load = ctx.index(placement)
    out = []
    attempts = 0
    while len(out) < count and attempts < 4 * count:
        attempts += 1
        kind = kinds[int(rng.integers(len(kinds)))]
        mv = _BUILDERS[kind](placement, rng, ctx, used, users, load)
        if mv is not None:
            out.append(mv)
        elif attempts >= count and out:
            break
    if not out:
        raise NoMoveAvailable("no move has a capacity-respecting target")
    return out
