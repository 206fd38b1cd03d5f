import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fogplace.evaluator import Evaluator, Placement, Weights, aggregate, fitness
from fogplace.infra import DEFAULT_LINK_CLASSES, link_metrics_at, preset_network
from fogplace.mobility import rwp_mobility_density
from fogplace.solvers import MoveContext, initial_placement, propose_moves
from fogplace.vnffg import fork_degrees, generate_workload, vnf_catalog

from oracles import naive_predecessors, naive_request

NET = preset_network("topology-10", 0)
REQS = generate_workload(12, 0)

unit = st.floats(0.0, 1.0, allow_nan=False)
metric = st.tuples(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e3))


def random_placement(reqs, net, seed):
    rng = np.random.default_rng(seed)
    p = Placement()
    for t in vnf_catalog(reqs):
        for i in range(2):
            p.deployed[(t, i)] = int(rng.integers(len(net)))
    for r in reqs:
        for t in r.leaf_types:
            i = int(rng.integers(2))
            p.assigned[(r.id, t)] = (i, p.deployed[(t, i)])
    return p


@settings(max_examples=100)
@given(st.integers(0, 10_000))
def test_bottom_up_equals_naive_recursion(seed):
    reqs = generate_workload(1, seed)
    r = reqs[0]
    assert {t: set(p) for t, p in r.predecessors.items()} == naive_predecessors(r)
    p = random_placement(reqs, NET, seed)
    rep = fitness(p, NET, reqs, 0.5)
    m, c = naive_request(p, r, NET)
    assert abs(rep.makespans[0] - m) <= 1e-9 * max(1.0, m)
    assert abs(rep.costs[0] - c) <= 1e-9 * max(1.0, c)


@given(st.integers(0, 10_000))
def test_objective_affine_in_alpha(seed):
    p = random_placement(REQS, NET, seed)
    obj = [Evaluator(NET, REQS, a).report(p).objective for a in (0.0, 0.5, 1.0)]
    assert abs(obj[1] - (obj[0] + obj[2]) / 2) <= 1e-9 * max(obj)


@given(st.integers(0, 10_000), unit)
def test_fitness_at_least_objective(seed, alpha):
    p = random_placement(REQS, NET, seed)
    rep = Evaluator(NET, REQS, Weights(alpha)).report(p)
    assert rep.penalty >= 0 and rep.fitness >= rep.objective
    assert (rep.fitness == rep.objective) == (rep.feasible or rep.penalty == 0)


@given(metric, st.integers(2, 5))
def test_par_never_slower_than_seq(m, k):
    children = [m] * k
    s = aggregate("seq", children)
    p = aggregate("par", children)
    assert p[0] <= s[0] and p[1] <= s[1] and p[2] == s[2]


@given(metric)
def test_single_certain_selection_is_identity(m):
    assert aggregate("sel", [m], (1.0,)) == tuple(float(v) for v in m)


@given(st.integers(0, 10_000), st.integers(1, 30))
def test_move_sequences_round_trip(seed, length):
    ctx = MoveContext(Evaluator(NET, REQS))
    rng = np.random.default_rng(seed)
    p = initial_placement(NET, REQS, seed)
    start = p.copy()
    applied = []
    for _ in range(length):
        mv = propose_moves(p, rng, 1, ctx)[0]
        mv.apply(p)
        applied.append(mv)
    for mv in reversed(applied):
        mv.revert(p)
    assert p == start
    assert p.key() == start.key()


@given(unit, unit)
def test_density_symmetric_and_nonnegative(x, y):
    f = rwp_mobility_density(x, y)
    assert f >= 0
    assert f == rwp_mobility_density(y, x)
    # 1 - x is itself rounded, so the reflection agrees to rounding only
    assert abs(f - rwp_mobility_density(1 - x, y)) <= 1e-12


@given(st.tuples(unit, unit), st.tuples(unit, unit), st.sampled_from(sorted(DEFAULT_LINK_CLASSES)))
def test_link_metrics_inside_class_ranges(X, Y, name):
    cls = DEFAULT_LINK_CLASSES[name]
    bw, lat, cost = link_metrics_at(cls, X, Y)
    assert cls.bw[0] - 1e-6 <= bw <= cls.bw[1] + 1e-6
    assert cls.lat[0] - 1e-12 <= lat <= cls.lat[1] + 1e-12
    assert cls.cost[0] - 1e-18 <= cost <= cls.cost[1] + 1e-18
    assert link_metrics_at(cls, Y, X) == (bw, lat, cost)


@given(st.integers(2, 10), st.data())
def test_fork_degrees_partition(n, data):
    h = data.draw(st.integers(1, n))
    ratio = data.draw(st.floats(0.5, 2.0))
    seed = data.draw(st.integers(0, 1000))
    d = fork_degrees(n, h, ratio, np.random.default_rng(seed))
    assert len(d) == h and sum(d) == n and min(d) >= 1
