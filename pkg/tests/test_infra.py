import math

import numpy as np
import pytest

from fogplace.errors import DomainError, SchemaError
from fogplace.infra import (DEFAULT_LINK_CLASSES, LinkClass, NetworkModel, NodeSpec, link_metrics_at, load_scenario,
                            normalised_distance, preset_network, transmission_delay)
from fogplace.mobility import MobilityProfile, expected_pair_metric
from fogplace.units import GB, GBPS, KB, KBPS, MS, MB, ms_per_mb


def node(i, tier, mob, cap=4.0):
    return NodeSpec(id=i, tier=tier, capacity=cap, unit_cost=5.0, proc_delay=ms_per_mb(25), mobility=mob)


def test_link_endpoints():
    cls = DEFAULT_LINK_CLASSES["fog-fog"]
    bw, lat, cost = link_metrics_at(cls, (0.3, 0.3), (0.3, 0.3))
    assert (bw, lat, cost) == (cls.bw[1], cls.lat[0], cls.cost[0])
    bw, lat, cost = link_metrics_at(cls, (0, 0), (1, 1))
    assert bw == pytest.approx(cls.bw[0]) and lat == pytest.approx(cls.lat[1]) and cost == pytest.approx(cls.cost[1])


def test_cloud_cloud_constants():
    cls = DEFAULT_LINK_CLASSES["cloud-cloud"]
    for X, Y in (((0, 0), (1, 1)), ((0.2, 0.9), (0.4, 0.1))):
        bw, _, cost = link_metrics_at(cls, X, Y)
        assert bw == 10 * GBPS
        assert cost * GB == pytest.approx(0.155)


def test_link_class_validation():
    with pytest.raises(DomainError):
        LinkClass("x", (2.0, 1.0), (0, 0), (0, 0))
    with pytest.raises(DomainError):
        LinkClass("x", (1.0, 2.0), (0, 0), (0, 0), bw_threshold=0.0)


def test_transmission_delay():
    assert transmission_delay(0, 1e6, 0.02) == 0.02
    assert transmission_delay(GB / 8, 10 * GBPS, 0.05) == pytest.approx(0.15)
    assert transmission_delay(80 * KB, 250 * KBPS, 0.02) == pytest.approx(2.58)
    with pytest.raises(DomainError):
        transmission_delay(1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        transmission_delay(-1.0, 1.0, 0.0)


def test_node_invariants():
    with pytest.raises(DomainError):
        node(0, "cloud", MobilityProfile(p_static=0.5))
    with pytest.raises(DomainError):
        node(0, "edge", MobilityProfile.static(0.1, 0.1))


def test_static_pair_cache_matches_point_metrics():
    a, b = (0.1, 0.2), (0.8, 0.6)
    net = NetworkModel((node(0, "fog", MobilityProfile.static(*a)), node(1, "fog", MobilityProfile.static(*b))))
    bw, lat, cost = link_metrics_at(net.link_class(0, 1), a, b)
    c = net.cache
    assert c.lat[0, 1] == pytest.approx(lat)
    assert c.cost[0, 1] == pytest.approx(cost)
    assert c.sec_per_byte[0, 1] == pytest.approx(8 / bw)
    assert c.lat[0, 0] == 0 and c.cost[0, 0] == 0


def test_cache_symmetric_and_nonnegative():
    net = preset_network("topology-10", 3)
    c = net.cache
    for arr in (c.sec_per_byte, c.lat, c.cost):
        assert np.allclose(arr, arr.T)
        assert np.all(arr >= 0)
    fog = net.fog_ids
    cls = net.link_class(fog[0], fog[1])
    sub = c.lat[np.ix_(fog, fog)][~np.eye(len(fog), dtype=bool)]
    assert np.all((sub >= cls.lat[0] - 1e-12) & (sub <= cls.lat[1] + 1e-12))


def test_mobile_node_against_fixed_user_monte_carlo():
    user = (0.2, 0.3)
    net = NetworkModel((node(0, "fog", MobilityProfile(p_static=1.0)),), grid=64)
    ul = net.user_links([user])
    rng = np.random.default_rng(4)
    ed = normalised_distance(rng.random((400000, 2)), np.array(user)).mean()
    cls = DEFAULT_LINK_CLASSES["iot-fog"]
    assert ul.lat[0, 0] == pytest.approx(cls.lat[0] + (cls.lat[1] - cls.lat[0]) * ed, rel=2e-3)
    assert ul.cost[0, 0] == pytest.approx(cls.cost[0] + (cls.cost[1] - cls.cost[0]) * ed, rel=2e-3)


def test_linearity_of_expected_delay():
    A = 5 * MB
    mob = MobilityProfile(0.5, 0.02, 20.0, init=(0.3, 0.6))
    other = MobilityProfile(0.5, 0.02, 20.0, init=(0.9, 0.2))
    net = NetworkModel((node(0, "fog", mob), node(1, "fog", other)))
    cls = net.link_class(0, 1)

    def full(X, Y):
        bw, lat, _ = cls.at_distance(normalised_distance(X, Y))
        return A * 8 / bw + lat

    direct = expected_pair_metric(net.densities[0], net.densities[1], full, grid=net.grid)
    assert net.cache.delay(0, 1, A) == pytest.approx(direct, rel=1e-9)


def test_degenerate_ranges_are_constant():
    cls = LinkClass("flat", (1e9, 1e9), (0.05, 0.05), (1e-9, 1e-9))
    net = NetworkModel((node(0, "fog", MobilityProfile(0.2, 0.02, 5.0, init=(0.1, 0.1))),
                        node(1, "fog", MobilityProfile(p_static=1.0))),
                       link_classes=dict(DEFAULT_LINK_CLASSES, **{"fog-fog": cls}))
    c = net.cache
    assert c.lat[0, 1] == pytest.approx(0.05)
    assert c.sec_per_byte[0, 1] == pytest.approx(8e-9)


def test_presets():
    n10 = preset_network("topology-10", 0)
    assert (len(n10.cloud_ids), len(n10.fog_ids)) == (4, 6)
    n20 = preset_network("topology-20", 0)
    assert (len(n20.cloud_ids), len(n20.fog_ids)) == (8, 12)
    for n in n20.nodes:
        if n.tier == "fog":
            assert 2 <= n.capacity <= 4
            assert n.proc_delay == pytest.approx(25 * MS / MB)
        else:
            assert n.capacity == 8
            assert n.mobility.p_static == 1


def test_fog_capacity_outside_range_rejected():
    from fogplace.infra import sample_nodes

    nodes = sample_nodes(4, 6, 0)
    nodes[5]["capacity"] = 6
    with pytest.raises(SchemaError) as exc:
        load_scenario({"preset": "topology-10", "nodes": nodes})
    assert exc.value.path == "nodes.5.capacity"


def test_schema_errors_carry_paths():
    with pytest.raises(SchemaError) as exc:
        load_scenario({"nodes": [{"id": 0, "tier": "fog", "capacity": 2, "unit_cost": 1, "location": [2, 0]}]})
    assert exc.value.path.startswith("nodes.0")
    with pytest.raises(SchemaError):
        load_scenario({"nodes": []})


def test_subset_and_mobility_variants():
    net = preset_network("topology-10", 1)
    fog = net.subset("fog")
    assert len(fog) == 6 and all(n.tier == "fog" for n in fog.nodes)
    assert [n.id for n in fog.nodes] == list(range(6))
    static = net.with_mobility(1.0)
    assert all(n.mobility.p_static == 1 for n in static.nodes)
    assert math.isclose(static.nodes[0].unit_cost, net.nodes[0].unit_cost)
