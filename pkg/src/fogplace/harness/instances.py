"""Small instances that the exhaustive solver can enumerate."""
from __future__ import annotations

from ..infra import NetworkModel, preset_network
from ..vnffg import Request, WorkloadParams, generate_catalog, generate_workload


def tiny_instance(seed: int, nodes: int = 3, types: int = 2, requests: int = 2,
                  grid: int = 24) -> tuple[NetworkModel, list[Request]]:
    """A few nodes of topology-10 (cloud first, then fog) and short requests over ``types`` types."""
    if nodes < 1 or types < 1 or requests < 1:
        raise ValueError("nodes, types and requests must be >= 1")
    base = preset_network("topology-10", seed, grid=grid)
    n_cloud = nodes // 2
    ids = [n.id for n in base.nodes if n.tier == "cloud"][:n_cloud]
    ids += [n.id for n in base.nodes if n.tier == "fog"][:nodes - n_cloud]
    net = base.select(ids, name=f"tiny-{nodes}")
    catalog = generate_catalog(types, seed)
    lo = min(2, types)
    params = WorkloadParams(vnfs=(lo, types), heights=(1, 2), users=(2, 5), iot_vnfs=(1, 1))
    return net, generate_workload(requests, seed, params, catalog)
