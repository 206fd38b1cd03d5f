"""Cloud/fog nodes, location-dependent link metrics and the expected link cache.

Every link metric depends on the normalised distance d = |X - Y| / sqrt(2)
between its endpoints: latency and unit cost grow linearly over the class
range, bandwidth shrinks linearly. Expectations over node locations are taken
once per node pair and stored in an ``ExpectedLinkCache``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError
from .mobility import DEFAULT_GRID, LocationDensity, MobilityProfile
from .units import BITS_PER_BYTE, GBPS, KBPS, MBPS, MS, bits, ms_per_mb, per_gb

SQRT2 = math.sqrt(2.0)
TIERS = ("cloud", "fog")

# bandwidth used between two VNFs hosted on the same node
INTRA_NODE_BW = 10 * GBPS


@dataclass(frozen=True)
class LinkClass:
    name: str
    bw: tuple[float, float]  # bits/s
    lat: tuple[float, float]  # seconds
    cost: tuple[float, float]  # currency per byte
    bw_threshold: float = 1.0

    def __post_init__(self):
        for label, (lo, hi) in (("bw", self.bw), ("lat", self.lat), ("cost", self.cost)):
            if lo > hi:
                raise DomainError(f"link class {self.name}: {label} range has lo > hi")
        if self.bw[0] <= 0:
            raise DomainError(f"link class {self.name}: bandwidth must be positive")
        if not 0 < self.bw_threshold <= 1:
            raise DomainError(f"link class {self.name}: bw_threshold must be in (0, 1]")

    def at_distance(self, d):
        """(bandwidth, latency, unit cost) at normalised distance d in [0, 1]."""
        d = np.clip(d, 0.0, 1.0)
        bw = self.bw[1] - (self.bw[1] - self.bw[0]) * d
        lat = self.lat[0] + (self.lat[1] - self.lat[0]) * d
        cost = self.cost[0] + (self.cost[1] - self.cost[0]) * d
        return bw, lat, cost

    def sec_per_byte(self, d):
        bw = self.bw[1] - (self.bw[1] - self.bw[0]) * np.clip(d, 0.0, 1.0)
        return BITS_PER_BYTE / bw

    @property
    def constant_bw(self) -> bool:
        return self.bw[0] == self.bw[1]


def _range(lo, hi=None):
    return (float(lo), float(lo if hi is None else hi))


# link classes with the ranges of the reference experiments
DEFAULT_LINK_CLASSES: dict[str, LinkClass] = {
    "cloud-cloud": LinkClass("cloud-cloud", _range(10 * GBPS), _range(50 * MS, 100 * MS), _range(per_gb(0.155))),
    "fog-fog": LinkClass("fog-fog", _range(0.1 * GBPS, 1 * GBPS), _range(10 * MS, 50 * MS),
                         _range(per_gb(0.25), per_gb(2.0))),
    "cloud-fog": LinkClass("cloud-fog", _range(1 * GBPS, 10 * GBPS), _range(100 * MS, 255 * MS),
                           _range(per_gb(10.0), per_gb(20.0))),
    "iot-cloud": LinkClass("iot-cloud", _range(10 * GBPS), _range(250 * MS), _range(per_gb(20.0))),
    "iot-fog": LinkClass("iot-fog", _range(250 * KBPS, 54 * MBPS), _range(7 * MS, 20 * MS),
                         _range(per_gb(0.05), per_gb(0.25))),
}


def normalised_distance(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.sqrt(((X - Y) ** 2).sum(axis=-1)) / SQRT2


def link_metrics_at(link_class: LinkClass, X, Y):
    """(bandwidth bits/s, latency s, unit cost per byte) between locations X and Y."""
    bw, lat, cost = link_class.at_distance(normalised_distance(X, Y))
    if np.ndim(bw) == 0:
        return float(bw), float(lat), float(cost)
    return bw, lat, cost


def transmission_delay(A: float, bandwidth: float, latency: float) -> float:
    """Seconds to push ``A`` bytes over a link: serialisation plus propagation."""
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    if A < 0:
        raise DomainError("traffic amount must be nonnegative")
    return bits(A) / bandwidth + latency


@dataclass(frozen=True)
class NodeSpec:
    id: int
    tier: str
    capacity: float  # vCPU
    unit_cost: float  # currency per vCPU
    proc_delay: float  # seconds per byte
    mobility: MobilityProfile
    usage_threshold: float = 1.0
    proc_delay_by_type: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.tier not in TIERS:
            raise DomainError(f"node {self.id}: unknown tier {self.tier!r}")
        if self.capacity < 0:
            raise DomainError(f"node {self.id}: capacity must be >= 0")
        if not 0 < self.usage_threshold <= 1:
            raise DomainError(f"node {self.id}: usage_threshold must be in (0, 1]")
        if self.tier == "cloud" and self.mobility.p_static != 1:
            raise DomainError(f"cloud node {self.id} must be static")

    @property
    def budget(self) -> float:
        return self.usage_threshold * self.capacity

    @property
    def location(self) -> tuple[float, float]:
        init = self.mobility.init
        return init if init is not None else (0.5, 0.5)

    def delay_for(self, type_id: int) -> float:
        if self.proc_delay_by_type and type_id in self.proc_delay_by_type:
            return self.proc_delay_by_type[type_id]
        return self.proc_delay


@dataclass(frozen=True)
class ExpectedLinkCache:
    """Expected per-byte link metrics for every ordered node pair.

    ``sec_per_byte[n, m]`` is E[8 / BW], so the expected transfer delay of A
    bytes is ``A * sec_per_byte + lat``. The diagonal holds the intra-node link.
    """

    sec_per_byte: np.ndarray
    lat: np.ndarray
    cost: np.ndarray
    bw: np.ndarray
    network: "NetworkModel" = field(repr=False, compare=False)

    def delay(self, n: int, m: int, A: float) -> float:
        return A * self.sec_per_byte[n, m] + self.lat[n, m]

    def users(self, locations) -> "UserLinks":
        """Expected node-to-user metrics, arrays of shape (nodes, users)."""
        return self.network.user_links(locations)


@dataclass(frozen=True)
class UserLinks:
    sec_per_byte: np.ndarray
    lat: np.ndarray
    cost: np.ndarray
    bw: np.ndarray


@dataclass(frozen=True)
class NetworkModel:
    nodes: tuple[NodeSpec, ...]
    link_classes: Mapping[str, LinkClass] = field(default_factory=lambda: dict(DEFAULT_LINK_CLASSES))
    grid: int = DEFAULT_GRID
    jitter: float = 0.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise DomainError("node ids must be 0..N-1 in order")
        if not 0 <= self.jitter <= 0.1:
            raise DomainError("jitter must lie in [0, 0.1]")

    def __len__(self):
        return len(self.nodes)

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    @property
    def fog_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.tier == "fog"]

    @property
    def cloud_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.tier == "cloud"]

    def link_class(self, n: int, m: int) -> LinkClass:
        a, b = sorted((self.nodes[n].tier, self.nodes[m].tier))
        return self.link_classes[f"{a}-{b}"]

    def user_class(self, n: int) -> LinkClass:
        return self.link_classes[f"iot-{self.nodes[n].tier}"]

    @cached_property
    def densities(self) -> tuple[LocationDensity, ...]:
        return tuple(LocationDensity(n.mobility) for n in self.nodes)

    @cached_property
    def _memo(self) -> dict:
        return {}

    @cached_property
    def cache(self) -> ExpectedLinkCache:
        return build_cache(self)

    @cached_property
    def _jitter_offsets(self):
        if self.jitter == 0:
            return None
        rng = np.random.default_rng([self.seed, 0x717])
        N = len(self.nodes)
        u = rng.uniform(-self.jitter, self.jitter, size=(2, N, N))
        u = (u + u.transpose(0, 2, 1)) / 2  # keep symmetry
        return u

    def user_links(self, locations) -> UserLinks:
        Z = np.asarray(locations, dtype=float).reshape(-1, 2)
        N, U = len(self.nodes), len(Z)
        out = [np.empty((N, U)) for _ in range(4)]
        for n, dens in enumerate(self.densities):
            cls = self.user_class(n)
            pts, w = dens.support(self.grid)
            d = normalised_distance(pts[:, None, :], Z[None, :, :])
            ed = w @ d
            out[0][n] = w @ cls.sec_per_byte(d)
            _, out[1][n], out[2][n] = cls.at_distance(ed)
            out[3][n] = cls.bw[1] - (cls.bw[1] - cls.bw[0]) * ed
        return UserLinks(*out)

    # variants used by the experiments
    def with_mobility(self, p_static: float | None = None, profile_fn=None) -> "NetworkModel":
        """Copy with every fog node's profile changed (``p_static`` or a custom map)."""
        nodes = []
        for n in self.nodes:
            if n.tier == "fog":
                if profile_fn is not None:
                    mob = profile_fn(n)
                else:
                    mob = replace(n.mobility, p_static=p_static)
                n = replace(n, mobility=mob)
            nodes.append(n)
        return replace(self, nodes=tuple(nodes))

    def pinned(self) -> "NetworkModel":
        """Copy where every node is assumed to stay at its initial location."""
        return replace(self, nodes=tuple(replace(n, mobility=n.mobility.pinned()) for n in self.nodes))

    def subset(self, tier: str) -> "NetworkModel":
        """Nodes of one tier only, renumbered from 0."""
        keep = [n.id for n in self.nodes if n.tier == tier]
        if not keep:
            raise DomainError(f"network has no {tier} nodes")
        return self.select(keep, name=f"{self.name}-{tier}" if self.name else tier)

    def select(self, ids, name: str | None = None) -> "NetworkModel":
        """The given nodes, in the given order, renumbered from 0."""
        nodes = tuple(replace(self.nodes[i], id=k) for k, i in enumerate(ids))
        return replace(self, nodes=nodes, name=self.name if name is None else name)


def build_cache(network: NetworkModel) -> ExpectedLinkCache:
    """Expected per-byte delay, latency, unit cost and bandwidth for all node pairs."""
    from .mobility import expected_pair_metric

    N = len(network.nodes)
    spb = np.empty((N, N))
    lat = np.empty((N, N))
    cost = np.empty((N, N))
    bw = np.empty((N, N))
    memo = network._memo
    dens = network.densities
    for n in range(N):
        for m in range(N):
            if n == m:
                spb[n, m] = BITS_PER_BYTE / INTRA_NODE_BW
                lat[n, m] = cost[n, m] = 0.0
                bw[n, m] = INTRA_NODE_BW
                continue
            if m < n:
                # the metrics depend on |X - Y| only
                spb[n, m], lat[n, m], cost[n, m], bw[n, m] = spb[m, n], lat[m, n], cost[m, n], bw[m, n]
                continue
            cls = network.link_class(n, m)
            ed = expected_pair_metric(dens[n], dens[m], normalised_distance, grid=network.grid,
                                      memo=memo, key="d")
            if cls.constant_bw:
                spb[n, m] = BITS_PER_BYTE / cls.bw[0]
            else:
                spb[n, m] = expected_pair_metric(dens[n], dens[m], lambda a, b, c=cls: c.sec_per_byte(normalised_distance(a, b)),
                                                 grid=network.grid, memo=memo, key=(cls, "spb"))
            bw[n, m], lat[n, m], cost[n, m] = cls.at_distance(ed)
    offsets = network._jitter_offsets
    if offsets is not None:
        for n in range(N):
            for m in range(N):
                if n != m:
                    cls = network.link_class(n, m)
                    lat[n, m] += offsets[0, n, m] * (cls.lat[1] - cls.lat[0])
                    cost[n, m] += offsets[1, n, m] * (cls.cost[1] - cls.cost[0])
        np.maximum(lat, 0.0, out=lat)
        np.maximum(cost, 0.0, out=cost)
    for a in (spb, lat, cost, bw):
        a.setflags(write=False)
    return ExpectedLinkCache(spb, lat, cost, bw, network)


# --------------------------------------------------------------------------
# presets and scenario documents
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TierDefaults:
    capacity: tuple[int, int]
    unit_cost: tuple[float, float]
    delay_ms_per_mb: float


CLOUD_DEFAULTS = TierDefaults((8, 8), (2.33, 4.65), 0.25)
FOG_DEFAULTS = TierDefaults((2, 4), (4.65, 5.82), 25.0)

PRESETS = {
    "topology-10": (4, 6),
    "topology-20": (8, 12),
}

# mobility of preset fog nodes unless a document overrides it
DEFAULT_FOG_MOBILITY = {"p_static": 0.5, "velocity": 0.02, "expected_pause": 20.0}


def sample_nodes(n_cloud: int, n_fog: int, seed: int, fog_mobility: Mapping | None = None) -> list[dict]:
    """Node documents with the reference ranges, cloud nodes first."""
    rng = np.random.default_rng([seed, 0x70F0])
    mob = dict(DEFAULT_FOG_MOBILITY, **(fog_mobility or {}))
    docs = []
    for k in range(n_cloud + n_fog):
        tier = "cloud" if k < n_cloud else "fog"
        d = CLOUD_DEFAULTS if tier == "cloud" else FOG_DEFAULTS
        loc = [float(v) for v in rng.random(2)]
        doc = {
            "id": k,
            "tier": tier,
            "capacity": int(rng.integers(d.capacity[0], d.capacity[1] + 1)),
            "unit_cost": float(rng.uniform(*d.unit_cost)),
            "proc_delay_ms_per_mb": d.delay_ms_per_mb,
            "location": loc,
        }
        if tier == "fog":
            doc["mobility"] = dict(mob)
        docs.append(doc)
    return docs


def load_scenario(document) -> NetworkModel:
    """Validate a scenario document (mapping, or preset name) and build the network."""
    from .schema import ScenarioDoc, validate

    if isinstance(document, str):
        document = {"preset": document}
    doc = validate(ScenarioDoc, document)
    return network_from_doc(doc)


def network_from_doc(doc) -> NetworkModel:
    classes = dict(DEFAULT_LINK_CLASSES)
    for lc in doc.link_classes:
        base = classes.get(lc.name)
        classes[lc.name] = LinkClass(
            lc.name,
            tuple(lc.bw_bps) if lc.bw_bps else base.bw,
            tuple(v * MS for v in lc.lat_ms) if lc.lat_ms else base.lat,
            tuple(per_gb(v) for v in lc.cost_per_gb) if lc.cost_per_gb else base.cost,
            lc.bw_threshold,
        )
    nodes = []
    for nd in doc.nodes:
        loc = tuple(nd.location)
        if nd.tier == "cloud":
            mob = MobilityProfile.static(*loc)
        else:
            m = nd.mobility
            init = None if m.init == "uniform" else loc
            mob = MobilityProfile(p_static=m.p_static, velocity=m.velocity,
                                  expected_pause=m.expected_pause, init=init)
        delay = nd.proc_delay_ms_per_mb
        if delay is None:
            delay = (CLOUD_DEFAULTS if nd.tier == "cloud" else FOG_DEFAULTS).delay_ms_per_mb
        nodes.append(NodeSpec(
            id=nd.id, tier=nd.tier, capacity=nd.capacity, unit_cost=nd.unit_cost,
            proc_delay=ms_per_mb(delay), mobility=mob, usage_threshold=nd.usage_threshold,
        ))
    return NetworkModel(tuple(nodes), classes, grid=doc.quadrature_grid, jitter=doc.jitter,
                        seed=doc.seed, name=doc.preset or doc.name or "")


def preset_network(name: str, seed: int = 0, *, grid: int = DEFAULT_GRID,
                   fog_mobility: Mapping | None = None) -> NetworkModel:
    doc = {"preset": name, "seed": seed, "quadrature_grid": grid}
    if fog_mobility:
        doc["fog_mobility"] = dict(fog_mobility)
    return load_scenario(doc)


def network_to_doc(network: NetworkModel) -> dict:
    nodes = []
    for n in network.nodes:
        d = {
            "id": n.id, "tier": n.tier, "capacity": n.capacity, "unit_cost": n.unit_cost,
            "proc_delay_ms_per_mb": n.proc_delay / ms_per_mb(1.0), "usage_threshold": n.usage_threshold,
            "location": list(n.location),
        }
        if n.tier == "fog":
            m = n.mobility
            d["mobility"] = {"p_static": m.p_static, "velocity": m.velocity,
                             "expected_pause": m.expected_pause,
                             "init": "uniform" if m.init is None else "point"}
        nodes.append(d)
    return {"name": network.name, "seed": network.seed, "quadrature_grid": network.grid,
            "jitter": network.jitter, "nodes": nodes}
