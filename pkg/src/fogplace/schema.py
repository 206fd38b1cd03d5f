"""Document schemas for scenarios, workloads and placements.

Documents are plain mappings (parsed from YAML or JSON). ``validate`` turns a
pydantic failure into a ``SchemaError`` carrying the dotted field path.
"""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import SchemaError

LINK_CLASS_NAMES = Literal["cloud-cloud", "fog-fog", "cloud-fog", "iot-cloud", "iot-fog"]


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MobilityDoc(_Doc):
    p_static: float = Field(0.5, ge=0, le=1)
    velocity: float = Field(0.02, gt=0)
    expected_pause: float = Field(20.0, ge=0)
    init: Literal["point", "uniform"] = "point"


class NodeDoc(_Doc):
    id: int = Field(ge=0)
    tier: Literal["cloud", "fog"]
    capacity: float = Field(ge=0)
    unit_cost: float = Field(ge=0)
    proc_delay_ms_per_mb: Optional[float] = Field(None, ge=0)
    usage_threshold: float = Field(1.0, gt=0, le=1)
    location: tuple[float, float]
    mobility: MobilityDoc = Field(default_factory=MobilityDoc)

    @model_validator(mode="after")
    def _inside(self):
        if not all(0 <= v <= 1 for v in self.location):
            raise ValueError("location must lie in [0,1]^2")
        return self


class LinkClassDoc(_Doc):
    name: LINK_CLASS_NAMES
    bw_bps: Optional[tuple[float, float]] = None
    lat_ms: Optional[tuple[float, float]] = None
    cost_per_gb: Optional[tuple[float, float]] = None
    bw_threshold: float = Field(1.0, gt=0, le=1)


class ScenarioDoc(_Doc):
    name: str = ""
    preset: Optional[Literal["topology-10", "topology-20"]] = None
    seed: int = 0
    quadrature_grid: int = Field(24, ge=2, le=256)
    jitter: float = Field(0.0, ge=0, le=0.1)
    fog_mobility: Optional[MobilityDoc] = None
    nodes: list[NodeDoc] = Field(default_factory=list)
    link_classes: list[LinkClassDoc] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _expand(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        fog_mob = data.get("fog_mobility") or {}
        if data.get("preset") and not data.get("nodes"):
            from .infra import PRESETS, sample_nodes

            if data["preset"] in PRESETS:
                n_cloud, n_fog = PRESETS[data["preset"]]
                data["nodes"] = sample_nodes(n_cloud, n_fog, int(data.get("seed", 0)), fog_mob)
        elif fog_mob and isinstance(data.get("nodes"), list):
            data["nodes"] = [
                dict(n, mobility=dict(fog_mob, **n.get("mobility", {})))
                if isinstance(n, dict) and n.get("tier") == "fog" else n
                for n in data["nodes"]
            ]
        return data


class TypeDoc(_Doc):
    id: int = Field(ge=0)
    name: str = ""
    resource_req: float = Field(gt=0)
    capacity: float = Field(gt=0)
    license_cost: float = Field(100.0, ge=0)
    util_threshold: float = Field(1.0, gt=0, le=1)
    instance_count: int = Field(2, ge=1)


class RequestDoc(_Doc):
    id: int = Field(ge=0)
    tree: dict
    traffic: dict[str, float]
    users: list[tuple[float, float]] = Field(default_factory=list)
    links: list[tuple[int, int, float]] = Field(default_factory=list)


class WorkloadDoc(_Doc):
    seed: Optional[int] = None
    types: list[TypeDoc]
    requests: list[RequestDoc]


class PlacementDoc(_Doc):
    # [type, instance, node] and [request, type, instance, node]
    deployed: list[tuple[int, int, int]] = Field(default_factory=list)
    assigned: list[tuple[int, int, int, int]] = Field(default_factory=list)


def _path(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p.startswith("function-")))


def validate(model: type[BaseModel], data):
    try:
        doc = model.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise SchemaError(_path(err["loc"]), err["msg"]) from None
    if isinstance(doc, ScenarioDoc):
        check_scenario(doc)
    return doc


def check_scenario(doc: ScenarioDoc):
    from .infra import CLOUD_DEFAULTS, FOG_DEFAULTS, PRESETS

    if not doc.nodes:
        raise SchemaError("nodes", "a scenario needs at least one node (or a preset)")
    for k, n in enumerate(doc.nodes):
        if n.id != k:
            raise SchemaError(f"nodes.{k}.id", f"node ids must be 0..N-1 in order, got {n.id}")
        if n.tier == "cloud" and n.mobility.p_static != 1 and "mobility" in n.model_fields_set:
            raise SchemaError(f"nodes.{k}.mobility.p_static", "cloud nodes are static")
    if doc.preset is None:
        return
    n_cloud, n_fog = PRESETS[doc.preset]
    tiers = [n.tier for n in doc.nodes]
    if tiers.count("cloud") != n_cloud or tiers.count("fog") != n_fog:
        raise SchemaError("nodes", f"{doc.preset} needs {n_cloud} cloud and {n_fog} fog nodes")
    for k, n in enumerate(doc.nodes):
        d = CLOUD_DEFAULTS if n.tier == "cloud" else FOG_DEFAULTS
        lo, hi = d.capacity
        if not lo <= n.capacity <= hi:
            raise SchemaError(f"nodes.{k}.capacity", f"{n.tier} capacity must lie in [{lo}, {hi}] vCPU")
        lo, hi = d.unit_cost
        if not lo <= n.unit_cost <= hi:
            raise SchemaError(f"nodes.{k}.unit_cost", f"{n.tier} unit cost must lie in [{lo}, {hi}] per vCPU")
