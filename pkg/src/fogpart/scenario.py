"""Seeded random scenario generation with the experiment's parameter ranges."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

from .graphkit import (
    cloud_attachment_node,
    edges_of,
    generate_barabasi_albert,
    generate_gn_application,
    select_gateways,
)
from .model import (
    EXTERNAL,
    UNBOUNDED,
    Application,
    Device,
    DeviceKind,
    InfrastructureGraph,
    MessageSpec,
    NetworkLink,
    Scenario,
    Service,
    Workload,
)

Range = Tuple[float, float]


@dataclass
class ExperimentParams:
    n_devices: int = 100
    gateway_fraction: float = 0.25
    ba_m: int = 2
    n_apps: int = 20
    propagation: float = 5.0
    bandwidth: float = 75000.0
    device_resources: Range = (10, 25)
    device_speed: Range = (100, 1000)
    app_deadline: Range = (300, 50000)
    services_per_app: Range = (2, 10)
    service_consumption: Range = (1, 6)
    message_instructions: Range = (20000, 60000)
    message_size: Range = (1500000, 4500000)
    workload_period: Range = (200.0, 1000.0)
    popularity: float = 0.25
    cloud_propagation: float = 100.0
    cloud_bandwidth: float = 75000.0
    cloud_speed: float = 10000.0

    _RANGES = (
        "device_resources", "device_speed", "app_deadline", "services_per_app",
        "service_consumption", "message_instructions", "message_size", "workload_period",
    )

    def validate(self) -> None:
        for name in self._RANGES:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if self.services_per_app[0] < 1:
            raise ValueError("services_per_app must be >= 1")
        if not 0 < self.gateway_fraction < 1:
            raise ValueError("gateway_fraction must be in (0, 1)")
        if not 0 <= self.popularity <= 1:
            raise ValueError("popularity must be in [0, 1]")
        if self.n_apps < 1:
            raise ValueError("n_apps must be >= 1")
        if self.n_devices <= self.ba_m or self.ba_m < 1:
            raise ValueError("need n_devices > ba_m >= 1")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentParams":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def _randint(rng: random.Random, r: Range) -> int:
    return rng.randint(int(r[0]), int(r[1]))


def generate_scenario(params: ExperimentParams, seed: int) -> Scenario:
    params.validate()
    rng = random.Random(seed)
    topo_seed = rng.randrange(2**32)
    fog = generate_barabasi_albert(params.n_devices, params.ba_m, topo_seed)

    attach = cloud_attachment_node(fog)
    gateways = select_gateways(fog, params.gateway_fraction, exclude=attach)
    cloud_id = params.n_devices

    devices = []
    for i in range(params.n_devices):
        kind = DeviceKind.GATEWAY if i in gateways else DeviceKind.FOG
        devices.append(Device(i, kind, _randint(rng, params.device_resources), _randint(rng, params.device_speed)))
    devices.append(Device(cloud_id, DeviceKind.CLOUD, UNBOUNDED, params.cloud_speed))
    links = [NetworkLink(u, v, params.propagation, params.bandwidth) for u, v in edges_of(fog)]
    links.append(NetworkLink(attach, cloud_id, params.cloud_propagation, params.cloud_bandwidth))
    infra = InfrastructureGraph(devices, links, attach)

    apps = []
    next_service = 0
    for app_id in range(params.n_apps):
        deadline = _randint(rng, params.app_deadline)
        n = _randint(rng, params.services_per_app)
        edges = generate_gn_application(n, rng.randrange(2**32))
        ids = list(range(next_service, next_service + n))
        next_service += n
        services = tuple(
            Service(ids[k], app_id, _randint(rng, params.service_consumption), k == 0) for k in range(n)
        )
        messages = [MessageSpec(EXTERNAL, ids[0], _randint(rng, params.message_size),
                                _randint(rng, params.message_instructions))]
        for parent, child in edges:
            messages.append(MessageSpec(ids[parent], ids[child], _randint(rng, params.message_size),
                                        _randint(rng, params.message_instructions)))
        apps.append(Application(app_id, services, tuple(messages), deadline))

    workloads: List[Workload] = []
    gw_sorted = sorted(gateways)
    for g in gw_sorted:
        for app in apps:
            if rng.random() < params.popularity:
                workloads.append(Workload(len(workloads), g, app.id, rng.uniform(*params.workload_period)))
    served = {w.app_id for w in workloads}
    for app in apps:
        if app.id not in served:
            g = rng.choice(gw_sorted)
            workloads.append(Workload(len(workloads), g, app.id, rng.uniform(*params.workload_period)))
    return Scenario(infra, apps, workloads, seed)


@dataclass
class ScenarioSummary:
    services: int
    demand: float
    fog_capacity: float
    workloads: int
    gateways: int
    devices: int
    apps: int
    request_rate: float  # aggregate requests per ms
    mean_period: float


def scenario_summary(scenario: Scenario) -> ScenarioSummary:
    infra = scenario.infra
    periods = [w.period for w in scenario.workloads]
    return ScenarioSummary(
        services=sum(len(a.services) for a in scenario.apps),
        demand=sum(a.total_consumption() for a in scenario.apps),
        fog_capacity=sum(infra.devices[i].resources for i in infra.fog_ids()),
        workloads=len(scenario.workloads),
        gateways=len(infra.gateway_ids()),
        devices=len(infra.fog_ids()),
        apps=len(scenario.apps),
        request_rate=sum(1.0 / p for p in periods),
        mean_period=sum(periods) / len(periods) if periods else 0.0,
    )
