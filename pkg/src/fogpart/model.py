"""Domain types for fog infrastructures, applications, workloads and placements.

Units are fixed throughout the package: times in ms, sizes in bytes,
bandwidth in bytes/ms, speeds in instructions/ms, capacities in resource units.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple

# Source marker for the user/IoT request that enters an application.
EXTERNAL = None

UNBOUNDED = math.inf


class ModelError(ValueError):
    """Raised when a domain object violates its structural invariants."""


class UnknownIdError(KeyError):
    """Raised when an id does not refer to a known device or service."""


class DeviceKind(str, Enum):
    CLOUD = "cloud"
    FOG = "fog"
    GATEWAY = "gateway"


@dataclass(frozen=True)
class Device:
    id: int
    kind: DeviceKind
    resources: float  # UNBOUNDED for the cloud
    speed: float  # instructions per ms

    def __post_init__(self):
        if self.speed <= 0:
            raise ModelError(f"device {self.id}: speed must be > 0")
        if self.kind is not DeviceKind.CLOUD and not self.resources > 0:
            raise ModelError(f"device {self.id}: resources must be > 0")

    @property
    def is_cloud(self) -> bool:
        return self.kind is DeviceKind.CLOUD


@dataclass(frozen=True)
class NetworkLink:
    a: int
    b: int
    propagation: float  # ms
    bandwidth: float  # bytes per ms

    def __post_init__(self):
        if self.a == self.b:
            raise ModelError(f"self-loop on device {self.a}")
        if self.propagation < 0:
            raise ModelError("propagation must be >= 0")
        if self.bandwidth <= 0:
            raise ModelError("bandwidth must be > 0")

    @property
    def key(self) -> Tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)

    def other(self, device: int) -> int:
        return self.b if device == self.a else self.a


def network_delay(link: NetworkLink, size: float) -> float:
    """Transmission delay of a packet of ``size`` bytes over one link."""
    return link.propagation + size / link.bandwidth


class InfrastructureGraph:
    """Devices plus undirected links. Exactly one device is the cloud.

    ``cloud_attachment`` is the fog device the cloud is linked to.
    """

    def __init__(self, devices: Iterable[Device], links: Iterable[NetworkLink], cloud_attachment: int):
        self.devices: Dict[int, Device] = {}
        for d in devices:
            if d.id in self.devices:
                raise ModelError(f"duplicate device id {d.id}")
            self.devices[d.id] = d
        clouds = [d.id for d in self.devices.values() if d.is_cloud]
        if len(clouds) != 1:
            raise ModelError(f"expected exactly one cloud device, found {len(clouds)}")
        self.cloud_id: int = clouds[0]
        if cloud_attachment not in self.devices:
            raise ModelError(f"cloud attachment {cloud_attachment} is not a device")
        self.cloud_attachment = cloud_attachment

        self.links: Dict[Tuple[int, int], NetworkLink] = {}
        self.adjacency: Dict[int, List[int]] = {i: [] for i in self.devices}
        for link in links:
            for end in (link.a, link.b):
                if end not in self.devices:
                    raise ModelError(f"link references unknown device {end}")
            if link.key in self.links:
                raise ModelError(f"duplicate link {link.key}")
            self.links[link.key] = link
            self.adjacency[link.a].append(link.b)
            self.adjacency[link.b].append(link.a)
        for nbrs in self.adjacency.values():
            nbrs.sort()
        if not self._connected():
            raise ModelError("infrastructure graph is not connected")

    def _connected(self) -> bool:
        if not self.devices:
            return False
        start = next(iter(self.devices))
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(self.devices)

    def link(self, i: int, j: int) -> NetworkLink:
        key = (i, j) if i < j else (j, i)
        try:
            return self.links[key]
        except KeyError:
            raise UnknownIdError(f"no link between {i} and {j}") from None

    @property
    def cloud(self) -> Device:
        return self.devices[self.cloud_id]

    def fog_ids(self) -> List[int]:
        """All non-cloud device ids (fog devices and gateways), sorted."""
        return sorted(i for i, d in self.devices.items() if not d.is_cloud)

    def gateway_ids(self) -> List[int]:
        return sorted(i for i, d in self.devices.items() if d.kind is DeviceKind.GATEWAY)

    def fog_edges(self) -> List[Tuple[int, int]]:
        """Edges of the fog graph, i.e. with the cloud device removed."""
        return sorted(k for k in self.links if self.cloud_id not in k)


@dataclass(frozen=True)
class Service:
    id: int
    app_id: int
    consumption: float
    is_entry_point: bool = False

    def __post_init__(self):
        if not self.consumption > 0:
            raise ModelError(f"service {self.id}: consumption must be > 0")


@dataclass(frozen=True)
class MessageSpec:
    source: Optional[int]  # EXTERNAL for the request entering the app
    target: int
    size: float
    instructions: float

    def __post_init__(self):
        if not self.size > 0 or not self.instructions > 0:
            raise ModelError(f"message {self.source}->{self.target}: size and instructions must be > 0")


@dataclass(frozen=True)
class Application:
    id: int
    services: Tuple[Service, ...]
    messages: Tuple[MessageSpec, ...]
    deadline: float

    @property
    def service_ids(self) -> List[int]:
        return [s.id for s in self.services]

    @property
    def entry_point(self) -> int:
        entries = [s.id for s in self.services if s.is_entry_point]
        if len(entries) != 1:
            raise ModelError(f"app {self.id} has {len(entries)} entry points")
        return entries[0]

    @property
    def external_message(self) -> MessageSpec:
        for m in self.messages:
            if m.source is EXTERNAL:
                return m
        raise ModelError(f"app {self.id} has no external message")

    def service(self, service_id: int) -> Service:
        for s in self.services:
            if s.id == service_id:
                return s
        raise UnknownIdError(f"service {service_id} not in app {self.id}")

    def successors(self, service_id: int) -> List[int]:
        return sorted(m.target for m in self.messages if m.source == service_id)

    def outgoing(self, service_id: int) -> List[MessageSpec]:
        return sorted((m for m in self.messages if m.source == service_id), key=lambda m: m.target)

    def incoming(self, service_id: int) -> List[MessageSpec]:
        return [m for m in self.messages if m.target == service_id]

    def total_instructions(self) -> float:
        return sum(m.instructions for m in self.messages)

    def total_consumption(self) -> float:
        return sum(s.consumption for s in self.services)

    def topological_order(self) -> List[int]:
        """Services in topological order of the message graph (Kahn, smallest id first)."""
        indeg = {s.id: 0 for s in self.services}
        for m in self.messages:
            if m.source is not EXTERNAL:
                indeg[m.target] += 1
        ready = sorted(u for u, d in indeg.items() if d == 0)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in self.successors(u):
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
                    ready.sort()
        if len(order) != len(indeg):
            raise ModelError(f"app {self.id} message graph has a cycle")
        return order


def validate_application(app: Application) -> List[str]:
    """Structural checks for an application. Returns one message per violation."""
    violations: List[str] = []
    ids = [s.id for s in app.services]
    known = set(ids)
    if len(known) != len(ids):
        violations.append("duplicate service ids")
    entries = [s.id for s in app.services if s.is_entry_point]
    if len(entries) == 0:
        violations.append("no entry point")
    elif len(entries) > 1:
        violations.append("multiple entry points")
    if not app.deadline > 0:
        violations.append("deadline must be positive")

    external = [m for m in app.messages if m.source is EXTERNAL]
    if not external:
        violations.append("missing external message")
    elif len(external) > 1:
        violations.append("multiple external messages")
    elif len(entries) == 1 and external[0].target != entries[0]:
        violations.append("external message does not target the entry point")

    adj: Dict[int, List[int]] = {u: [] for u in known}
    for m in app.messages:
        endpoints = [m.target] if m.source is EXTERNAL else [m.source, m.target]
        if any(e not in known for e in endpoints):
            violations.append(f"message {m.source}->{m.target} references unknown service")
            continue
        if m.source is not EXTERNAL:
            adj[m.source].append(m.target)

    # iterative DFS with colouring
    colour = {u: 0 for u in known}
    cyclic = False
    for root in sorted(known):
        if colour[root]:
            continue
        stack = [(root, iter(adj[root]))]
        colour[root] = 1
        while stack and not cyclic:
            u, it = stack[-1]
            for v in it:
                if colour[v] == 1:
                    cyclic = True
                    break
                if colour[v] == 0:
                    colour[v] = 1
                    stack.append((v, iter(adj[v])))
                    break
            else:
                colour[u] = 2
                stack.pop()
        if cyclic:
            break
    if cyclic:
        violations.append("cycle detected")

    if len(entries) == 1:
        seen = {entries[0]}
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if seen != known:
            violations.append("unreachable service")
    return violations


@dataclass(frozen=True)
class Workload:
    """A user or IoT device attached to a gateway that periodically requests one app."""

    id: int
    gateway: int
    app_id: int
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise ModelError(f"workload {self.id}: period must be > 0")


class PlacementMatrix:
    """Binary service-to-device map stored as a set of (service, device) pairs."""

    def __init__(self, entries: Iterable[Tuple[int, int]] = ()):
        self.entries: Set[Tuple[int, int]] = set(entries)

    @classmethod
    def cloud_only(cls, apps: Iterable[Application], cloud_id: int) -> "PlacementMatrix":
        return cls((s.id, cloud_id) for app in apps for s in app.services)

    def add(self, service: int, device: int) -> None:
        self.entries.add((service, device))

    def __contains__(self, pair) -> bool:
        return pair in self.entries

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, PlacementMatrix) and self.entries == other.entries

    def hosts(self, service: int) -> List[int]:
        return sorted(d for s, d in self.entries if s == service)

    def services_on(self, device: int) -> List[int]:
        return sorted(s for s, d in self.entries if d == device)

    def host_map(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {}
        for s, d in sorted(self.entries):
            out.setdefault(s, []).append(d)
        return out

    def as_tuple(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(sorted(self.entries))


@dataclass
class FeasibilityReport:
    ok: bool
    usage: Dict[int, float] = field(default_factory=dict)
    capacity: Dict[int, float] = field(default_factory=dict)

    def overloaded(self) -> List[int]:
        return [d for d in sorted(self.usage) if self.usage[d] > self.capacity[d]]


def placement_feasible(P: PlacementMatrix, infra: InfrastructureGraph, apps: Iterable[Application]) -> FeasibilityReport:
    """Check the per-device resource constraint on every non-cloud device."""
    consumption = {s.id: s.consumption for app in apps for s in app.services}
    usage = {i: 0.0 for i in infra.fog_ids()}
    for service, device in P.entries:
        if service not in consumption:
            raise UnknownIdError(f"placement references unknown service {service}")
        if device not in infra.devices:
            raise UnknownIdError(f"placement references unknown device {device}")
        if device != infra.cloud_id:
            usage[device] += consumption[service]
    capacity = {i: infra.devices[i].resources for i in usage}
    ok = all(usage[i] <= capacity[i] for i in usage)
    return FeasibilityReport(ok=ok, usage=usage, capacity=capacity)


@dataclass
class Scenario:
    infra: InfrastructureGraph
    apps: List[Application]
    workloads: List[Workload]
    seed: int = 0

    def app(self, app_id: int) -> Application:
        for a in self.apps:
            if a.id == app_id:
                return a
        raise UnknownIdError(f"unknown app {app_id}")

    def service_index(self) -> Dict[int, Service]:
        return {s.id: s for a in self.apps for s in a.services}

    def app_of_service(self) -> Dict[int, Application]:
        return {s.id: a for a in self.apps for s in a.services}
