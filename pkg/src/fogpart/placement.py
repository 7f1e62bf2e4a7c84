"""Service placement policies.

``partition_place`` maps each (application, user) to the deepest device
community around the user's gateway that can host the whole application,
then spreads the application over that community's devices by transitive
closure sets. ``greedy_baseline_place`` and ``brute_force_place`` exist for
comparison and verification.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .graphkit import (
    ClosureSet,
    Dendrogram,
    UnreachableError,
    communities_for_device,
    fog_graph,
    girvan_newman,
    min_delay_path,
    shortest_delay_tree,
    transitive_closure,
)
from .model import (
    Application,
    InfrastructureGraph,
    PlacementMatrix,
    Workload,
    placement_feasible,
)

log = logging.getLogger(__name__)

POLICIES = ("partition", "greedy", "cloud-only")


class UnsupportedStructureError(ValueError):
    """The application graph is not a tree, so closure splits would overlap."""


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class UsageLedger:
    """Remaining capacity and hosted services of every non-cloud device."""

    remaining: Dict[int, float]
    hosted: Dict[int, Set[int]] = field(default_factory=dict)

    @classmethod
    def for_infra(cls, infra: InfrastructureGraph) -> "UsageLedger":
        ids = infra.fog_ids()
        return cls({i: infra.devices[i].resources for i in ids}, {i: set() for i in ids})

    def copy(self) -> "UsageLedger":
        return UsageLedger(dict(self.remaining), {d: set(s) for d, s in self.hosted.items()})

    def cost(self, device: int, services: Iterable[int], consumption: Mapping[int, float]) -> float:
        """Extra capacity needed on ``device``; services already hosted there are free."""
        hosted = self.hosted[device]
        return sum(consumption[s] for s in services if s not in hosted)

    def assign(self, device: int, services: Iterable[int], consumption: Mapping[int, float]) -> None:
        for s in services:
            if s not in self.hosted[device]:
                self.hosted[device].add(s)
                self.remaining[device] -= consumption[s]
        assert self.remaining[device] >= 0, f"device {device} over capacity"


# --- service partitioning ----------------------------------------------------


def closure_partition_levels(app: Application) -> List[List[ClosureSet]]:
    """Successively finer partitions of the app into transitive-closure sets.

    Level 0 is the closure of the entry point. Each following level splits
    every non-singleton set into its root plus the closures of the root's
    children. Within a level, sets are ordered by decreasing size; equal
    sizes keep generation order (children by id, then the root).
    """
    entry = app.entry_point
    current = [transitive_closure(app, entry)]
    levels = [current]
    while any(len(c) > 1 for c in current):
        nxt: List[ClosureSet] = []
        for cs in current:
            if len(cs) == 1:
                nxt.append(cs)
                continue
            covered: Set[int] = {cs.root}
            for child in app.successors(cs.root):
                if child not in cs.members:
                    continue
                sub = transitive_closure(app, child)
                if covered & sub.members:
                    raise UnsupportedStructureError(
                        f"app {app.id}: closures overlap below service {cs.root}"
                    )
                covered |= sub.members
                nxt.append(sub)
            nxt.append(ClosureSet(cs.root, frozenset([cs.root])))
        nxt.sort(key=len, reverse=True)
        current = nxt
        levels.append(current)
    return levels


# --- phase two ---------------------------------------------------------------


def device_fitness(
    device: int,
    app: Application,
    gateway: int,
    infra: InfrastructureGraph,
    alive: Optional[Mapping[int, bool]] = None,
) -> float:
    """Estimated response time if the whole app ran on ``device`` (lower is better)."""
    try:
        _, latency = min_delay_path(infra, alive, gateway, device, app.external_message.size)
    except UnreachableError:
        return math.inf
    return latency + app.total_instructions() / infra.devices[device].speed


def place_services_in_devices(
    app: Application,
    community: Iterable[int],
    ledger: UsageLedger,
    gateway: int,
    infra: InfrastructureGraph,
    levels: Optional[List[List[ClosureSet]]] = None,
) -> Optional[Dict[int, int]]:
    """First-fit of closure sets onto the community's devices.

    Returns service -> device and commits the usage to ``ledger``, or
    returns None (rejection) leaving ``ledger`` untouched.
    """
    if levels is None:
        levels = closure_partition_levels(app)
    consumption = {s.id: s.consumption for s in app.services}
    all_services = set(consumption)
    dist, _ = shortest_delay_tree(infra, None, gateway, app.external_message.size)
    work = app.total_instructions()
    fitness = {d: dist.get(d, math.inf) + work / infra.devices[d].speed for d in community}
    devices = sorted(fitness, key=lambda d: (fitness[d], d))
    trial = ledger.copy()
    placed: Dict[int, int] = {}
    for dev in devices:
        for level in levels:
            for cs in level:
                if cs.members & placed.keys():
                    continue
                if trial.cost(dev, cs.members, consumption) > trial.remaining[dev]:
                    continue
                trial.assign(dev, cs.members, consumption)
                for s in cs.members:
                    placed[s] = dev
                if placed.keys() == all_services:
                    ledger.remaining = trial.remaining
                    ledger.hosted = trial.hosted
                    return placed
    return None


# --- phase one ---------------------------------------------------------------


def partition_place(
    infra: InfrastructureGraph,
    dendrogram: Optional[Dendrogram],
    apps: Sequence[Application],
    workloads: Sequence[Workload],
) -> PlacementMatrix:
    """Community-then-closure placement; unplaced app instances stay cloud-only."""
    if dendrogram is None:
        dendrogram = girvan_newman(fog_graph(infra))
    P = PlacementMatrix.cloud_only(apps, infra.cloud_id)
    ledger = UsageLedger.for_infra(infra)
    for app in sorted(apps, key=lambda a: (a.deadline, a.id)):
        levels = closure_partition_levels(app)
        hosting: List[FrozenSet[int]] = []
        users = sorted((w for w in workloads if w.app_id == app.id), key=lambda w: w.id)
        for user in users:
            for com in communities_for_device(dendrogram, user.gateway):
                if com.members in hosting:
                    log.debug("app %d already placed in community %s", app.id, sorted(com.members))
                    break
                mapping = place_services_in_devices(app, com.members, ledger, user.gateway, infra, levels)
                if mapping is not None:
                    hosting.append(com.members)
                    for s, d in mapping.items():
                        P.add(s, d)
                    log.debug("placed app %d in community %s", app.id, sorted(com.members))
                    break
            else:
                log.debug("app %d for workload %d stays in the cloud", app.id, user.id)
    return P


# --- comparison policies -----------------------------------------------------


def _incoming_size(app: Application, service: int) -> float:
    return max(m.size for m in app.incoming(service))


def greedy_baseline_place(
    infra: InfrastructureGraph,
    apps: Sequence[Application],
    workloads: Sequence[Workload],
) -> PlacementMatrix:
    """Per user, put each service on the nearest device that hosts it or has room.

    Distance is the min-delay path from the user's gateway for the message
    that requests the service. The cloud is always a candidate.
    """
    P = PlacementMatrix.cloud_only(apps, infra.cloud_id)
    ledger = UsageLedger.for_infra(infra)
    trees: Dict[Tuple[int, float], Dict[int, float]] = {}
    for app in sorted(apps, key=lambda a: (a.deadline, a.id)):
        consumption = {s.id: s.consumption for s in app.services}
        users = sorted((w for w in workloads if w.app_id == app.id), key=lambda w: w.id)
        for user in users:
            for s in app.topological_order():
                size = _incoming_size(app, s)
                key = (user.gateway, size)
                if key not in trees:
                    trees[key] = shortest_delay_tree(infra, None, user.gateway, size)[0]
                dist = trees[key]
                candidates = [infra.cloud_id] + [
                    d for d in ledger.remaining
                    if s in ledger.hosted[d] or ledger.remaining[d] >= consumption[s]
                ]
                best = min((d for d in candidates if d in dist), key=lambda d: (dist[d], d))
                if best != infra.cloud_id:
                    ledger.assign(best, [s], consumption)
                    P.add(s, best)
    return P


def cloud_only_place(infra: InfrastructureGraph, apps: Sequence[Application], workloads=()) -> PlacementMatrix:
    return PlacementMatrix.cloud_only(apps, infra.cloud_id)


def service_estimates(
    infra: InfrastructureGraph, apps: Sequence[Application], workloads: Sequence[Workload]
) -> Dict[Tuple[int, int], Dict[int, float]]:
    """(workload, service) -> {device: static response estimate} for every device.

    The estimate is the gateway-to-device delay for the message requesting the
    service plus that message's execution time on the device.
    """
    by_app = {a.id: a for a in apps}
    trees: Dict[Tuple[int, float], Dict[int, float]] = {}
    out: Dict[Tuple[int, int], Dict[int, float]] = {}
    for w in workloads:
        app = by_app[w.app_id]
        for s in app.service_ids:
            incoming = app.incoming(s)
            size = max(m.size for m in incoming)
            instr = sum(m.instructions for m in incoming)
            key = (w.gateway, size)
            if key not in trees:
                trees[key] = shortest_delay_tree(infra, None, w.gateway, size)[0]
            dist = trees[key]
            out[(w.id, s)] = {
                d: dist[d] + instr / infra.devices[d].speed for d in dist
            }
    return out


def placement_objective(
    P: PlacementMatrix,
    infra: InfrastructureGraph,
    apps: Sequence[Application],
    workloads: Sequence[Workload],
    estimates=None,
) -> Tuple[int, float]:
    """(pairs over deadline, sum of estimates), each pair using its best instance."""
    if estimates is None:
        estimates = service_estimates(infra, apps, workloads)
    deadline = {a.id: a.deadline for a in apps}
    hosts = P.host_map()
    late, total = 0, 0.0
    for w in sorted(workloads, key=lambda w: w.id):
        app = next(a for a in apps if a.id == w.app_id)
        for s in app.service_ids:
            est = estimates[(w.id, s)]
            value = min(est[d] for d in hosts[s])
            total += value
            if value > deadline[w.app_id]:
                late += 1
    return late, total


def brute_force_place(
    infra: InfrastructureGraph,
    apps: Sequence[Application],
    workloads: Sequence[Workload],
    objective=placement_objective,
    limit: int = 10**7,
) -> PlacementMatrix:
    """Exhaustive search over every feasible placement matrix.

    Each service may run on any subset of the non-cloud devices (the cloud
    copy is always present). Ties resolve to fewer instances, then to the
    lexicographically smallest sorted pair list.
    """
    fog = infra.fog_ids()
    services = sorted(s.id for a in apps for s in a.services)
    count = (2 ** len(fog)) ** len(services)
    if count > limit:
        raise InstanceTooLargeError(f"{count} configurations exceed the limit of {limit}")
    consumption = {s.id: s.consumption for a in apps for s in a.services}
    capacity = [infra.devices[d].resources for d in fog]
    subsets = [tuple(d for i, d in enumerate(fog) if mask >> i & 1) for mask in range(2 ** len(fog))]
    cloud_rows = [(s, infra.cloud_id) for s in services]
    estimates = service_estimates(infra, apps, workloads)

    best_key, best_P = None, None
    for choice in itertools.product(range(len(subsets)), repeat=len(services)):
        used = [0.0] * len(fog)
        ok = True
        for s, mask in zip(services, choice):
            for i in range(len(fog)):
                if mask >> i & 1:
                    used[i] += consumption[s]
                    if used[i] > capacity[i]:
                        ok = False
                        break
            if not ok:
                break
        if not ok:
            continue
        P = PlacementMatrix(cloud_rows + [(s, d) for s, mask in zip(services, choice) for d in subsets[mask]])
        if objective is placement_objective:
            value = placement_objective(P, infra, apps, workloads, estimates)
        else:
            value = objective(P, infra, apps, workloads)
        key = (value, len(P), P.as_tuple())
        if best_key is None or key < best_key:
            best_key, best_P = key, P
    return best_P


def run_policy(name: str, infra: InfrastructureGraph, apps, workloads, dendrogram=None) -> PlacementMatrix:
    if name == "partition":
        P = partition_place(infra, dendrogram, apps, workloads)
    elif name == "greedy":
        P = greedy_baseline_place(infra, apps, workloads)
    elif name == "cloud-only":
        P = cloud_only_place(infra, apps, workloads)
    else:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICIES}")
    report = placement_feasible(P, infra, apps)
    assert report.ok, f"policy {name} violated capacity on {report.overloaded()}"
    return P
