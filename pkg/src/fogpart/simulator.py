"""Deterministic discrete-event simulation of request processing with node failures.

Each device is a single FIFO server. Messages are routed over the min-delay
path of the alive graph to the nearest alive instance of their target
service. Failures are permanent and remove a device together with its queue,
its running execution and any in-flight message that still has to cross it.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .graphkit import shortest_delay_tree
from .model import (
    Application,
    InfrastructureGraph,
    MessageSpec,
    PlacementMatrix,
    Scenario,
    Workload,
)

log = logging.getLogger(__name__)

# event classes, ordered: failures before arrivals before completions
_FAIL, _ARRIVE, _DONE = 0, 1, 2


class EmptyScopeError(ValueError):
    pass


@dataclass(frozen=True)
class FailureSchedule:
    events: Tuple[Tuple[float, int], ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.events]
        devices = [d for _, d in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("failure times must be strictly increasing")
        if len(set(devices)) != len(devices):
            raise ValueError("a device can fail only once")

    def __len__(self) -> int:
        return len(self.events)


def build_failure_schedule(infra: InfrastructureGraph, duration: float, seed: int) -> FailureSchedule:
    """Fail every non-cloud device once, in seeded random order, evenly spaced in time."""
    if not duration > 0:
        raise ValueError("duration must be > 0")
    order = infra.fog_ids()
    random.Random(seed).shuffle(order)
    step = duration / (len(order) + 1)
    return FailureSchedule(tuple((k * step, d) for k, d in enumerate(order, start=1)))


@dataclass
class RequestRecord:
    workload: int
    app: int
    emit_time: float
    failed_count_at_emit: int
    done_time: Optional[float] = None

    @property
    def response_time(self) -> Optional[float]:
        return None if self.done_time is None else self.done_time - self.emit_time


@dataclass
class Snapshot:
    failed_count: int
    time: float
    ratios: Dict[int, float]
    reachable: Dict[int, int]


@dataclass
class MetricsStore:
    requests: List[RequestRecord] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    busy: Dict[int, float] = field(default_factory=dict)
    deadlines: Dict[int, float] = field(default_factory=dict)
    trace: Optional[List[tuple]] = None

    def satisfied(self, r: RequestRecord) -> bool:
        return r.done_time is not None and r.done_time - r.emit_time < self.deadlines[r.app]

    def write_requests_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["workload", "app", "emit_ms", "done_ms", "satisfied", "failed_count_at_emit"])
            for r in self.requests:
                w.writerow([
                    r.workload, r.app, repr(r.emit_time),
                    "NA" if r.done_time is None else repr(r.done_time),
                    int(self.satisfied(r)), r.failed_count_at_emit,
                ])

    def write_availability_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["failed_count", "app", "ratio"])
            for snap in self.snapshots:
                for app in sorted(snap.ratios):
                    w.writerow([snap.failed_count, app, repr(snap.ratios[app])])


def deadline_satisfaction(metrics: MetricsStore, scope: str = "system", key=None) -> float:
    """Share of requests answered strictly before the app deadline.

    ``scope`` is ``"system"``, ``"app"`` (key = app id) or ``"workload-app"``
    (key = (workload id, app id)). Requests that never finished count only in
    the denominator.
    """
    if scope == "system":
        rs = metrics.requests
    elif scope == "app":
        rs = [r for r in metrics.requests if r.app == key]
    elif scope == "workload-app":
        rs = [r for r in metrics.requests if (r.workload, r.app) == tuple(key)]
    else:
        raise ValueError(f"unknown scope {scope!r}")
    if not rs:
        raise EmptyScopeError(f"no requests in scope {scope} {key}")
    return sum(metrics.satisfied(r) for r in rs) / len(rs)


def _reachable_from(infra: InfrastructureGraph, alive: Mapping[int, bool], start: int) -> set:
    if not alive.get(start, False):
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in infra.adjacency[u]:
            if v not in seen and alive.get(v, False):
                seen.add(v)
                queue.append(v)
    return seen


def availability_counts(
    infra: InfrastructureGraph,
    alive: Mapping[int, bool],
    P: PlacementMatrix,
    workloads: Sequence[Workload],
    apps: Sequence[Application],
) -> Tuple[Dict[int, int], Dict[int, int]]:
    """Per app: (workloads able to reach every service, workloads requesting it)."""
    hosts = P.host_map()
    services = {a.id: a.service_ids for a in apps}
    reach_cache: Dict[int, set] = {}
    able: Dict[int, int] = {a.id: 0 for a in apps}
    total: Dict[int, int] = {a.id: 0 for a in apps}
    for w in workloads:
        total[w.app_id] += 1
        if w.gateway not in reach_cache:
            reach_cache[w.gateway] = _reachable_from(infra, alive, w.gateway)
        reach = reach_cache[w.gateway]
        if reach and all(any(d in reach for d in hosts.get(s, ())) for s in services[w.app_id]):
            able[w.app_id] += 1
    return able, total


def availability_snapshot(
    infra: InfrastructureGraph,
    alive: Mapping[int, bool],
    P: PlacementMatrix,
    workloads: Sequence[Workload],
    apps: Sequence[Application],
) -> Dict[int, float]:
    able, total = availability_counts(infra, alive, P, workloads, apps)
    return {a: able[a] / total[a] for a in total if total[a]}


class _Router:
    """Nearest-alive-instance routing with per-epoch caching of delay trees."""

    def __init__(self, infra: InfrastructureGraph, P: PlacementMatrix, alive: Dict[int, bool]):
        self.infra = infra
        self.hosts = P.host_map()
        self.alive = alive
        self.cache: Dict[Tuple[int, float], tuple] = {}

    def invalidate(self) -> None:
        self.cache.clear()

    def route(self, src: int, service: int, size: float):
        """(dst, path, cumulative delays) or None when no alive instance is reachable."""
        key = (src, size)
        tree = self.cache.get(key)
        if tree is None:
            tree = self.cache[key] = shortest_delay_tree(self.infra, self.alive, src, size)
        dist, paths = tree
        best = None
        for d in self.hosts.get(service, ()):
            if d in dist and (best is None or (dist[d], d) < (dist[best], best)):
                best = d
        if best is None:
            return None
        path = paths[best]
        return best, path, tuple(dist[x] for x in path)


@dataclass(eq=False)
class _Message:
    request: int
    spec: MessageSpec
    dst: int
    path: Tuple[int, ...]
    hop_times: Tuple[float, ...]  # absolute arrival time at each path node
    dropped: bool = False


@dataclass(eq=False)
class _Request:
    record: RequestRecord
    app: Application
    pending: set
    lost: bool = False


class Simulation:
    def __init__(self, scenario: Scenario, P: PlacementMatrix, schedule: FailureSchedule,
                 duration: float, seed: int = 0, trace: bool = False):
        self.infra = scenario.infra
        self.apps = {a.id: a for a in scenario.apps}
        self.workloads = sorted(scenario.workloads, key=lambda w: w.id)
        self.P = P
        self.schedule = schedule
        self.duration = duration
        self.seed = seed
        self.alive = {i: True for i in self.infra.devices}
        self.router = _Router(self.infra, P, self.alive)
        self.metrics = MetricsStore(
            deadlines={a.id: a.deadline for a in scenario.apps},
            busy={i: 0.0 for i in self.infra.devices},
            trace=[] if trace else None,
        )
        self.failed = 0
        self._heap: list = []
        self._seq = itertools.count()
        self._requests: List[_Request] = []
        self._queues: Dict[int, deque] = {i: deque() for i in self.infra.devices}
        self._running: Dict[int, Optional[Tuple[_Message, float]]] = {i: None for i in self.infra.devices}
        self._in_flight: Dict[int, _Message] = {}

    # -- scheduling ---------------------------------------------------------

    def _push(self, time: float, cls: int, kind: str, payload) -> None:
        heapq.heappush(self._heap, (time, cls, next(self._seq), kind, payload))

    def _trace(self, *row) -> None:
        if self.metrics.trace is not None:
            self.metrics.trace.append(row)

    def run(self) -> MetricsStore:
        for t, d in self.schedule.events:
            self._push(t, _FAIL, "fail", d)
        for w in self.workloads:
            if w.period <= self.duration:
                self._push(float(w.period), _ARRIVE, "emit", w)
        self._snapshot(0.0)
        while self._heap:
            t, _, _, kind, payload = heapq.heappop(self._heap)
            getattr(self, "_on_" + kind)(t, payload)
        return self.metrics

    def _snapshot(self, t: float) -> None:
        able, total = availability_counts(
            self.infra, self.alive, self.P, self.workloads, list(self.apps.values())
        )
        ratios = {a: able[a] / total[a] for a in sorted(total) if total[a]}
        reach = {a: able[a] for a in sorted(total) if total[a]}
        self.metrics.snapshots.append(Snapshot(self.failed, t, ratios, reach))

    # -- handlers -----------------------------------------------------------

    def _on_fail(self, t: float, device: int) -> None:
        self.alive[device] = False
        self.failed += 1
        self.router.invalidate()
        self._trace("fail", t, device)
        running = self._running[device]
        if running is not None:
            msg, start = running
            self.metrics.busy[device] += t - start
            self._lose(msg.request)
            self._running[device] = None
        for msg in self._queues[device]:
            self._lose(msg.request)
        self._queues[device].clear()
        for key, msg in list(self._in_flight.items()):
            for node, at in zip(msg.path[1:], msg.hop_times[1:]):
                if node == device and at >= t:
                    msg.dropped = True
                    self._lose(msg.request)
                    del self._in_flight[key]
                    break
        self._snapshot(t)

    def _on_emit(self, t: float, w: Workload) -> None:
        app = self.apps[w.app_id]
        rec = RequestRecord(w.id, app.id, t, self.failed)
        self.metrics.requests.append(rec)
        rid = len(self._requests)
        self._requests.append(_Request(rec, app, set(app.service_ids)))
        self._trace("emit", t, rid, w.id)
        if self.alive[w.gateway]:
            self._send(t, rid, w.gateway, app.external_message)
        else:
            self._lose(rid)
        nxt = t + w.period
        if nxt <= self.duration:
            self._push(nxt, _ARRIVE, "emit", w)

    def _send(self, t: float, rid: int, src: int, spec: MessageSpec) -> None:
        route = self.router.route(src, spec.target, spec.size)
        if route is None:
            self._lose(rid)
            return
        dst, path, cum = route
        msg = _Message(rid, spec, dst, path, tuple(t + c for c in cum))
        self._in_flight[id(msg)] = msg
        self._push(msg.hop_times[-1], _ARRIVE, "arrive", msg)

    def _on_arrive(self, t: float, msg: _Message) -> None:
        if msg.dropped:
            return
        self._in_flight.pop(id(msg), None)
        if not self.alive[msg.dst]:
            self._lose(msg.request)
            return
        self._trace("arrive", t, msg.dst, msg.request, msg.spec.target)
        self._queues[msg.dst].append(msg)
        if self._running[msg.dst] is None:
            self._start_next(t, msg.dst)

    def _start_next(self, t: float, device: int) -> None:
        queue = self._queues[device]
        if not queue:
            return
        msg = queue.popleft()
        self._running[device] = (msg, t)
        self._trace("start", t, device, msg.request, msg.spec.target)
        exec_time = msg.spec.instructions / self.infra.devices[device].speed
        self._push(t + exec_time, _DONE, "done", (device, msg))

    def _on_done(self, t: float, payload) -> None:
        device, msg = payload
        running = self._running[device]
        if not self.alive[device] or running is None or running[0] is not msg:
            return
        self.metrics.busy[device] += t - running[1]
        self._running[device] = None
        self._trace("done", t, device, msg.request, msg.spec.target)
        req = self._requests[msg.request]
        if not req.lost:
            service = msg.spec.target
            req.pending.discard(service)
            if not req.pending and req.record.done_time is None:
                req.record.done_time = t
            for out in req.app.outgoing(service):
                if req.lost:
                    break
                self._send(t, msg.request, device, out)
        self._start_next(t, device)

    def _lose(self, rid: int) -> None:
        self._requests[rid].lost = True


def run_simulation(scenario: Scenario, P: PlacementMatrix, schedule: FailureSchedule,
                   duration: float, seed: int = 0, trace: bool = False) -> MetricsStore:
    """Simulate ``duration`` ms of periodic requests, then drain in-progress work.

    Workload w emits at period, 2*period, ... up to ``duration``. There is no
    randomness inside a run; ``seed`` is kept for provenance only.
    """
    return Simulation(scenario, P, schedule, duration, seed, trace).run()
