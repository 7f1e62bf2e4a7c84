"""Figure-analog CSV reports built from simulation run directories.

A run directory holds ``scenario.json``, ``placement.json``, ``run.json``,
``requests.csv``, ``availability.csv`` and ``failures.csv``.
"""

from __future__ import annotations

import csv
import json
import statistics
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

from .io import DataError, check_placement, load_placement, load_scenario
from .model import InfrastructureGraph, PlacementMatrix, Scenario

HEADERS = {
    "qos_evolution.csv": ["failed_count", "policy", "total_requests", "satisfied"],
    "availability_users.csv": ["failed_count", "policy", "reachable_users", "all_in_gateways"],
    "response_times.csv": ["app", "gateway", "policy", "mean_ms", "p95_ms", "n"],
    "placement.csv": ["service", "device", "policy"],
    "usage.csv": ["device", "used", "capacity", "utilization", "policy"],
    "hops.csv": ["workload", "app", "service", "hop_distance_to_nearest_instance", "policy"],
}


@dataclass
class Run:
    path: Path
    scenario: Scenario
    placement: PlacementMatrix
    policy: str
    requests: List[dict]
    availability: List[dict]
    failures: List[int]  # devices in failure order


def _read_csv(path: Path, header: Sequence[str]) -> List[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != list(header):
                raise DataError(f"{path}: unexpected header {reader.fieldnames}")
            return list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_run(path) -> Run:
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path} is not a run directory")
    scenario = load_scenario(path / "scenario.json")
    P, policy, _ = load_placement(path / "placement.json")
    check_placement(P, scenario)
    requests = _read_csv(path / "requests.csv",
                         ["workload", "app", "emit_ms", "done_ms", "satisfied", "failed_count_at_emit"])
    availability = _read_csv(path / "availability.csv", ["failed_count", "app", "ratio"])
    failures = [int(r["device"]) for r in _read_csv(path / "failures.csv", ["order", "time_ms", "device"])]
    return Run(path, scenario, P, policy, requests, availability, failures)


def qos_evolution(runs: Sequence[Run]) -> List[list]:
    """Requests and satisfied requests bucketed by failed devices at emission."""
    buckets: Dict[tuple, List[int]] = defaultdict(lambda: [0, 0])
    for run in runs:
        for r in run.requests:
            b = buckets[(int(r["failed_count_at_emit"]), run.policy)]
            b[0] += 1
            b[1] += int(r["satisfied"])
    return [[fc, pol, tot, sat] for (fc, pol), (tot, sat) in sorted(buckets.items())]


def availability_users(runs: Sequence[Run]) -> List[list]:
    """Users able to reach their whole app, plus the all-services-in-gateways bound.

    The bound counts workloads whose own gateway is still alive.
    """
    acc: Dict[tuple, List[int]] = defaultdict(lambda: [0, 0])
    for run in runs:
        per_app = defaultdict(int)
        for w in run.scenario.workloads:
            per_app[w.app_id] += 1
        gateways = [w.gateway for w in run.scenario.workloads]
        reach: Dict[int, float] = defaultdict(float)
        for row in run.availability:
            reach[int(row["failed_count"])] += float(row["ratio"]) * per_app[int(row["app"])]
        for fc in sorted(reach):
            dead = set(run.failures[:fc])
            bound = sum(1 for g in gateways if g not in dead)
            a = acc[(fc, run.policy)]
            a[0] += round(reach[fc])
            a[1] += bound
    return [[fc, pol, users, bound] for (fc, pol), (users, bound) in sorted(acc.items())]


def _p95(values: List[float]) -> float:
    if len(values) == 1:
        return values[0]
    return statistics.quantiles(values, n=20, method="inclusive")[-1]


def response_times(runs: Sequence[Run]) -> List[list]:
    samples: Dict[tuple, List[float]] = defaultdict(list)
    seen = set()
    for run in runs:
        gw = {w.id: w.gateway for w in run.scenario.workloads}
        for w in run.scenario.workloads:
            seen.add((w.app_id, w.gateway, run.policy))
        for r in run.requests:
            key = (int(r["app"]), gw[int(r["workload"])], run.policy)
            if r["done_ms"] != "NA":
                samples[key].append(float(r["done_ms"]) - float(r["emit_ms"]))
    rows = []
    for key in sorted(seen):
        vals = samples.get(key, [])
        if vals:
            rows.append([*key, repr(statistics.fmean(vals)), repr(_p95(vals)), len(vals)])
        else:
            rows.append([*key, "NA", "NA", 0])
    return rows


def placement_rows(runs: Sequence[Run]) -> List[list]:
    return [[s, d, run.policy] for run in runs for s, d in run.placement
            if d != run.scenario.infra.cloud_id]


def usage_rows(runs: Sequence[Run]) -> List[list]:
    rows = []
    for run in runs:
        infra = run.scenario.infra
        cr = {s.id: s.consumption for a in run.scenario.apps for s in a.services}
        used = defaultdict(float)
        for s, d in run.placement:
            used[d] += cr[s]
        for d in infra.fog_ids():
            cap = infra.devices[d].resources
            rows.append([d, used[d], cap, repr(used[d] / cap), run.policy])
    return rows


def hop_distances(infra: InfrastructureGraph, start: int) -> Dict[int, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in infra.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def hop_rows(runs: Sequence[Run]) -> List[list]:
    rows = []
    for run in runs:
        infra = run.scenario.infra
        hosts = run.placement.host_map()
        cache: Dict[int, Dict[int, int]] = {}
        for w in sorted(run.scenario.workloads, key=lambda w: w.id):
            if w.gateway not in cache:
                cache[w.gateway] = hop_distances(infra, w.gateway)
            dist = cache[w.gateway]
            for s in run.scenario.app(w.app_id).service_ids:
                rows.append([w.id, w.app_id, s, min(dist[d] for d in hosts[s]), run.policy])
    return rows


def write_reports(run_dirs: Sequence, out_dir) -> Dict[str, Path]:
    runs = [load_run(p) for p in run_dirs]
    if not runs:
        raise DataError("no runs given")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {
        "qos_evolution.csv": qos_evolution(runs),
        "availability_users.csv": availability_users(runs),
        "response_times.csv": response_times(runs),
        "placement.csv": placement_rows(runs),
        "usage.csv": usage_rows(runs),
        "hops.csv": hop_rows(runs),
    }
    written = {}
    for name, rows in tables.items():
        path = out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADERS[name])
            w.writerows(rows)
        written[name] = path
    return written


def write_run_metadata(out_dir, policy: str, seed: int, duration: float, failures: str, schedule,
                       infra: InfrastructureGraph = None) -> None:
    out_dir = Path(out_dir)
    meta = {"policy": policy, "seed": seed, "duration_ms": duration, "failures": failures}
    if infra is not None:
        link = infra.link(infra.cloud_attachment, infra.cloud_id)
        meta["cloud_link"] = {"propagation": link.propagation, "bandwidth": link.bandwidth,
                              "note": "invented default, not given by the source model"}
    (out_dir / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "failures.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "time_ms", "device"])
        for k, (t, d) in enumerate(schedule.events, start=1):
            w.writerow([k, repr(t), d])
