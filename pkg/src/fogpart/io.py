"""JSON interchange for scenarios and placements."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import List, Tuple

from .model import (
    EXTERNAL,
    UNBOUNDED,
    Application,
    Device,
    DeviceKind,
    InfrastructureGraph,
    MessageSpec,
    ModelError,
    NetworkLink,
    PlacementMatrix,
    Scenario,
    Service,
    Workload,
    validate_application,
)


class DataError(ValueError):
    """A scenario or placement file is malformed or inconsistent."""


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def scenario_to_dict(sc: Scenario) -> dict:
    infra = sc.infra
    return {
        "seed": sc.seed,
        "cloud_attachment": infra.cloud_attachment,
        "devices": [
            {
                "id": d.id,
                "kind": d.kind.value,
                "resources": None if math.isinf(d.resources) else d.resources,
                "speed": d.speed,
            }
            for d in sorted(infra.devices.values(), key=lambda d: d.id)
        ],
        "links": [
            {"endpoints": list(k), "propagation": l.propagation, "bandwidth": l.bandwidth}
            for k, l in sorted(infra.links.items())
        ],
        "applications": [
            {
                "id": a.id,
                "deadline": a.deadline,
                "services": [
                    {"id": s.id, "app_id": s.app_id, "consumption": s.consumption,
                     "is_entry_point": s.is_entry_point}
                    for s in a.services
                ],
                "messages": [
                    {"source": m.source, "target": m.target, "size": m.size,
                     "instructions": m.instructions}
                    for m in a.messages
                ],
            }
            for a in sc.apps
        ],
        "workloads": [
            {"id": w.id, "gateway": w.gateway, "app_id": w.app_id, "period": w.period}
            for w in sc.workloads
        ],
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        devices = [
            Device(d["id"], DeviceKind(d["kind"]),
                   UNBOUNDED if d.get("resources") is None else d["resources"], d["speed"])
            for d in data["devices"]
        ]
        links = [NetworkLink(l["endpoints"][0], l["endpoints"][1], l["propagation"], l["bandwidth"])
                 for l in data["links"]]
        infra = InfrastructureGraph(devices, links, data["cloud_attachment"])
        apps = []
        for a in data["applications"]:
            services = tuple(Service(s["id"], s["app_id"], s["consumption"], s["is_entry_point"])
                             for s in a["services"])
            messages = tuple(MessageSpec(m["source"], m["target"], m["size"], m["instructions"])
                             for m in a["messages"])
            apps.append(Application(a["id"], services, messages, a["deadline"]))
        workloads = [Workload(w["id"], w["gateway"], w["app_id"], w["period"]) for w in data["workloads"]]
        sc = Scenario(infra, apps, workloads, data.get("seed", 0))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataError(f"malformed scenario: {exc}") from exc
    problems = validate_scenario(sc)
    if problems:
        raise DataError("invalid scenario: " + "; ".join(problems))
    return sc


def validate_scenario(sc: Scenario) -> List[str]:
    problems = []
    seen = set()
    for a in sc.apps:
        for v in validate_application(a):
            problems.append(f"app {a.id}: {v}")
        for s in a.services:
            if s.id in seen:
                problems.append(f"service id {s.id} reused")
            seen.add(s.id)
            if s.app_id != a.id:
                problems.append(f"service {s.id} claims app {s.app_id} but belongs to {a.id}")
    app_ids = {a.id for a in sc.apps}
    gateways = set(sc.infra.gateway_ids())
    for w in sc.workloads:
        if w.gateway not in gateways:
            problems.append(f"workload {w.id}: {w.gateway} is not a gateway")
        if w.app_id not in app_ids:
            problems.append(f"workload {w.id}: unknown app {w.app_id}")
    return problems


def save_scenario(sc: Scenario, path) -> None:
    _dump(scenario_to_dict(sc), path)


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(data)


def placement_to_dict(P: PlacementMatrix, policy: str, seed: int) -> dict:
    return {
        "policy": policy,
        "seed": seed,
        "placement": [{"service": s, "device": d} for s, d in P],
    }


def save_placement(P: PlacementMatrix, policy: str, seed: int, path) -> None:
    _dump(placement_to_dict(P, policy, seed), path)


def load_placement(path) -> Tuple[PlacementMatrix, str, int]:
    try:
        data = json.loads(Path(path).read_text())
        P = PlacementMatrix((e["service"], e["device"]) for e in data["placement"])
        return P, data["policy"], data["seed"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read placement {path}: {exc}") from exc


def check_placement(P: PlacementMatrix, sc: Scenario) -> None:
    """Raise DataError if the placement does not match the scenario."""
    services = {s.id for a in sc.apps for s in a.services}
    for s, d in P:
        if s not in services:
            raise DataError(f"placement references unknown service {s}")
        if d not in sc.infra.devices:
            raise DataError(f"placement references unknown device {d}")
    missing = services - {s for s, d in P if d == sc.infra.cloud_id}
    if missing:
        raise DataError(f"services without a cloud instance: {sorted(missing)}")
