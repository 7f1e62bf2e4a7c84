import pytest

from fogpart.model import (
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


def make_infra(fog, edges, cloud_attachment=None, cloud_pr=100.0, bw=75000.0, pr=5.0,
               cloud_speed=10000.0, gateways=()):
    """fog: {id: (resources, speed)}; edges: [(u, v)] or [(u, v, pr)]."""
    cloud_id = max(fog) + 1
    if cloud_attachment is None:
        cloud_attachment = min(fog)
    devices = [
        Device(i, DeviceKind.GATEWAY if i in gateways else DeviceKind.FOG, r, s)
        for i, (r, s) in fog.items()
    ]
    devices.append(Device(cloud_id, DeviceKind.CLOUD, UNBOUNDED, cloud_speed))
    links = []
    for e in edges:
        u, v = e[0], e[1]
        links.append(NetworkLink(u, v, e[2] if len(e) > 2 else pr, bw))
    links.append(NetworkLink(cloud_attachment, cloud_id, cloud_pr, bw))
    return InfrastructureGraph(devices, links, cloud_attachment)


def make_app(app_id, edges, consumption, deadline=50000.0, first_id=0, size=1500000.0,
             instructions=40000.0, sizes=None, instrs=None):
    """Tree app; ``edges`` are (parent, child) local indices, node 0 is the entry point."""
    n = len(consumption)
    ids = [first_id + k for k in range(n)]
    services = tuple(Service(ids[k], app_id, consumption[k], k == 0) for k in range(n))
    sizes = sizes or {}
    instrs = instrs or {}
    messages = [MessageSpec(EXTERNAL, ids[0], sizes.get(None, size), instrs.get(None, instructions))]
    for p, c in edges:
        messages.append(MessageSpec(ids[p], ids[c], sizes.get((p, c), size), instrs.get((p, c), instructions)))
    return Application(app_id, services, tuple(messages), deadline)


@pytest.fixture
def path_infra():
    # 0 - 1 - 2, cloud on 2
    return make_infra({0: (10, 100), 1: (10, 100), 2: (10, 100)}, [(0, 1), (1, 2)],
                      cloud_attachment=2, gateways={0})
