import pytest
from hypothesis import given, strategies as st

from fogpart.model import (
    EXTERNAL,
    Application,
    Device,
    DeviceKind,
    MessageSpec,
    ModelError,
    NetworkLink,
    PlacementMatrix,
    Service,
    UnknownIdError,
    network_delay,
    placement_feasible,
    validate_application,
)

from conftest import make_app, make_infra

LINK = NetworkLink(0, 1, 5.0, 75000.0)


@pytest.mark.parametrize("size, expected", [(1500000, 25.0), (0, 5.0), (4500000, 65.0)])
def test_network_delay_examples(size, expected):
    assert network_delay(LINK, size) == expected


@given(
    pr=st.floats(0, 1000), bw=st.floats(1, 1e6), size=st.floats(0, 1e7),
)
def test_network_delay_linear_in_size(pr, bw, size):
    link = NetworkLink(0, 1, pr, bw)
    assert network_delay(link, 2 * size) - network_delay(link, size) == pytest.approx(size / bw, rel=1e-9, abs=1e-9)
    assert network_delay(link, size) <= network_delay(link, size + 1)


def test_link_is_undirected(path_infra):
    assert path_infra.link(0, 1) is path_infra.link(1, 0)


def test_link_invariants():
    with pytest.raises(ModelError):
        NetworkLink(1, 1, 5, 75000)
    with pytest.raises(ModelError):
        NetworkLink(0, 1, -1, 75000)
    with pytest.raises(ModelError):
        NetworkLink(0, 1, 5, 0)


def test_device_invariants():
    with pytest.raises(ModelError):
        Device(0, DeviceKind.FOG, 0, 100)
    with pytest.raises(ModelError):
        Device(0, DeviceKind.FOG, 10, 0)
    Device(0, DeviceKind.CLOUD, float("inf"), 100)


def test_infra_must_be_connected():
    with pytest.raises(ModelError):
        make_infra({0: (10, 100), 1: (10, 100), 2: (10, 100)}, [(0, 1)])


def test_infra_needs_one_cloud():
    from fogpart.model import InfrastructureGraph
    devs = [Device(0, DeviceKind.FOG, 10, 100), Device(1, DeviceKind.FOG, 10, 100)]
    with pytest.raises(ModelError):
        InfrastructureGraph(devs, [NetworkLink(0, 1, 5, 75000)], 0)


# --- feasibility -------------------------------------------------------------


def single_device_case(consumptions):
    infra = make_infra({0: (10, 100), 1: (10, 100)}, [(0, 1)])
    app = make_app(0, [(0, k) for k in range(1, len(consumptions))], consumptions)
    P = PlacementMatrix.cloud_only([app], infra.cloud_id)
    for s in app.services:
        P.add(s.id, 0)
    return P, infra, app


def test_feasible_cloud_only(path_infra):
    app = make_app(0, [(0, 1)], [3, 3])
    P = PlacementMatrix.cloud_only([app], path_infra.cloud_id)
    rep = placement_feasible(P, path_infra, [app])
    assert rep.ok
    assert all(u == 0 for u in rep.usage.values())


def test_feasible_over_capacity():
    P, infra, app = single_device_case([6, 6])
    rep = placement_feasible(P, infra, [app])
    assert not rep.ok
    assert rep.usage[0] == 12
    assert rep.overloaded() == [0]


def test_feasible_boundary():
    P, infra, app = single_device_case([4, 6])
    rep = placement_feasible(P, infra, [app])
    assert rep.ok and rep.usage[0] == 10


def test_feasible_unknown_ids(path_infra):
    app = make_app(0, [], [1])
    with pytest.raises(UnknownIdError):
        placement_feasible(PlacementMatrix([(99, 0)]), path_infra, [app])
    with pytest.raises(UnknownIdError):
        placement_feasible(PlacementMatrix([(0, 99)]), path_infra, [app])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2)), max_size=12), st.data())
def test_removing_instances_keeps_feasibility(pairs, data):
    infra = make_infra({0: (10, 100), 1: (8, 100), 2: (12, 100)}, [(0, 1), (1, 2)])
    app = make_app(0, [(0, k) for k in range(1, 6)], [1, 2, 3, 4, 5, 6])
    P = PlacementMatrix.cloud_only([app], infra.cloud_id)
    for s, d in pairs:
        P.add(s, d)
    if not placement_feasible(P, infra, [app]).ok:
        return
    fog_rows = sorted(e for e in P.entries if e[1] != infra.cloud_id)
    keep = data.draw(st.lists(st.sampled_from(fog_rows), unique=True) if fog_rows else st.just([]))
    sub = PlacementMatrix.cloud_only([app], infra.cloud_id)
    for e in keep:
        sub.add(*e)
    assert placement_feasible(sub, infra, [app]).ok


# --- application validation ----------------------------------------------------


def test_minimal_app_valid():
    app = Application(0, (Service(0, 0, 1, True),), (MessageSpec(EXTERNAL, 0, 10, 10),), 100)
    assert validate_application(app) == []


def test_two_entry_points():
    app = Application(0, (Service(0, 0, 1, True), Service(1, 0, 1, True)),
                      (MessageSpec(EXTERNAL, 0, 10, 10), MessageSpec(0, 1, 10, 10)), 100)
    assert validate_application(app) == ["multiple entry points"]


def test_cycle_detected():
    app = make_app(0, [(0, 1), (1, 2)], [1, 1, 1])
    cyclic = Application(0, app.services, app.messages + (MessageSpec(2, 0, 10, 10),), 100)
    # brute-force oracle: a cycle exists iff some node reaches itself
    adj = {0: [1], 1: [2], 2: [0]}

    def reaches(a, b, seen=()):
        return any(n == b or (n not in seen and reaches(n, b, seen + (n,))) for n in adj[a])

    assert any(reaches(n, n) for n in adj)
    assert validate_application(cyclic) == ["cycle detected"]


def test_unreachable_and_missing_external():
    services = (Service(0, 0, 1, True), Service(1, 0, 1))
    assert validate_application(Application(0, services, (MessageSpec(EXTERNAL, 0, 1, 1),), 10)) == [
        "unreachable service"
    ]
    assert "missing external message" in validate_application(
        Application(0, services, (MessageSpec(0, 1, 1, 1),), 10)
    )


@given(st.integers(1, 12), st.integers(0, 10**6))
def test_generated_apps_are_valid_dags(n, seed):
    from fogpart.graphkit import generate_gn_application
    edges = generate_gn_application(n, seed)
    app = make_app(0, edges, [1] * n)
    assert validate_application(app) == []
    assert sum(s.is_entry_point for s in app.services) == 1
    assert len(app.topological_order()) == n


def test_placement_matrix_helpers():
    P = PlacementMatrix([(1, 0), (0, 0), (0, 3)])
    assert P.hosts(0) == [0, 3]
    assert P.services_on(0) == [0, 1]
    assert list(P) == [(0, 0), (0, 3), (1, 0)]
