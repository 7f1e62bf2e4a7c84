"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the summary lines are
written straight to the terminal so they also appear without ``-s``.
"""

import random
import statistics
import time
from pathlib import Path

import pytest

import oracles
from conftest import make_app
from fogpart.cli import main
from fogpart.graphkit import edge_betweenness, fog_graph, girvan_newman, transitive_closure
from fogpart.model import NetworkLink, network_delay, placement_feasible
from fogpart.placement import (
    brute_force_place,
    cloud_only_place,
    greedy_baseline_place,
    partition_place,
    placement_objective,
    run_policy,
)
from fogpart.scenario import ExperimentParams, generate_scenario, scenario_summary
from fogpart.simulator import FailureSchedule, build_failure_schedule, run_simulation


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail

    return emit


# Hand-computed: size = 18750 * j bytes over 75000 bytes/ms is j/4 ms, plus PR = 5.
DELAY_TRIPLES = [
    (5.0, 75000.0, 1500000, 25.0),
    (5.0, 75000.0, 1518750, 25.25),
    (5.0, 75000.0, 1537500, 25.5),
    (5.0, 75000.0, 1556250, 25.75),
    (5.0, 75000.0, 1875000, 30.0),
    (5.0, 75000.0, 2250000, 35.0),
    (5.0, 75000.0, 2493750, 38.25),
    (5.0, 75000.0, 2812500, 42.5),
    (5.0, 75000.0, 3000000, 45.0),
    (5.0, 75000.0, 3206250, 47.75),
    (5.0, 75000.0, 3375000, 50.0),
    (5.0, 75000.0, 3731250, 54.75),
    (5.0, 75000.0, 3750000, 55.0),
    (5.0, 75000.0, 3843750, 56.25),
    (5.0, 75000.0, 4068750, 59.25),
    (5.0, 75000.0, 4162500, 60.5),
    (5.0, 75000.0, 4312500, 62.5),
    (5.0, 75000.0, 4462500, 64.5),
    (5.0, 75000.0, 4481250, 64.75),
    (5.0, 75000.0, 4500000, 65.0),
]


def test_network_delay_units(verdict):
    t0 = time.perf_counter()
    bad = [(pr, bw, size, want) for pr, bw, size, want in DELAY_TRIPLES
           if network_delay(NetworkLink(0, 1, pr, bw), size) != want]
    elapsed = time.perf_counter() - t0
    verdict("network delay unit suite", not bad and elapsed < 1.0,
            f"{len(DELAY_TRIPLES) - len(bad)}/{len(DELAY_TRIPLES)} exact, {elapsed:.4f}s")


def test_graph_oracles(verdict):
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(60):
        rng = random.Random(seed)
        adj = oracles.random_connected_graph(rng, rng.randint(2, 8))
        eb, ref = edge_betweenness(adj), oracles.brute_edge_betweenness(adj)
        if eb.keys() != ref.keys() or any(abs(eb[e] - ref[e]) > 1e-9 for e in ref):
            mismatches += 1
        if [c.members for c in girvan_newman(adj).root.children] != oracles.brute_first_split(adj):
            mismatches += 1
    for seed in range(60):
        rng = random.Random(10**4 + seed)
        n = rng.randint(1, 12)
        edges = oracles.random_tree_edges(rng, n)
        app = make_app(0, edges, [1] * n)
        for u in range(n):
            if set(transitive_closure(app, u).members) != oracles.bfs_reach(edges, u):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    verdict("graph oracle suite", mismatches == 0 and elapsed < 30,
            f"60 graphs + 60 trees, {mismatches} mismatches, {elapsed:.1f}s")


def test_feasibility_invariant(verdict):
    t0 = time.perf_counter()
    violations = 0
    for seed in range(100):
        sc = generate_scenario(ExperimentParams(), seed)
        dendro = girvan_newman(fog_graph(sc.infra))
        for P in (partition_place(sc.infra, dendro, sc.apps, sc.workloads),
                  greedy_baseline_place(sc.infra, sc.apps, sc.workloads),
                  cloud_only_place(sc.infra, sc.apps, sc.workloads)):
            violations += not placement_feasible(P, sc.infra, sc.apps).ok
    elapsed = time.perf_counter() - t0
    verdict("capacity feasibility", violations == 0 and elapsed < 300,
            f"100 scenarios x 3 policies, {violations} violations, {elapsed:.0f}s")


def test_availability_monotone(verdict):
    violations, checked = 0, 0
    for seed in range(10):
        sc = generate_scenario(ExperimentParams(), seed)
        P = run_policy("partition", sc.infra, sc.apps, sc.workloads, girvan_newman(fog_graph(sc.infra)))
        sched = build_failure_schedule(sc.infra, 20000.0, seed)
        m = run_simulation(sc, P, sched, 20000.0, seed)
        for app in m.snapshots[0].ratios:
            seq = [s.ratios[app] for s in m.snapshots]
            checked += 1
            violations += any(b > a for a, b in zip(seq, seq[1:]))
    verdict("availability monotonicity", violations == 0,
            f"{checked} app sequences over 10 runs, {violations} violations")


def test_closed_form_response(verdict):
    worst = 0.0
    for seed in range(20):
        sc, P = oracles.trace_fixture(seed)
        m = run_simulation(sc, P, FailureSchedule(), 1000.0)
        expected = oracles.trace_response_time(sc.infra, P, sc.apps[0], 0)
        got = m.requests[0].response_time
        worst = max(worst, float("inf") if got is None else abs(got - expected))
    verdict("closed-form response check", worst <= 1e-9, f"20 fixtures, max error {worst:.3g} ms")


def tiny_params():
    return ExperimentParams(n_devices=3, ba_m=1, n_apps=1, gateway_fraction=0.34,
                            services_per_app=(2, 3), popularity=0.5)


def test_oracle_dominance(verdict):
    violations = 0
    n = 25
    for seed in range(n):
        sc = generate_scenario(tiny_params(), seed)
        best = placement_objective(brute_force_place(sc.infra, sc.apps, sc.workloads),
                                   sc.infra, sc.apps, sc.workloads)
        for policy in ("partition", "greedy"):
            P = run_policy(policy, sc.infra, sc.apps, sc.workloads)
            violations += not best <= placement_objective(P, sc.infra, sc.apps, sc.workloads)
    verdict("brute-force dominance", violations == 0, f"{n} tiny scenarios, {violations} violations")


@pytest.mark.slow
def test_failure_curves_vs_greedy(verdict):
    t0 = time.perf_counter()
    fractions, sat = [], {"partition": [], "greedy": []}
    for seed in range(10):
        sc = generate_scenario(ExperimentParams(), seed)
        dendro = girvan_newman(fog_graph(sc.infra))
        sched = build_failure_schedule(sc.infra, 100000.0, seed)
        users = {}
        for policy in ("partition", "greedy"):
            P = run_policy(policy, sc.infra, sc.apps, sc.workloads, dendro)
            m = run_simulation(sc, P, sched, 100000.0, seed)
            users[policy] = [sum(s.reachable.values()) for s in m.snapshots]
            sat[policy].append(sum(m.satisfied(r) for r in m.requests))
        wins = sum(p >= g for p, g in zip(users["partition"], users["greedy"]))
        fractions.append(wins / len(users["partition"]))
    elapsed = time.perf_counter() - t0
    frac = statistics.median(fractions)
    sat_p, sat_g = statistics.median(sat["partition"]), statistics.median(sat["greedy"])
    ok = frac >= 0.6 and sat_p >= sat_g and elapsed < 600
    verdict("failure curves vs greedy", ok,
            f"median share of snapshots with partition users >= greedy {frac:.3f} (need 0.6); "
            f"median satisfied partition {sat_p:g} vs greedy {sat_g:g}; {elapsed:.0f}s")


def test_scenario_band(verdict):
    services, capacity = [], []
    for seed in range(100):
        s = scenario_summary(generate_scenario(ExperimentParams(), seed))
        services.append(s.services)
        capacity.append(s.fog_capacity)
    ok = (40 <= min(services) and max(services) <= 200 and 1000 <= min(capacity) and max(capacity) <= 2500)
    verdict("scenario sanity band", ok,
            f"services {min(services)}..{max(services)}, capacity {min(capacity):g}..{max(capacity):g}")


def _pipeline(root: Path) -> dict:
    s = root / "scenario.json"
    assert main(["generate", "--seed", "21", "--out", str(s)]) == 0
    runs = []
    for policy in ("partition", "greedy", "cloud-only"):
        p = root / f"placement-{policy}.json"
        assert main(["place", "--scenario", str(s), "--policy", policy, "--out", str(p)]) == 0
        out = root / f"run-{policy}"
        assert main(["simulate", "--scenario", str(s), "--placement", str(p), "--duration", "20000",
                     "--seed", "21", "--out-dir", str(out)]) == 0
        runs.append(str(out))
    assert main(["report", "--runs", *runs, "--out-dir", str(root / "report")]) == 0
    return {f.relative_to(root): f.read_bytes() for f in sorted(root.rglob("*")) if f.is_file()}


def test_end_to_end_determinism(verdict, tmp_path, capsys):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    capsys.readouterr()
    differ = sorted(str(k) for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    verdict("end-to-end determinism", not differ and len(a) > 0,
            f"{len(a)} files compared, {len(differ)} differ {differ[:3]}")
