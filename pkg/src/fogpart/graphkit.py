"""Graph algorithms used by the placement policy and the simulator.

Undirected graphs are plain adjacency dicts ``{node: set(neighbours)}`` with
integer nodes. Betweenness here is always hop-count based; routing uses
link delays. The two notions are kept separate on purpose.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from .model import Application, InfrastructureGraph, UnknownIdError, network_delay

Graph = Dict[int, Set[int]]
Edge = Tuple[int, int]

_REL_TOL = 1e-9


class UnreachableError(Exception):
    """No path over alive devices connects the two endpoints."""


def graph_from_edges(edges: Iterable[Edge], nodes: Iterable[int] = ()) -> Graph:
    g: Graph = {n: set() for n in nodes}
    for u, v in edges:
        g.setdefault(u, set()).add(v)
        g.setdefault(v, set()).add(u)
    return g


def edges_of(graph: Mapping[int, Iterable[int]]) -> List[Edge]:
    return sorted({(u, v) if u < v else (v, u) for u, nbrs in graph.items() for v in nbrs})


def fog_graph(infra: InfrastructureGraph) -> Graph:
    """The infrastructure graph without the cloud device."""
    return graph_from_edges(infra.fog_edges(), infra.fog_ids())


def connected_components(graph: Mapping[int, Iterable[int]]) -> List[FrozenSet[int]]:
    seen: Set[int] = set()
    comps = []
    for root in sorted(graph):
        if root in seen:
            continue
        comp = {root}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in graph[u]:
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def _brandes(graph: Mapping[int, Iterable[int]], nodes: Iterable[int], with_nodes: bool = False):
    """Unnormalised shortest-path betweenness restricted to ``nodes``.

    Each unordered pair {s, t} is counted once.
    """
    edge_score: Dict[Edge, float] = {}
    node_score: Dict[int, float] = {}
    nodes = sorted(nodes)
    for u in nodes:
        node_score[u] = 0.0
        for v in graph[u]:
            if u < v:
                edge_score[(u, v)] = 0.0
    for s in nodes:
        order = []
        preds: Dict[int, List[int]] = {s: []}
        sigma = {s: 1}
        dist = {s: 0}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv = dist[v] + 1
            for w in graph[v]:
                if w not in dist:
                    dist[w] = dv
                    sigma[w] = 0
                    preds[w] = []
                    queue.append(w)
                if dist[w] == dv:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(order, 0.0)
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                c = sigma[v] * coeff
                edge_score[(v, w) if v < w else (w, v)] += c
                delta[v] += c
            if w != s:
                node_score[w] += delta[w]
    for k in edge_score:
        edge_score[k] /= 2.0
    if with_nodes:
        for k in node_score:
            node_score[k] /= 2.0
        return edge_score, node_score
    return edge_score


def edge_betweenness(graph: Mapping[int, Iterable[int]]) -> Dict[Edge, float]:
    """Sum over node pairs of the fraction of hop-count shortest paths through each edge."""
    return _brandes(graph, graph.keys())


def node_betweenness(graph: Mapping[int, Iterable[int]]) -> Dict[int, float]:
    return _brandes(graph, graph.keys(), with_nodes=True)[1]


def _argmax_edge(scores: Mapping[Edge, float]) -> Edge:
    best = max(scores.values())
    cutoff = best - _REL_TOL * max(1.0, abs(best))
    return min(e for e, s in scores.items() if s >= cutoff)


# --- Girvan-Newman -----------------------------------------------------------


@dataclass
class Community:
    members: FrozenSet[int]
    depth: int
    children: List["Community"] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def __repr__(self) -> str:
        return f"Community(depth={self.depth}, members={sorted(self.members)})"


@dataclass
class Dendrogram:
    root: Community

    def communities(self) -> List[Community]:
        out, stack = [], [self.root]
        while stack:
            c = stack.pop()
            out.append(c)
            stack.extend(reversed(c.children))
        return out

    def export_text(self) -> str:
        """One community per line, indented by depth: ``depth: ids``."""
        lines = []

        def walk(c: Community):
            ids = " ".join(str(i) for i in sorted(c.members))
            lines.append(f"{'  ' * c.depth}{c.depth}: {ids}")
            for ch in c.children:
                walk(ch)

        walk(self.root)
        return "\n".join(lines) + "\n"


def girvan_newman(graph: Mapping[int, Iterable[int]]) -> Dendrogram:
    """Full Girvan-Newman hierarchy down to singletons.

    The max-betweenness edge (smallest endpoint pair on ties) is removed one
    at a time; a community gets children whenever removing an edge splits it.
    Only the component that lost the edge has its scores recomputed, which
    leaves every other score unchanged.
    """
    g: Graph = {u: set(vs) for u, vs in graph.items()}
    comps = connected_components(g)
    if len(comps) != 1:
        raise ValueError("girvan_newman needs a connected graph")
    root = Community(comps[0], 0)
    live: Dict[FrozenSet[int], Community] = {root.members: root}
    scores: Dict[FrozenSet[int], Dict[Edge, float]] = {root.members: edge_betweenness(g)}

    while True:
        candidates = {members: sc for members, sc in scores.items() if sc}
        if not candidates:
            break
        best_edge, best_comp, best_score = None, None, None
        for members, sc in candidates.items():
            e = _argmax_edge(sc)
            s = sc[e]
            if best_score is None:
                best_edge, best_comp, best_score = e, members, s
                continue
            tol = _REL_TOL * max(1.0, abs(best_score), abs(s))
            if s > best_score + tol or (abs(s - best_score) <= tol and e < best_edge):
                best_edge, best_comp, best_score = e, members, s
        u, v = best_edge
        g[u].discard(v)
        g[v].discard(u)
        del scores[best_comp]

        part_u = _component_of(g, u)
        if v in part_u:
            scores[best_comp] = _brandes(g, best_comp)
            continue
        parent = live.pop(best_comp)
        part_v = best_comp - part_u
        for part in sorted((part_u, part_v), key=min):
            child = Community(part, parent.depth + 1)
            parent.children.append(child)
            live[part] = child
            scores[part] = _brandes(g, part)
    return Dendrogram(root)


def _component_of(g: Graph, start: int) -> FrozenSet[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in g[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return frozenset(seen)


def communities_for_device(dendrogram: Dendrogram, device: int) -> List[Community]:
    """Non-singleton communities containing ``device``, deepest first."""
    if device not in dendrogram.root.members:
        raise UnknownIdError(f"device {device} is not in the dendrogram")
    out = []
    node: Optional[Community] = dendrogram.root
    while node is not None:
        if len(node.members) >= 2:
            out.append(node)
        node = next((c for c in node.children if device in c.members), None)
    out.sort(key=lambda c: (-c.depth, len(c.members), min(c.members)))
    return out


# --- applications ------------------------------------------------------------


@dataclass(frozen=True)
class ClosureSet:
    root: int
    members: FrozenSet[int]

    def __len__(self) -> int:
        return len(self.members)


def transitive_closure(app: Application, service: int) -> ClosureSet:
    """The service itself plus every service reachable along request edges."""
    adj: Dict[int, List[int]] = {s.id: [] for s in app.services}
    if service not in adj:
        raise UnknownIdError(f"service {service} not in app {app.id}")
    for m in app.messages:
        if m.source is not None:
            adj[m.source].append(m.target)
    seen = {service}
    stack = [service]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return ClosureSet(service, frozenset(seen))


# --- routing -----------------------------------------------------------------


def shortest_delay_tree(
    infra: InfrastructureGraph, alive: Optional[Mapping[int, bool]], src: int, size: float
) -> Tuple[Dict[int, float], Dict[int, Tuple[int, ...]]]:
    """Min-delay paths from ``src`` to every alive reachable device.

    Labels are ordered by (delay, device-id sequence) so equal-delay paths
    resolve to the lexicographically smallest sequence.
    """
    def is_alive(i):
        return alive is None or alive.get(i, False)

    if not is_alive(src):
        return {}, {}
    dist = {src: 0.0}
    path = {src: (src,)}
    heap = [(0.0, (src,), src)]
    done = set()
    while heap:
        _, p, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        d = dist[u]  # the heap key is rounded; accumulate from the exact label
        for v in infra.adjacency[u]:
            if v in done or not is_alive(v):
                continue
            nd = d + network_delay(infra.link(u, v), size)
            np_ = p + (v,)
            old = dist.get(v)
            if old is None or _better(nd, np_, old, path[v]):
                dist[v] = nd
                path[v] = np_
                heapq.heappush(heap, (round(nd, 9), np_, v))
    return dist, path


def _better(d1: float, p1: tuple, d2: float, p2: tuple) -> bool:
    tol = _REL_TOL * max(1.0, abs(d1), abs(d2))
    if d1 < d2 - tol:
        return True
    if d1 > d2 + tol:
        return False
    return p1 < p2


def path_delay(infra: InfrastructureGraph, path: Iterable[int], size: float) -> float:
    path = list(path)
    return sum(network_delay(infra.link(a, b), size) for a, b in zip(path, path[1:]))


def min_delay_path(
    infra: InfrastructureGraph, alive: Optional[Mapping[int, bool]], src: int, dst: int, size: float
) -> Tuple[List[int], float]:
    """Path and total delay between two alive devices; raises UnreachableError."""
    if src == dst:
        if alive is not None and not alive.get(src, False):
            raise UnreachableError(f"device {src} is not alive")
        return [src], 0.0
    _, paths = shortest_delay_tree(infra, alive, src, size)
    if dst not in paths:
        raise UnreachableError(f"no alive path {src} -> {dst}")
    p = list(paths[dst])
    return p, path_delay(infra, p, size)


# --- generators --------------------------------------------------------------


def generate_barabasi_albert(n: int, m: int, seed: int) -> Graph:
    """Preferential attachment grown from an (m+1)-clique on nodes 0..m.

    Produces m(m+1)/2 + m(n-m-1) edges.
    """
    if m < 1 or n <= m:
        raise ValueError(f"need n > m >= 1, got n={n}, m={m}")
    rng = random.Random(seed)
    g = graph_from_edges(
        ((i, j) for i in range(m + 1) for j in range(i + 1, m + 1)), range(m + 1)
    )
    # each node appears once per incident edge end
    repeated = [u for u in range(m + 1) for _ in range(len(g[u]))]
    for new in range(m + 1, n):
        targets: Set[int] = set()
        while len(targets) < m:
            targets.add(rng.choice(repeated))
        g[new] = set()
        for t in sorted(targets):
            g[new].add(t)
            g[t].add(new)
            repeated.extend((new, t))
    return g


def generate_gn_application(n_services: int, seed: int) -> List[Edge]:
    """Growing-network tree: node k > 0 receives an edge from a uniform earlier node.

    Returns the directed edges (parent, child); node 0 is the entry point.
    """
    if n_services < 1:
        raise ValueError("n_services must be >= 1")
    rng = random.Random(seed)
    return [(rng.randrange(k), k) for k in range(1, n_services)]


def cloud_attachment_node(graph: Mapping[int, Iterable[int]]) -> int:
    """Node with the highest betweenness (smallest id on ties)."""
    nb = node_betweenness(graph)
    best = max(nb.values())
    cutoff = best - _REL_TOL * max(1.0, best)
    return min(u for u, s in nb.items() if s >= cutoff)


def select_gateways(
    graph: Mapping[int, Iterable[int]], fraction: float, exclude: Optional[int] = None
) -> Set[int]:
    """The floor(fraction * n) nodes with the lowest betweenness, ties by smaller id.

    ``exclude`` defaults to the cloud attachment node, which is never a gateway.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    nb = node_betweenness(graph)
    if exclude is None:
        exclude = cloud_attachment_node(graph)
    k = math.floor(fraction * len(nb) + 1e-9)
    ranked = sorted((u for u in nb if u != exclude), key=lambda u: (round(nb[u], 9), u))
    return set(ranked[:k])


# --- text formats ------------------------------------------------------------


def export_edge_list(infra: InfrastructureGraph) -> str:
    """``u v pr bw`` per line."""
    return "".join(
        f"{l.key[0]} {l.key[1]} {l.propagation!r} {l.bandwidth!r}\n"
        for _, l in sorted(infra.links.items())
    )


def parse_edge_list(text: str) -> List[Tuple[int, int, float, float]]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        u, v, pr, bw = line.split()
        out.append((int(u), int(v), float(pr), float(bw)))
    return out
