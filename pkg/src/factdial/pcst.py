"""Prize-Collecting Steiner Tree subgraph selection.

``solve_pcst`` grows a tree greedily: starting from the highest-prize node,
it repeatedly attaches the node whose prize minus shortest-path cost from
the current tree is largest (the whole path joins the tree, so low-prize
way-stations are allowed when the destination pays for them), then prunes
unprofitable leaves. ``brute_force_pcst`` is the exact oracle for tiny
graphs: it enumerates every connected node subset and charges it the cost
of a minimum spanning tree.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations

from .errors import EmptyGraph, TooLarge
from .selection import ScoredTriple

BRUTE_FORCE_NODE_LIMIT = 12

Edge = tuple[str, str]


def _edge(u: str, v: str) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class PrizedGraph:
    node_prizes: dict[str, float]
    edge_costs: dict[Edge, float]

    def __post_init__(self):
        for (u, v), cost in self.edge_costs.items():
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if (u, v) != _edge(u, v):
                raise ValueError(f"edge {(u, v)} not in canonical order")
            if cost <= 0:
                raise ValueError(f"edge {(u, v)} has non-positive cost")
            for endpoint in (u, v):
                if endpoint not in self.node_prizes:
                    raise ValueError(f"edge endpoint {endpoint!r} has no prize entry")

    def adjacency(self) -> dict[str, list[tuple[str, float]]]:
        adj: dict[str, list[tuple[str, float]]] = {n: [] for n in self.node_prizes}
        for (u, v), cost in self.edge_costs.items():
            adj[u].append((v, cost))
            adj[v].append((u, cost))
        for lst in adj.values():
            lst.sort()
        return adj


@dataclass(frozen=True)
class SubgraphResult:
    nodes: frozenset[str]
    edges: frozenset[Edge]
    objective: float


def _objective(g: PrizedGraph, nodes, edges) -> float:
    # summed in sorted order so the value is bit-for-bit recomputable
    return sum(g.node_prizes[n] for n in sorted(nodes)) - sum(
        g.edge_costs[e] for e in sorted(edges)
    )


def assign_prizes(scored: list[ScoredTriple], k: int) -> PrizedGraph:
    """Rank-based prizes over the k best triples' subject nodes, unit edge costs.

    The rank-r triple (0-based, by score then pool order) gives its subject
    prize k - r; a subject ranked several times keeps its best prize. Every
    triple becomes one undirected unit-cost edge; self-loops and exact
    parallel edges collapse away to keep the graph simple.
    """
    if not scored:
        raise ValueError("scored pool is empty")
    if k < 1:
        raise ValueError("k must be positive")
    prizes: dict[str, float] = {}
    edges: dict[Edge, float] = {}
    for st in scored:
        prizes.setdefault(st.triple.subject, 0.0)
        prizes.setdefault(st.triple.object, 0.0)
        if st.triple.subject != st.triple.object:
            edges[_edge(st.triple.subject, st.triple.object)] = 1.0
    ranked = sorted(scored, key=lambda st: (-st.score, st.source_index))
    for rank, st in enumerate(ranked[:k]):
        subject = st.triple.subject
        prizes[subject] = max(prizes[subject], float(k - rank))
    return PrizedGraph(node_prizes=prizes, edge_costs=edges)


def _cheapest_paths(g: PrizedGraph, adj, tree_nodes: set[str]):
    """Multi-source Dijkstra from the tree through non-tree nodes.

    Returns (dist, parent) for nodes outside the tree; parent[v] is the
    previous hop on a cheapest path, with deterministic tie-breaking.
    """
    dist: dict[str, float] = {n: 0.0 for n in tree_nodes}
    parent: dict[str, str] = {}
    heap = [(0.0, n) for n in sorted(tree_nodes)]
    heapq.heapify(heap)
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, cost in adj[u]:
            if v in tree_nodes or v in done:
                continue
            nd = d + cost
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent


def solve_pcst(g: PrizedGraph) -> SubgraphResult:
    """Greedy accretion plus leaf pruning; always returns a tree (or one node)."""
    if not g.node_prizes:
        raise EmptyGraph("no nodes")
    adj = g.adjacency()

    root = max(sorted(g.node_prizes), key=lambda n: g.node_prizes[n])
    tree_nodes: set[str] = {root}
    tree_edges: set[Edge] = set()

    while True:
        dist, parent = _cheapest_paths(g, adj, tree_nodes)
        best_node, best_marginal = None, 0.0
        for v in sorted(dist):
            if v in tree_nodes:
                continue
            marginal = g.node_prizes[v] - dist[v]
            if marginal > best_marginal:
                best_node, best_marginal = v, marginal
        if best_node is None:
            break
        # splice the whole path in; intermediate nodes ride along
        v = best_node
        while v not in tree_nodes:
            u = parent[v]
            tree_edges.add(_edge(u, v))
            tree_nodes.add(v)
            v = u

    # prune leaves that cost more than they pay, repeatedly
    changed = True
    while changed and len(tree_nodes) > 1:
        changed = False
        degree: dict[str, int] = {n: 0 for n in tree_nodes}
        incident: dict[str, Edge] = {}
        for e in tree_edges:
            for endpoint in e:
                degree[endpoint] += 1
                incident[endpoint] = e
        for leaf in sorted(n for n, deg in degree.items() if deg == 1):
            if len(tree_nodes) == 1:
                break
            e = incident[leaf]
            if g.node_prizes[leaf] < g.edge_costs[e] and e in tree_edges:
                tree_nodes.remove(leaf)
                tree_edges.remove(e)
                changed = True

    return SubgraphResult(
        nodes=frozenset(tree_nodes),
        edges=frozenset(tree_edges),
        objective=_objective(g, tree_nodes, tree_edges),
    )


def _connected(nodes: tuple[str, ...], adj) -> bool:
    members = set(nodes)
    stack, seen = [nodes[0]], {nodes[0]}
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if v in members and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(members)


def _mst_cost_and_edges(g: PrizedGraph, nodes: tuple[str, ...], adj):
    """Prim's algorithm over the induced subgraph; assumes it is connected."""
    members = set(nodes)
    start = nodes[0]
    in_tree = {start}
    edges: set[Edge] = set()
    cost = 0.0
    heap = [(c, start, v) for v, c in adj[start] if v in members]
    heapq.heapify(heap)
    while heap and len(in_tree) < len(members):
        c, u, v = heapq.heappop(heap)
        if v in in_tree:
            continue
        in_tree.add(v)
        edges.add(_edge(u, v))
        cost += c
        for w, wc in adj[v]:
            if w in members and w not in in_tree:
                heapq.heappush(heap, (wc, v, w))
    return cost, edges


def brute_force_pcst(g: PrizedGraph) -> SubgraphResult:
    """Exact optimum by enumerating connected node subsets (<= 12 nodes)."""
    if not g.node_prizes:
        raise EmptyGraph("no nodes")
    if len(g.node_prizes) > BRUTE_FORCE_NODE_LIMIT:
        raise TooLarge(f"{len(g.node_prizes)} nodes > limit {BRUTE_FORCE_NODE_LIMIT}")
    adj = g.adjacency()
    all_nodes = sorted(g.node_prizes)

    best: SubgraphResult | None = None
    for size in range(1, len(all_nodes) + 1):
        for subset in combinations(all_nodes, size):
            if not _connected(subset, adj):
                continue
            _, edges = _mst_cost_and_edges(g, subset, adj)
            objective = _objective(g, subset, edges)
            if best is None or objective > best.objective:
                best = SubgraphResult(
                    nodes=frozenset(subset), edges=frozenset(edges), objective=objective
                )
    assert best is not None
    return best
