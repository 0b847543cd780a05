import random

import pytest

from factdial.corpus import Triple
from factdial.errors import EmptyGraph, TooLarge
from factdial.pcst import (
    PrizedGraph,
    SubgraphResult,
    assign_prizes,
    brute_force_pcst,
    solve_pcst,
)
from factdial.selection import ScoredTriple


def path_graph(prizes, costs=None):
    """Nodes n0-n1-...-nk in a chain."""
    names = [f"n{i}" for i in range(len(prizes))]
    edge_costs = {}
    for i in range(len(prizes) - 1):
        cost = 1.0 if costs is None else costs[i]
        edge_costs[(names[i], names[i + 1])] = cost
    return PrizedGraph(node_prizes=dict(zip(names, prizes)), edge_costs=edge_costs)


def test_assign_prizes_single_triple():
    scored = [ScoredTriple(Triple("subj", "p", "obj"), 0.8, 0)]
    g = assign_prizes(scored, k=1)
    assert g.node_prizes == {"subj": 1.0, "obj": 0.0}
    assert g.edge_costs == {("obj", "subj"): 1.0}


def test_assign_prizes_shared_subject_takes_max():
    scored = [
        ScoredTriple(Triple("x", "p", "a"), 0.9, 0),
        ScoredTriple(Triple("x", "q", "b"), 0.5, 1),
    ]
    g = assign_prizes(scored, k=2)
    assert g.node_prizes["x"] == 2.0  # max(k - 0, k - 1)


def test_assign_prizes_fixture_pool():
    scored = [
        ScoredTriple(Triple("Judd Trump", "sport", "snooker"), 0.9, 0),
        ScoredTriple(Triple("Judd Trump", "nickname", "The Ace"), 0.2, 1),
        ScoredTriple(Triple("snooker", "subclass of", "cue sport"), 0.7, 2),
    ]
    g = assign_prizes(scored, k=2)
    # rank 0 -> Judd Trump (score .9), rank 1 -> snooker (score .7)
    assert g.node_prizes == {
        "Judd Trump": 2.0,
        "snooker": 1.0,
        "The Ace": 0.0,
        "cue sport": 0.0,
    }
    assert set(g.edge_costs) == {
        ("Judd Trump", "snooker"),
        ("Judd Trump", "The Ace"),
        ("cue sport", "snooker"),
    }
    assert all(c == 1.0 for c in g.edge_costs.values())


def test_solve_path_picks_lone_prize():
    g = path_graph([0.0, 0.0, 5.0])
    result = solve_pcst(g)
    assert result.nodes == frozenset({"n2"})
    assert result.objective == 5.0


def test_solve_path_bridges_zero_prize_middle():
    g = path_graph([3.0, 0.0, 3.0])
    result = solve_pcst(g)
    assert result.nodes == frozenset({"n0", "n1", "n2"})
    assert result.objective == 4.0


def test_solve_single_node():
    g = PrizedGraph(node_prizes={"only": 2.0}, edge_costs={})
    result = solve_pcst(g)
    assert result == SubgraphResult(frozenset({"only"}), frozenset(), 2.0)


def test_solve_star_keeps_center_only():
    prizes = {"center": 10.0, "l1": 0.0, "l2": 0.0, "l3": 0.0}
    edges = {("center", f"l{i}"): 1.0 for i in (1, 2, 3)}
    result = solve_pcst(PrizedGraph(prizes, edges))
    assert result.nodes == frozenset({"center"})
    assert result.objective == 10.0


def test_solve_empty_graph():
    with pytest.raises(EmptyGraph):
        solve_pcst(PrizedGraph({}, {}))


def test_brute_force_path_fixtures():
    assert brute_force_pcst(path_graph([0.0, 0.0, 5.0])).objective == 5.0
    assert brute_force_pcst(path_graph([3.0, 0.0, 3.0])).objective == 4.0


def test_brute_force_zero_prizes_picks_single_node():
    g = path_graph([0.0, 0.0, 0.0])
    result = brute_force_pcst(g)
    assert len(result.nodes) == 1
    assert result.objective == 0.0


def test_brute_force_too_large():
    prizes = {f"n{i}": 1.0 for i in range(13)}
    with pytest.raises(TooLarge):
        brute_force_pcst(PrizedGraph(prizes, {}))


def random_graph(rng, max_nodes=8, unit_costs=True):
    n = rng.randrange(2, max_nodes + 1)
    names = [f"n{i:02d}" for i in range(n)]
    prizes = {x: round(rng.uniform(0, 5), 2) if rng.random() < 0.8 else 0.0 for x in names}
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.45:
                cost = 1.0 if unit_costs else round(rng.uniform(0.5, 2.0), 2)
                edges[(names[i], names[j])] = cost
    return PrizedGraph(prizes, edges)


def _is_tree(result: SubgraphResult) -> bool:
    if len(result.edges) != len(result.nodes) - 1:
        return False
    if not result.nodes:
        return False
    adj = {n: [] for n in result.nodes}
    for u, v in result.edges:
        adj[u].append(v)
        adj[v].append(u)
    start = next(iter(result.nodes))
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen == result.nodes


def test_solver_output_connected_acyclic_on_random_graphs():
    rng = random.Random(2024)
    for _ in range(200):
        g = random_graph(rng, max_nodes=12, unit_costs=rng.random() < 0.5)
        result = solve_pcst(g)
        assert _is_tree(result)
        recomputed = sum(g.node_prizes[n] for n in sorted(result.nodes)) - sum(
            g.edge_costs[e] for e in sorted(result.edges)
        )
        assert result.objective == recomputed


def test_solver_never_beats_brute_force():
    rng = random.Random(31)
    for _ in range(100):
        g = random_graph(rng, max_nodes=8)
        greedy = solve_pcst(g)
        exact = brute_force_pcst(g)
        assert greedy.objective <= exact.objective + 1e-9


CURATED = [
    path_graph([0.0, 0.0, 5.0]),
    path_graph([3.0, 0.0, 3.0]),
    PrizedGraph({"only": 2.0}, {}),
    PrizedGraph(
        {"center": 10.0, "l1": 0.0, "l2": 0.0},
        {("center", "l1"): 1.0, ("center", "l2"): 1.0},
    ),
    # triangle, all prizes 2: taking all three nodes with two edges wins
    PrizedGraph(
        {"a": 2.0, "b": 2.0, "c": 2.0},
        {("a", "b"): 1.0, ("b", "c"): 1.0, ("a", "c"): 1.0},
    ),
    # long path with rich endpoints
    path_graph([5.0, 0.0, 0.0, 5.0]),
    # disconnected: isolated cheap node vs rich pair
    PrizedGraph({"iso": 1.0, "x": 4.0, "y": 1.5}, {("x", "y"): 1.0}),
    # leaf worth exactly its edge: joining it is neutral, objective matches either way
    path_graph([3.0, 1.0]),
]


def test_solver_optimal_on_curated_suite():
    for g in CURATED:
        assert solve_pcst(g).objective == pytest.approx(brute_force_pcst(g).objective)
