# tests/test_planner.py
import heapq
import json
import math

import numpy as np
import pytest

from dynamics import single_integrator_model
from environment import workspace_from_config
from planner import Node, PlannerGraph, Unreachable, Vertex
from scenarios import build_planner, load_scenario
from topology import ClassFilter, homologous, is_allowed, path_signature, segment_signature

DISC_WORLD = {
    "bounds": [0, 0, 10, 5],
    "goal": {"center": [9, 2.5], "radius": 0.5},
    "obstacles": [{"type": "disc", "center": [5, 2.5], "radius": 0.5}],
}


def _disc_graph(h_limit=math.inf) -> PlannerGraph:
    ws = workspace_from_config(DISC_WORLD)
    return PlannerGraph(single_integrator_model(0.1), ws, ClassFilter(h_limit), gamma=100.0, max_radius=10.0)


def _two_sided_graph() -> PlannerGraph:
    """Wortel in het doel en twee vertices boven en onder de schijf."""
    graph = _disc_graph()
    graph.add_root([9.0, 2.5])
    for x in ([5.0, 3.5], [5.0, 1.5]):
        vertex = graph.choose_parent(np.array(x)).vertex
        assert vertex is not None
        graph.rewire(vertex)
    return graph


def _expanded(min_vertices: int, seed: int = 7) -> PlannerGraph:
    graph = build_planner(load_scenario("integrator_two_obstacles"))
    rng = np.random.default_rng(seed)
    while len(graph.vertices) < min_vertices:
        graph.expand(50, rng)
    return graph


@pytest.fixture(scope="module")
def frozen_graph() -> PlannerGraph:
    return _expanded(300)


def test_append_node_keeps_cheapest_per_class():
    graph = _disc_graph()
    vertex = Vertex(0, np.array([2.0, 2.0]))
    graph.vertices.append(vertex)
    assert graph.append_node(vertex, Node(-1, 0, np.array([1.0]), 3.0))
    assert not graph.append_node(vertex, Node(-1, 0, np.array([1.0]), 5.0))
    assert [graph.nodes[i].cost for i in vertex.nodes] == [3.0]
    assert graph.append_node(vertex, Node(-1, 0, np.array([1.01]), 2.0))
    assert [graph.nodes[i].cost for i in vertex.nodes] == [2.0]
    assert graph.append_node(vertex, Node(-1, 0, np.array([0.0]), 9.0))
    assert sorted(graph.nodes[i].cost for i in vertex.nodes) == [2.0, 9.0]


def test_append_node_rejects_blocked_class():
    graph = _disc_graph(h_limit=0.6)
    vertex = Vertex(0, np.array([2.0, 2.0]))
    graph.vertices.append(vertex)
    assert not graph.append_node(vertex, Node(-1, 0, np.array([1.7]), 1.0))
    assert vertex.nodes == []


def test_add_root_signature():
    graph = _disc_graph()
    root = graph.add_root([9.0, 2.5])
    assert graph.nodes[root.nodes[0]].h.tolist() == [1.0]
    assert graph.nodes[root.nodes[0]].cost == 0.0
    other = graph.add_root([9.3, 2.6])
    expected = 1.0 + segment_signature([9.3, 2.6], [9.0, 2.5], graph.workspace)
    assert graph.nodes[other.nodes[0]].h == pytest.approx(expected)
    assert all(v.is_root and len(v.nodes) == 1 for v in graph.vertices)


def test_choose_parent_finds_both_sides_of_obstacle():
    graph = _two_sided_graph()
    n_vertices, n_edges = len(graph.vertices), len(graph.edges)
    result = graph.choose_parent(np.array([1.0, 2.5]), retain=False)
    assert result.vertex is None
    assert len(result.nodes) == 2
    a, b = (n.h[0] for n in result.nodes)
    assert abs(a - b) == pytest.approx(1.0, abs=1e-9)
    for node in result.nodes:
        assert node.cost == pytest.approx(4 * math.sqrt(17.0))
    assert len(graph.vertices) == n_vertices
    assert len(graph.edges) == n_edges


def test_choose_parent_without_collision_free_edge():
    graph = _disc_graph()
    graph.add_root([9.0, 2.5])
    result = graph.choose_parent(np.array([1.0, 2.5]))
    assert result.vertex is None
    assert result.nodes == []
    assert len(graph.vertices) == 1


def test_extract_reference_requires_connection():
    graph = _disc_graph()
    with pytest.raises(Unreachable):
        graph.extract_reference([1.0, 2.5])


def test_goal_only_sampling_builds_only_roots():
    graph = _disc_graph()
    graph.goal_bias = 1.0
    graph.expand(50, 0)
    assert graph.vertices
    assert all(v.is_root for v in graph.vertices)
    assert graph.edges == []
    assert graph.audit() == []


def _oracle_labels(graph: PlannerGraph) -> dict:
    """Dijkstra per (vertex, klasse) over alle edges, zonder dominantie-snoei."""
    best, heap, counter = {}, [], 0
    for v in graph.vertices:
        if v.is_root:
            for nid in v.nodes:
                node = graph.nodes[nid]
                key = (v.id, tuple(np.round(node.h, 6)))
                best[key] = (0.0, node.h)
                heapq.heappush(heap, (0.0, counter, key))
                counter += 1
    while heap:
        cost, _, key = heapq.heappop(heap)
        if cost > best[key][0]:
            continue
        vid, _ = key
        h = best[key][1]
        for eid in graph.in_edges.get(vid, []):
            edge = graph.edges[eid]
            if graph.vertices[edge.src].is_root:
                continue
            h2 = h + edge.hsig
            if not is_allowed(h2, graph.filter):
                continue
            key2 = (edge.src, tuple(np.round(h2, 6)))
            c2 = cost + edge.cost
            if c2 < best.get(key2, (math.inf,))[0]:
                best[key2] = (c2, h2)
                heapq.heappush(heap, (c2, counter, key2))
                counter += 1
    return best


def test_labels_match_dijkstra_oracle(frozen_graph):
    graph = frozen_graph
    oracle = _oracle_labels(graph)
    for v in graph.vertices:
        planner = {tuple(np.round(graph.nodes[i].h, 6)): graph.nodes[i].cost for i in v.nodes}
        expected = {k[1]: c for k, (c, _) in oracle.items() if k[0] == v.id}
        assert planner.keys() == expected.keys()
        for key, cost in expected.items():
            assert planner[key] == pytest.approx(cost, abs=1e-9)


def test_audit_after_expansion():
    graph = _expanded(200, seed=3)
    assert graph.audit() == []


def test_class_costs_never_increase():
    graph = build_planner(load_scenario("integrator_two_obstacles"))
    rng = np.random.default_rng(5)
    start = np.array([1.0, 2.5])
    previous = {}
    for _ in range(6):
        graph.expand(100, rng)
        costs = graph.class_costs(start)
        for label, cost in costs.items():
            if label in previous:
                assert cost <= previous[label] + 1e-9
        previous = costs


def test_references_replay_into_goal(frozen_graph):
    graph = frozen_graph
    model, ws = graph.model, graph.workspace
    start = np.array([1.0, 2.5])
    refs = graph.extract_reference(start)
    assert refs
    assert [r.cost for r in refs] == sorted(r.cost for r in refs)
    for i, ref in enumerate(refs):
        x = start + ref.tape.controls.sum(axis=0) * model.dt
        assert x == pytest.approx(ref.states[-1], abs=1e-9)
        assert ws.goal.contains(x)
        for other in refs[i + 1:]:
            assert not homologous(ref.h, other.h)


def test_tree_round_trip(tmp_path):
    graph = _expanded(150, seed=11)
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(graph.to_dict()))
    loaded = PlannerGraph.from_dict(json.loads(path.read_text()), graph.model, graph.workspace)
    assert loaded.to_dict() == graph.to_dict()
    assert loaded.audit() == []
    start = next(v.x for v in graph.vertices if not v.is_root and v.nodes)
    assert [r.cost for r in loaded.extract_reference(start)] == \
        pytest.approx([r.cost for r in graph.extract_reference(start)])


def _expected_classes(ws) -> list[np.ndarray]:
    start, goal = np.array([1.0, 2.5]), ws.goal.rep
    routes = ([start, goal], [start, [5.0, 4.5], goal], [start, [5.0, 0.5], goal])
    return [1.0 + path_signature(np.array(r, dtype=float), ws) for r in routes]


@pytest.mark.slow
def test_three_classes_from_start():
    scenario = load_scenario("integrator_two_obstacles")
    for seed in range(5):
        graph = build_planner(scenario)
        graph.expand(scenario.planner.iters, np.random.default_rng(seed))
        refs = graph.extract_reference(np.array(scenario.start))
        assert len(refs) == 3
        for h in _expected_classes(graph.workspace):
            assert any(homologous(r.h, h) for r in refs)
