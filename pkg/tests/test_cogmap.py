"""Tests for the cognitive map."""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest

from active_nav.allocentric import IDENTITY, PlacePose, place_new
from active_nav.cogmap import (
    CognitiveGraph,
    Edge,
    ExperienceNode,
    GlobalPose,
    Guard,
    map_add_node,
    map_decay_tick,
    map_duplicate_guard,
    map_least_explored,
    map_localize,
    map_predict_neighbour,
    map_shortest_path,
    pose_integrate,
)
from active_nav.errors import InternalConsistencyError
from active_nav.gridworld import Action, Heading


def _chain(length: int) -> CognitiveGraph:
    graph = CognitiveGraph()
    for index in range(length):
        door = (6 * index - 3, 0) if index else None
        map_add_node(graph, place_new(), GlobalPose(6 * index, 0, Heading.E), step=index, door=door)
    return graph


def test_pose_integration():
    pose = GlobalPose(0, 0, Heading.N)
    pose = pose_integrate(pose, Action.FORWARD, False)
    assert pose == GlobalPose(0, -1, Heading.N)
    assert pose_integrate(pose, Action.FORWARD, True) == pose
    pose = pose_integrate(pose, Action.TURN_RIGHT, False)
    assert pose.heading is Heading.E
    assert pose_integrate(pose, Action.TURN_LEFT, True).heading is Heading.N


def test_pose_integration_noise_hook():
    def drift(pose, action):
        return GlobalPose(pose.x + 1, pose.y, pose.heading)

    assert pose_integrate(GlobalPose(0, 0, Heading.N), Action.TURN_LEFT, False, drift) == (
        GlobalPose(1, 0, Heading.W)
    )


def test_add_links_to_the_current_place():
    graph = _chain(3)
    assert len(graph) == 3
    assert graph.current == 2
    assert graph.neighbours(1) == [0, 2]
    edge = graph.edge_between(0, 1)
    assert (edge.transform.dx, edge.transform.dy) == (6, 0)
    assert edge.door == (3, 0)
    assert not graph.has_edge(0, 2)


def test_localize_closes_a_loop():
    graph = _chain(3)
    map_localize(graph, 0, cost=4, door=(1, 1))
    assert graph.current == 0
    assert graph.has_edge(2, 0)
    assert graph.edge_between(0, 2).cost == 4
    edges = len(graph.edges)
    map_localize(graph, 1)
    assert len(graph.edges) == edges
    assert graph.nodes[1].activation == 1.0


def test_localize_unknown_node():
    with pytest.raises(InternalConsistencyError):
        map_localize(_chain(2), 7)


def test_decay_and_least_explored():
    graph = _chain(3)
    map_decay_tick(graph, 0.5)
    map_localize(graph, 2)
    assert graph.nodes[0].activation == 0.5
    assert graph.nodes[2].activation == 1.0
    assert map_least_explored(graph) == 0
    assert map_least_explored(graph, exclude=[0]) == 1
    assert map_least_explored(graph, exclude=[0, 1, 2]) is None


def test_least_explored_on_empty_map():
    with pytest.raises(InternalConsistencyError):
        map_least_explored(CognitiveGraph())


def _random_graph(rng, size: int) -> CognitiveGraph:
    nodes = {i: ExperienceNode(i, place_new(), GlobalPose(i, 0, Heading.N)) for i in range(size)}
    edges = [
        Edge(int(a), int(b), IDENTITY, int(rng.integers(1, 10)))
        for a, b in itertools.combinations(range(size), 2)
        if rng.random() < 0.4
    ]
    edges += [Edge(i, i + 1, IDENTITY, 50) for i in range(size - 1)]
    return CognitiveGraph(nodes, edges)


@pytest.mark.parametrize("seed", range(6))
def test_shortest_path_is_minimal(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, 9))
    graph = _random_graph(rng, size)
    cheapest = {}
    for edge in graph.edges:
        key = frozenset((edge.source, edge.target))
        cheapest[key] = min(cheapest.get(key, edge.cost), edge.cost)
    plain = nx.Graph(list(tuple(key) for key in cheapest))
    for source, target in itertools.permutations(range(size), 2):
        path, cost = map_shortest_path(graph, source, target)
        best = min(
            sum(cheapest[frozenset(pair)] for pair in zip(p, p[1:]))
            for p in nx.all_simple_paths(plain, source, target)
        )
        assert cost == best
        assert path[0] == source and path[-1] == target
        assert sum(cheapest[frozenset(pair)] for pair in zip(path, path[1:])) == cost


def test_shortest_path_errors():
    graph = _chain(2)
    graph.current = None
    map_add_node(graph, place_new(), GlobalPose(40, 0, Heading.N))
    with pytest.raises(InternalConsistencyError):
        map_shortest_path(graph, 0, 2)
    with pytest.raises(InternalConsistencyError):
        map_shortest_path(graph, 0, 9)


def test_duplicate_guard():
    graph = _chain(2)
    pose = GlobalPose(7, 1, Heading.E)
    assert map_duplicate_guard(graph, 1, pose, PlacePose(1, 1, Heading.E)) is Guard.ACCEPT
    assert map_duplicate_guard(graph, 1, pose, PlacePose(1, 1, Heading.S)) is Guard.DUPLICATE
    assert map_duplicate_guard(graph, 0, pose, PlacePose(1, 1, Heading.E)) is Guard.DUPLICATE
    with pytest.raises(InternalConsistencyError):
        map_duplicate_guard(graph, 5, pose, PlacePose(0, 0, Heading.E))


def test_predict_neighbour_through_a_door():
    graph = _chain(3)
    assert map_predict_neighbour(graph, 1, (3, 0)) == 0
    assert map_predict_neighbour(graph, 1, (9, 1)) == 2
    assert map_predict_neighbour(graph, 0, (30, 0)) is None


def test_doorway_marks_accumulate():
    graph = _chain(1)
    graph.mark_doorway(0, (2, 0))
    graph.mark_doorway(0, (2, 0))
    graph.mark_doorway(0, (0, 3))
    assert graph.nodes[0].used_doorways == {(2, 0), (0, 3)}


def test_copy_is_independent():
    graph = _chain(2)
    clone = graph.copy()
    map_add_node(clone, place_new(), GlobalPose(20, 0, Heading.E))
    map_decay_tick(clone)
    assert len(graph) == 2
    assert len(graph.edges) == 1
    assert graph.current == 1
    assert graph.nodes[0].activation == 1.0
    assert not graph.has_edge(1, 2)
