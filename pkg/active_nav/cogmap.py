"""Topological cognitive map of places with relative-transform edges."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, Iterable

import attr
import networkx as nx

from .allocentric import PlaceCanvas, PlacePose, Transform
from .const import DEFAULT_DECAY, DEFAULT_DUP_RADIUS
from .errors import InternalConsistencyError
from .gridworld import Action, Heading

_LOGGER = logging.getLogger(__name__)


@attr.s(slots=True, frozen=True)
class GlobalPose:
    """Path-integrated pose."""

    x: int = attr.ib()
    y: int = attr.ib()
    heading: Heading = attr.ib(converter=Heading)

    def relative_to(self, origin: GlobalPose) -> PlacePose:
        """Pose in the place frame whose origin sits at ``origin``."""
        return PlacePose(self.x - origin.x, self.y - origin.y, self.heading)


NoiseModel = Callable[[GlobalPose, Action], GlobalPose]


def pose_integrate(
    pose: GlobalPose,
    action: Action,
    collision: bool,
    noise: NoiseModel | None = None,
) -> GlobalPose:
    """Accumulate one action into the pose estimate."""
    if action is Action.FORWARD:
        if collision:
            result = pose
        else:
            dx, dy = pose.heading.vector
            result = attr.evolve(pose, x=pose.x + dx, y=pose.y + dy)
    else:
        result = attr.evolve(pose, heading=pose.heading.turned(action))
    if noise is not None:
        result = noise(result, action)
    return result


@attr.s(slots=True, frozen=True)
class ExperienceNode:
    """A place the agent has committed to."""

    node_id: int = attr.ib()
    canvas: PlaceCanvas = attr.ib(eq=False)
    anchor: GlobalPose = attr.ib()
    activation: float = attr.ib(default=1.0)
    created_at: int = attr.ib(default=0)
    used_doorways: frozenset[tuple[int, int]] = attr.ib(default=frozenset(), converter=frozenset)
    derived_from: int | None = attr.ib(default=None)


@attr.s(slots=True, frozen=True)
class Edge:
    """Traversal between two places."""

    source: int = attr.ib()
    target: int = attr.ib()
    transform: Transform = attr.ib()
    cost: int = attr.ib()
    door: tuple[int, int] | None = attr.ib(default=None)


@attr.s(slots=True, eq=False)
class CognitiveGraph:
    """Experience nodes and the edges between them. Single writer."""

    nodes: dict[int, ExperienceNode] = attr.ib(factory=dict)
    edges: list[Edge] = attr.ib(factory=list)
    current: int | None = attr.ib(default=None)
    _graph: nx.Graph = attr.ib(factory=nx.Graph, init=False, repr=False)

    def __attrs_post_init__(self) -> None:
        for node_id in self.nodes:
            self._graph.add_node(node_id)
        for edge in self.edges:
            self._link(edge)

    def _link(self, edge: Edge) -> None:
        data = self._graph.get_edge_data(edge.source, edge.target)
        if data is None or edge.cost < data["weight"]:
            self._graph.add_edge(edge.source, edge.target, weight=edge.cost, edge=edge)

    def add_edge(self, edge: Edge) -> None:
        """Record a traversal."""
        self.edges.append(edge)
        self._link(edge)

    def has_edge(self, a: int, b: int) -> bool:
        """Whether two places are directly connected."""
        return self._graph.has_edge(a, b)

    def edge_between(self, a: int, b: int) -> Edge | None:
        """Cheapest recorded edge joining two places."""
        data = self._graph.get_edge_data(a, b)
        return data["edge"] if data else None

    def neighbours(self, node_id: int) -> list[int]:
        """Directly connected places."""
        return sorted(self._graph.neighbors(node_id))

    def edges_of(self, node_id: int) -> list[Edge]:
        """Edges touching a node, in creation order."""
        return [e for e in self.edges if node_id in (e.source, e.target)]

    def update_node(self, node_id: int, **changes) -> ExperienceNode:
        """Replace fields of a node."""
        node = attr.evolve(self.nodes[node_id], **changes)
        self.nodes[node_id] = node
        return node

    def mark_doorway(self, node_id: int, doorway: tuple[int, int]) -> None:
        """Remember that a doorway of a place has been crossed."""
        node = self.nodes[node_id]
        if doorway not in node.used_doorways:
            self.update_node(node_id, used_doorways=node.used_doorways | {doorway})

    def copy(self) -> CognitiveGraph:
        """Independent graph sharing the immutable node records."""
        return CognitiveGraph(dict(self.nodes), list(self.edges), self.current)

    def __len__(self) -> int:
        return len(self.nodes)


def _anchor_transform(source: GlobalPose, target: GlobalPose) -> Transform:
    return Transform(0, target.x - source.x, target.y - source.y)


def map_add_node(
    graph: CognitiveGraph,
    canvas: PlaceCanvas,
    anchor: GlobalPose,
    *,
    step: int = 0,
    cost: int = 1,
    door: tuple[int, int] | None = None,
    derived_from: int | None = None,
) -> int:
    """Insert a place, connect it to the current one, and make it current."""
    node_id = max(graph.nodes, default=-1) + 1
    graph.nodes[node_id] = ExperienceNode(
        node_id=node_id,
        canvas=canvas,
        anchor=anchor,
        created_at=step,
        derived_from=derived_from,
    )
    graph._graph.add_node(node_id)
    previous = graph.current
    if previous is not None:
        graph.add_edge(
            Edge(
                previous,
                node_id,
                _anchor_transform(graph.nodes[previous].anchor, anchor),
                max(1, cost),
                door,
            )
        )
    graph.current = node_id
    _LOGGER.debug(
        "Created node %d at %s from %s (derived from %s)", node_id, anchor, previous, derived_from
    )
    return node_id


def map_localize(
    graph: CognitiveGraph,
    node_id: int,
    *,
    cost: int = 1,
    door: tuple[int, int] | None = None,
) -> CognitiveGraph:
    """Make a known place current, closing a loop when arriving from a new side."""
    if node_id not in graph.nodes:
        raise InternalConsistencyError(f"unknown node {node_id}")
    previous = graph.current
    if previous is not None and previous != node_id and not graph.has_edge(previous, node_id):
        graph.add_edge(
            Edge(
                previous,
                node_id,
                _anchor_transform(graph.nodes[previous].anchor, graph.nodes[node_id].anchor),
                max(1, cost),
                door,
            )
        )
        _LOGGER.debug("Loop closure %d -> %d", previous, node_id)
    graph.update_node(node_id, activation=1.0)
    graph.current = node_id
    return graph


class Guard(Enum):
    """Verdict of the duplication guard."""

    ACCEPT = "accept"
    DUPLICATE = "duplicate"


def map_duplicate_guard(
    graph: CognitiveGraph,
    node_id: int,
    pose: GlobalPose,
    place_pose: PlacePose,
    dup_radius: int = DEFAULT_DUP_RADIUS,
) -> Guard:
    """Reject a localization whose implied global pose disagrees with odometry.

    ``place_pose`` is the agent pose in the candidate's frame under the
    proposed transform.
    """
    if node_id not in graph.nodes:
        raise InternalConsistencyError(f"unknown node {node_id}")
    anchor = graph.nodes[node_id].anchor
    implied_x = anchor.x + place_pose.x
    implied_y = anchor.y + place_pose.y
    distance = abs(implied_x - pose.x) + abs(implied_y - pose.y)
    if distance > dup_radius or place_pose.heading != pose.heading:
        _LOGGER.debug(
            "Node %d rejected as duplicate: %d tiles off, heading %s vs %s",
            node_id,
            distance,
            place_pose.heading.name,
            pose.heading.name,
        )
        return Guard.DUPLICATE
    return Guard.ACCEPT


def map_decay_tick(graph: CognitiveGraph, decay: float = DEFAULT_DECAY) -> CognitiveGraph:
    """Fade every activation by one step."""
    for node_id, node in list(graph.nodes.items()):
        graph.nodes[node_id] = attr.evolve(node, activation=node.activation * decay)
    return graph


def map_least_explored(graph: CognitiveGraph, exclude: Iterable[int] = ()) -> int | None:
    """Node with the lowest activation, oldest first on ties."""
    if not graph.nodes:
        raise InternalConsistencyError("cognitive map is empty")
    excluded = set(exclude)
    candidates = [node for node in graph.nodes.values() if node.node_id not in excluded]
    if not candidates:
        return None
    return min(candidates, key=lambda n: (n.activation, n.created_at, n.node_id)).node_id


def map_shortest_path(graph: CognitiveGraph, source: int, target: int) -> tuple[list[int], int]:
    """Minimal-cost node path and its cost."""
    for node_id in (source, target):
        if node_id not in graph.nodes:
            raise InternalConsistencyError(f"unknown node {node_id}")
    try:
        cost, path = nx.single_source_dijkstra(graph._graph, source, target, weight="weight")
    except nx.NetworkXNoPath as err:
        raise InternalConsistencyError(f"no path between {source} and {target}") from err
    return path, int(cost)


def map_predict_neighbour(
    graph: CognitiveGraph,
    node_id: int,
    position: tuple[int, int],
    radius: int = DEFAULT_DUP_RADIUS,
) -> int | None:
    """Place the map expects beyond a door crossed at a global position."""
    best = None
    for edge in graph.edges_of(node_id):
        if edge.door is None:
            continue
        distance = abs(edge.door[0] - position[0]) + abs(edge.door[1] - position[1])
        if distance > radius:
            continue
        other = edge.target if edge.source == node_id else edge.source
        if best is None or distance < best[0]:
            best = (distance, other)
    return None if best is None else best[1]
