"""Full-knowledge reference solvers used as efficiency baselines."""

from __future__ import annotations

import logging
from collections import deque
from heapq import heappop, heappush

import attr

from .const import DEFAULT_COVERAGE_TARGET
from .errors import GenerationInvariantError
from .gridworld import (
    Action,
    Heading,
    Pose,
    WorldGrid,
    coverable_tiles,
    heading_of,
    traversable,
    visible_world_coords,
)

_LOGGER = logging.getLogger(__name__)

_STEPS = tuple(Heading(h).vector for h in Heading)


@attr.s(slots=True, frozen=True)
class OraclePath:
    """Shortest route to the goal."""

    steps: int = attr.ib()
    actions: tuple[Action, ...] = attr.ib(converter=tuple)
    cells: tuple[tuple[int, int], ...] = attr.ib(converter=tuple)


@attr.s(slots=True, frozen=True)
class OracleTour:
    """Greedy coverage tour."""

    steps: int = attr.ib()
    actions: tuple[Action, ...] = attr.ib(converter=tuple)
    coverage: float = attr.ib()


def _turns(heading: Heading, wanted: Heading) -> list[Action]:
    diff = (wanted - heading) % 4
    if diff == 1:
        return [Action.TURN_RIGHT]
    if diff == 2:
        return [Action.TURN_RIGHT, Action.TURN_RIGHT]
    if diff == 3:
        return [Action.TURN_LEFT]
    return []


def _cells_to_actions(heading: Heading, cells: list[tuple[int, int]]) -> list[Action]:
    actions = []
    for (x0, y0), (x1, y1) in zip(cells, cells[1:]):
        wanted = heading_of(x1 - x0, y1 - y0)
        actions += _turns(heading, wanted)
        actions.append(Action.FORWARD)
        heading = wanted
    return actions


def _heuristic(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def oracle_goal(world: WorldGrid, start: Pose) -> OraclePath:
    """A* over tiles with complete layout knowledge; turns are free."""
    open_tiles = traversable(world.tiles)
    origin = (start.x, start.y)
    goal = tuple(world.goal)
    heap = [(_heuristic(origin, goal), 0, origin)]
    came: dict[tuple[int, int], tuple[int, int] | None] = {origin: None}
    cost = {origin: 0}
    while heap:
        _, g, current = heappop(heap)
        if current == goal:
            break
        if g > cost[current]:
            continue
        x, y = current
        for dx, dy in _STEPS:
            nxt = (x + dx, y + dy)
            if not world.in_bounds(*nxt) or not open_tiles[nxt[1], nxt[0]]:
                continue
            if g + 1 < cost.get(nxt, 1 << 30):
                cost[nxt] = g + 1
                came[nxt] = current
                heappush(heap, (g + 1 + _heuristic(nxt, goal), g + 1, nxt))
    else:
        raise GenerationInvariantError(f"goal {goal} unreachable from {origin}")

    cells = [goal]
    while came[cells[-1]] is not None:
        cells.append(came[cells[-1]])
    cells.reverse()
    return OraclePath(len(cells) - 1, _cells_to_actions(start.heading, cells), cells)


def _state(pose: Pose) -> tuple[int, int, int]:
    return pose.x, pose.y, int(pose.heading)


def _pose_routes(
    open_tiles, world: WorldGrid, start: tuple[int, int, int]
) -> tuple[dict, dict]:
    """0-1 search over poses: forward costs one, turns are free."""
    dist = {start: 0}
    parent: dict[tuple[int, int, int], tuple[tuple[int, int, int], Action]] = {}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        x, y, h = state
        d = dist[state]
        for action in Action:
            if action is Action.FORWARD:
                dx, dy = _STEPS[h]
                nxt = (x + dx, y + dy, h)
                if not world.in_bounds(nxt[0], nxt[1]) or not open_tiles[nxt[1], nxt[0]]:
                    continue
                cost = d + 1
            else:
                nxt = (x, y, int(Heading(h).turned(action)))
                cost = d
            if cost < dist.get(nxt, 1 << 30):
                dist[nxt] = cost
                parent[nxt] = (state, action)
                if cost == d:
                    queue.appendleft(nxt)
                else:
                    queue.append(nxt)
    return dist, parent


def _route(parent: dict, start, target) -> list[tuple[tuple[int, int, int], Action]]:
    route = []
    state = target
    while state != start:
        previous, action = parent[state]
        route.append((state, action))
        state = previous
    route.reverse()
    return route


def oracle_explore(
    world: WorldGrid, start: Pose, coverage_target: float = DEFAULT_COVERAGE_TARGET
) -> OracleTour:
    """Greedy tour: keep moving to the pose seeing the most new tiles per step.

    An upper bound on the optimal coverage tour, which is intractable.
    """
    opened = world.with_doors_open()
    open_tiles = traversable(opened.tiles)
    coverable = coverable_tiles(world)
    total = len(coverable)
    views: dict[tuple[int, int, int], frozenset[tuple[int, int]]] = {}

    def view(state: tuple[int, int, int]) -> frozenset[tuple[int, int]]:
        if state not in views:
            views[state] = visible_world_coords(opened, Pose(*state)) & coverable
        return views[state]

    current = _state(start)
    seen = set(view(current))
    actions: list[Action] = []
    steps = 0
    while len(seen) < coverage_target * total:
        dist, parent = _pose_routes(open_tiles, opened, current)
        best = None
        for state, d in dist.items():
            gain = len(view(state) - seen)
            if gain == 0:
                continue
            key = (-gain / max(1, d), d, state[1], state[0], state[2])
            if best is None or key < best[0]:
                best = (key, state)
        if best is None:
            _LOGGER.debug("Tour stalled at %d of %d tiles", len(seen), total)
            break
        for state, action in _route(parent, current, best[1]):
            actions.append(action)
            if action is Action.FORWARD:
                steps += 1
            seen |= view(state)
        current = best[1]

    coverage = len(seen) / total if total else 1.0
    _LOGGER.debug("Oracle tour: %d forward steps, coverage %.3f", steps, coverage)
    return OracleTour(steps, actions, coverage)
