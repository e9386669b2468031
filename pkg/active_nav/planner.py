"""Expected free energy planning at the map, place and motion levels."""

from __future__ import annotations

import heapq
import logging
from enum import Enum
from typing import Mapping, NamedTuple

import attr
import numpy as np

from .allocentric import PlaceCanvas, PlacePose, RoomBounds, room_bounds
from .cogmap import CognitiveGraph, GlobalPose, map_least_explored, map_shortest_path
from .config import PlannerConfig
from .const import DEFAULT_GOAL_BONUS
from .egocentric import EgoState, ego_cells, ego_predict
from .errors import NoPathError, NoTargetError, OutOfFrameError
from .gridworld import (
    UNKNOWN,
    VIEW_AGENT_COL,
    VIEW_AGENT_ROW,
    Action,
    Heading,
    TileKind,
    is_door,
    propagate_visibility,
    transparent,
    traversable,
    window_coords,
)

_LOGGER = logging.getLogger(__name__)


class PreferenceKind(Enum):
    """Shape of the prior preference."""

    FLAT = "flat"
    GOAL_TILE = "goal_tile"


@attr.s(slots=True, frozen=True)
class Preference:
    """Log preference over outcomes."""

    kind: PreferenceKind = attr.ib(default=PreferenceKind.FLAT)
    goal_bonus: float = attr.ib(default=0.0)

    @classmethod
    def flat(cls) -> Preference:
        """No preference: pure exploration."""
        return cls(PreferenceKind.FLAT, 0.0)

    @classmethod
    def goal_tile(cls, bonus: float = DEFAULT_GOAL_BONUS) -> Preference:
        """Prefer standing on the goal tile."""
        return cls(PreferenceKind.GOAL_TILE, bonus)

    @property
    def seeks_goal(self) -> bool:
        """Whether the goal carries value."""
        return self.kind is PreferenceKind.GOAL_TILE

    def pragmatic(self, kind: int) -> float:
        """Value of standing on a tile of the given kind."""
        if self.seeks_goal and kind == TileKind.GOAL:
            return self.goal_bonus
        return 0.0


class EfeScore(NamedTuple):
    """Expected free energy terms of a candidate."""

    epistemic: float
    pragmatic: float
    path_cost: float = 0.0
    path_weight: float = 0.0

    @property
    def total(self) -> float:
        """Negative value; lower is better."""
        return -self.epistemic - self.pragmatic

    @property
    def objective(self) -> float:
        """Total plus weighted path cost, the quantity minimized."""
        return self.total + self.path_weight * self.path_cost


class MidKind(Enum):
    """Why a place-level target was chosen."""

    EXPLORE = "explore"
    EXIT = "exit"
    GOAL = "goal"


@attr.s(slots=True, frozen=True)
class PolicyTop:
    """Target place and the node path to it; an empty path means stay."""

    target: int | None = attr.ib(default=None)
    path: tuple[int, ...] = attr.ib(default=(), converter=tuple)

    @property
    def moving(self) -> bool:
        """Whether another place must be reached."""
        return len(self.path) > 1


@attr.s(slots=True, frozen=True)
class PolicyMid:
    """Target pose inside the current place."""

    target: PlacePose = attr.ib()
    kind: MidKind = attr.ib(default=MidKind.EXPLORE)
    any_heading: bool = attr.ib(default=False)
    node: int | None = attr.ib(default=None)

    def reached(self, pose: PlacePose) -> bool:
        """Whether a pose satisfies the target."""
        if pose.cell != self.target.cell:
            return False
        return self.any_heading or pose.heading == self.target.heading


@attr.s(slots=True, frozen=True)
class PolicyLow:
    """Actions and the poses they are expected to produce."""

    actions: tuple[Action, ...] = attr.ib(default=(), converter=tuple)
    poses: tuple[PlacePose, ...] = attr.ib(default=(), converter=tuple)


def _region_mask(canvas: PlaceCanvas, bounds: RoomBounds) -> np.ndarray:
    mask = np.zeros((canvas.size, canvas.size), dtype=bool)
    ix0, iy0 = canvas.index_of(bounds.x0, bounds.y0)
    ix1, iy1 = canvas.index_of(bounds.x1, bounds.y1)
    mask[max(iy0, 0) : iy1 + 1, max(ix0, 0) : ix1 + 1] = True
    return mask


def info_gain(canvas: PlaceCanvas, pose: PlacePose, region: np.ndarray | None = None) -> int:
    """Unknown canvas cells that would become visible from a pose."""
    if not canvas.contains(pose.x, pose.y):
        raise OutOfFrameError(f"pose {pose} lies outside the place canvas")
    xs, ys = window_coords(pose.x, pose.y, pose.heading)
    kinds = canvas.lookup(xs, ys)
    ix, iy = canvas.index_of(xs, ys)
    inside = (ix >= 0) & (ix < canvas.size) & (iy >= 0) & (iy < canvas.size)
    wanted = inside & (kinds == UNKNOWN)
    wanted[VIEW_AGENT_ROW, VIEW_AGENT_COL] = False
    if region is not None:
        in_region = np.zeros_like(wanted)
        in_region[inside] = region[iy[inside], ix[inside]]
        wanted &= in_region
    if not wanted.any():
        return 0
    seen = propagate_visibility(transparent(kinds))
    return int((seen & wanted).sum())


def _pose_costs(
    passable: np.ndarray, start: tuple[int, int, int], turn_cost: float
) -> dict[tuple[int, int, int], float]:
    """Uniform cost search over (column, row, heading) array states."""
    size = passable.shape[0]
    costs = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        cost, state = heapq.heappop(heap)
        if cost > costs[state]:
            continue
        ix, iy, heading = state
        dx, dy = Heading(heading).vector
        moves = [((ix, iy, (heading - 1) % 4), turn_cost), ((ix, iy, (heading + 1) % 4), turn_cost)]
        nx, ny = ix + dx, iy + dy
        if 0 <= nx < size and 0 <= ny < size and passable[ny, nx]:
            moves.append(((nx, ny, heading), 1.0))
        for nxt, step_cost in moves:
            new_cost = cost + step_cost
            if new_cost < costs.get(nxt, float("inf")):
                costs[nxt] = new_cost
                heapq.heappush(heap, (new_cost, nxt))
    return costs


def _allowed(canvas: PlaceCanvas, bounds: RoomBounds | None) -> np.ndarray:
    if bounds is None:
        return np.ones((canvas.size, canvas.size), dtype=bool)
    allowed = _region_mask(canvas, bounds)
    for x, y in bounds.exits().values():
        if canvas.contains(x, y):
            ix, iy = canvas.index_of(x, y)
            allowed[iy, ix] = True
    return allowed


def efe_mid(
    canvas: PlaceCanvas,
    current: PlacePose,
    pref: Preference,
    *,
    used_doorways: frozenset[tuple[int, int]] = frozenset(),
    config: PlannerConfig = PlannerConfig(),
) -> tuple[PolicyMid, EfeScore]:
    """Pose inside the place minimizing expected free energy plus path cost.

    Candidates are known open cells of the room. Exits of doorways not yet
    crossed are only considered once the room itself has nothing left to show.
    """
    if not canvas.contains(current.x, current.y):
        raise OutOfFrameError(f"pose {current} lies outside the place canvas")
    bounds = room_bounds(canvas)
    region = _region_mask(canvas, bounds) if bounds is not None else None
    kinds = canvas.map_kinds
    start_ix, start_iy = canvas.index_of(current.x, current.y)
    start = (start_ix, start_iy, int(current.heading))

    passable = traversable(kinds) & _allowed(canvas, bounds)
    passable[start_iy, start_ix] = True
    costs = _pose_costs(passable, start, config.turn_cost)

    known_open = traversable(kinds, optimistic=False)
    doorlike = is_door(kinds)
    ox, oy = canvas.offset

    best: tuple[tuple, PolicyMid, EfeScore] | None = None

    def consider(state, cost, epistemic, kind: MidKind) -> None:
        nonlocal best
        ix, iy, heading = state
        pragmatic = pref.pragmatic(int(kinds[iy, ix]))
        if epistemic + pragmatic <= 0:
            return
        if pragmatic > 0:
            kind = MidKind.GOAL
        score = EfeScore(float(epistemic), pragmatic, cost, config.path_weight)
        key = (score.objective, iy - oy, ix - ox, heading)
        if best is None or key < best[0]:
            policy = PolicyMid(
                PlacePose(ix - ox, iy - oy, heading),
                kind,
                any_heading=kind is not MidKind.EXPLORE,
            )
            best = (key, policy, score)

    for state, cost in costs.items():
        ix, iy, heading = state
        if state == start or not known_open[iy, ix] or doorlike[iy, ix]:
            continue
        if region is not None and not region[iy, ix]:
            continue
        gain = info_gain(canvas, PlacePose(ix - ox, iy - oy, heading), region)
        consider(state, cost, gain, MidKind.EXPLORE)

    if pref.seeks_goal and (best is None or best[1].kind is not MidKind.GOAL):
        goals = np.argwhere(kinds == TileKind.GOAL)
        if len(goals):
            wide = traversable(kinds).copy()
            wide[start_iy, start_ix] = True
            for state, cost in _pose_costs(wide, start, config.turn_cost).items():
                if kinds[state[1], state[0]] == TileKind.GOAL:
                    consider(state, cost, 0, MidKind.GOAL)

    if best is None:
        if bounds is not None:
            exits = [
                tile for door, tile in bounds.exits().items() if door not in used_doorways
            ]
        else:
            exits = [
                (int(c) - ox, int(r) - oy)
                for r, c in np.argwhere(doorlike)
                if (int(c), int(r)) != (start_ix, start_iy)
            ]
        for x, y in exits:
            ix, iy = x + ox, y + oy
            for heading in Heading:
                state = (ix, iy, int(heading))
                if state not in costs:
                    continue
                gain = max(1, info_gain(canvas, PlacePose(x, y, heading)))
                consider(state, costs[state], gain, MidKind.EXIT)

    if best is None:
        raise NoTargetError("nothing left to learn or gain in this place")
    _LOGGER.debug("Mid target %s scored %s", best[1], best[2])
    return best[1], best[2]


def efe_top(
    graph: CognitiveGraph,
    canvas: PlaceCanvas,
    pref: Preference,
    goal_registry: Mapping[int, tuple[int, int]],
    *,
    used_doorways: frozenset[tuple[int, int]] = frozenset(),
    exhausted: bool = False,
    undecided: bool = False,
) -> PolicyTop:
    """Place to head for next.

    ``exhausted`` tells that the place level found nothing worth doing in the
    current place.
    """
    current = graph.current
    if undecided or current is None:
        return PolicyTop()

    if pref.seeks_goal and goal_registry:
        if current in goal_registry:
            return PolicyTop(current, (current,))
        routes = [map_shortest_path(graph, current, node) for node in sorted(goal_registry)]
        path, _ = min(routes, key=lambda route: (route[1], route[0][-1]))
        return PolicyTop(path[-1], path)

    if not exhausted:
        return PolicyTop(current, (current,))
    bounds = room_bounds(canvas)
    if bounds is not None and set(bounds.doorways) - used_doorways:
        return PolicyTop(current, (current,))

    frontier = []
    for node in graph.nodes.values():
        if node.node_id == current:
            continue
        node_bounds = room_bounds(node.canvas)
        if node_bounds is None or set(node_bounds.doorways) - node.used_doorways:
            frontier.append(node.node_id)
    others = set(graph.nodes) - set(frontier) - {current}
    target = map_least_explored(graph, exclude=others | {current}) if frontier else None
    if target is None:
        target = map_least_explored(graph, exclude={current})
    if target is None:
        return PolicyTop(current, (current,))
    path, cost = map_shortest_path(graph, current, target)
    _LOGGER.debug("Top target %d via %s (cost %d)", target, path, cost)
    return PolicyTop(target, path)


def _ego_walls(ego: EgoState, pose: PlacePose) -> list[tuple[int, int]]:
    fx, fy = pose.heading.vector
    rx, ry = pose.heading.right
    return [
        (pose.x + f * fx + lat * rx, pose.y + f * fy + lat * ry)
        for f, lat, kind in ego_cells(ego)
        if kind == TileKind.WALL
    ]


def efe_low(
    canvas: PlaceCanvas,
    ego: EgoState,
    current: PlacePose,
    target: PlacePose,
    *,
    any_heading: bool = False,
    allowed: np.ndarray | None = None,
    config: PlannerConfig = PlannerConfig(),
) -> PolicyLow:
    """Cheapest action sequence to a target pose.

    Forward costs 1 and turns ``turn_cost``; ties go to the lexicographically
    smallest action sequence. Walls known to the ego buffer are avoided even
    when the canvas has not recorded them.
    """
    if current.cell == target.cell and (any_heading or current.heading == target.heading):
        return PolicyLow()
    if not canvas.contains(current.x, current.y) or not canvas.contains(target.x, target.y):
        raise NoPathError(f"{current} or {target} lies outside the place canvas")

    passable = traversable(canvas.map_kinds).copy()
    if allowed is not None:
        passable &= allowed
    for x, y in _ego_walls(ego, current):
        if canvas.contains(x, y):
            ix, iy = canvas.index_of(x, y)
            passable[iy, ix] = False
    start_ix, start_iy = canvas.index_of(current.x, current.y)
    passable[start_iy, start_ix] = True

    for _attempt in range(2):
        actions = _search(passable, current, target, canvas, any_heading, config.turn_cost)
        if actions and actions[0] is Action.FORWARD:
            if ego_predict(ego, Action.FORWARD).collision_prob >= 1.0:
                fx, fy = current.heading.vector
                ix, iy = canvas.index_of(current.x + fx, current.y + fy)
                passable[iy, ix] = False
                continue
        break

    poses = []
    pose = current
    for action in actions:
        if action is Action.FORWARD:
            dx, dy = pose.heading.vector
            pose = PlacePose(pose.x + dx, pose.y + dy, pose.heading)
        else:
            pose = PlacePose(pose.x, pose.y, pose.heading.turned(action))
        poses.append(pose)
    return PolicyLow(actions, poses)


def _search(
    passable: np.ndarray,
    current: PlacePose,
    target: PlacePose,
    canvas: PlaceCanvas,
    any_heading: bool,
    turn_cost: float,
) -> tuple[Action, ...]:
    size = passable.shape[0]
    goal_ix, goal_iy = canvas.index_of(target.x, target.y)
    if not passable[goal_iy, goal_ix]:
        raise NoPathError(f"target {target} is blocked")
    start_ix, start_iy = canvas.index_of(current.x, current.y)
    start = (start_ix, start_iy, int(current.heading))
    best = {start: 0.0}
    heap: list[tuple[float, tuple[Action, ...], tuple[int, int, int]]] = [(0.0, (), start)]
    while heap:
        cost, actions, state = heapq.heappop(heap)
        ix, iy, heading = state
        if (ix, iy) == (goal_ix, goal_iy) and (any_heading or heading == target.heading):
            return actions
        if cost > best.get(state, float("inf")):
            continue
        dx, dy = Heading(heading).vector
        for action in Action:
            if action is Action.FORWARD:
                nx, ny = ix + dx, iy + dy
                if not (0 <= nx < size and 0 <= ny < size and passable[ny, nx]):
                    continue
                nxt, step_cost = (nx, ny, heading), 1.0
            else:
                turned = Heading(heading).turned(action)
                nxt, step_cost = (ix, iy, int(turned)), turn_cost
            new_cost = cost + step_cost
            if new_cost <= best.get(nxt, float("inf")):
                best[nxt] = new_cost
                heapq.heappush(heap, (new_cost, actions + (action,), nxt))
    raise NoPathError(f"no path from {current} to {target}")


@attr.s(slots=True, frozen=True, eq=False)
class PlannerView:
    """Snapshot of the agent state the planner reads."""

    ego: EgoState = attr.ib()
    canvas: PlaceCanvas = attr.ib()
    pose: PlacePose = attr.ib()
    origin: GlobalPose = attr.ib()
    graph: CognitiveGraph = attr.ib()
    preference: Preference = attr.ib()
    frame: object = attr.ib()
    used_doorways: frozenset[tuple[int, int]] = attr.ib(default=frozenset())
    goal_registry: Mapping[int, tuple[int, int]] = attr.ib(factory=dict)
    collided: bool = attr.ib(default=False)
    undecided: bool = attr.ib(default=False)


def _in_aisle(view: PlannerView) -> bool:
    """Whether the agent stands on a door or beyond the walls of its place."""
    x, y = view.pose.cell
    if is_door(view.canvas.kind_at(x, y)):
        return True
    bounds = room_bounds(view.canvas)
    return bounds is not None and not bounds.contains(x, y)


class Planner:
    """Keeps the three policy levels between steps and replans on demand.

    Once in an aisle the agent keeps walking until it has gone through.
    """

    def __init__(self, config: PlannerConfig | None = None) -> None:
        """Init."""
        self.config = config or PlannerConfig()
        self.stalled = False
        self._frame: object = None
        self._top: PolicyTop | None = None
        self._mid: PolicyMid | None = None
        self._low: PolicyLow | None = None
        self._expected: PlacePose | None = None

    @property
    def mid(self) -> PolicyMid | None:
        """Current place-level target."""
        return self._mid

    @property
    def top(self) -> PolicyTop | None:
        """Current map-level route, if travelling."""
        return self._top

    def reset(self) -> None:
        """Drop every cached policy."""
        self._frame = None
        self._top = None
        self._mid = None
        self._low = None
        self._expected = None

    def plan_step(self, view: PlannerView) -> Action:
        """Next action."""
        self.stalled = False
        if view.frame != self._frame:
            self._frame = view.frame
            self._mid = None
            self._low = None
        if view.collided:
            self._low = None
        if _in_aisle(view) and ego_predict(view.ego, Action.FORWARD).collision_prob < 1.0:
            self._mid = None
            self._low = None
            return Action.FORWARD

        self._refresh_top(view)
        if self._mid is not None and not self._mid_valid(view):
            self._mid = None
            self._low = None

        if self._top is not None:
            next_node = self._next_node(view)
            if next_node is not None and (
                self._mid is None
                or self._mid.kind is not MidKind.EXIT
                or self._mid.node != next_node
            ):
                self._mid = self._exit_policy(view, next_node)
                self._low = None
        if self._mid is None:
            self._mid = self._select_mid(view)
            self._low = None
        if self._mid is None:
            return self._stall("no place-level target")

        if self._low is None or not self._low_valid(view):
            try:
                self._low = self._plan_low(view)
            except NoPathError as err:
                _LOGGER.debug("Low level replanning failed: %s", err)
                self._mid = None
                self._low = None
                return self._stall("target unreachable")
        if not self._low.actions:
            self._mid = None
            return self._stall("target already reached")

        action = self._low.actions[0]
        self._expected = self._low.poses[0]
        self._low = PolicyLow(self._low.actions[1:], self._low.poses[1:])
        return action

    def _stall(self, reason: str) -> Action:
        _LOGGER.debug("Planner stalled (%s), turning left", reason)
        self.stalled = True
        self._low = None
        return Action.TURN_LEFT

    def _refresh_top(self, view: PlannerView) -> None:
        if self._top is not None and (
            view.undecided or view.graph.current == self._top.target
        ):
            self._top = None
            if self._mid is not None and self._mid.kind is MidKind.EXIT:
                self._mid = None
        top = efe_top(
            view.graph,
            view.canvas,
            view.preference,
            view.goal_registry,
            used_doorways=view.used_doorways,
            undecided=view.undecided,
        )
        if view.preference.seeks_goal and view.goal_registry and not view.undecided:
            wanted = top if top.moving else None
            if wanted != self._top:
                self._top = wanted
                self._mid = None
        elif top.moving and (self._top is None or self._top.target != top.target):
            self._top = top
            self._mid = None

    def _next_node(self, view: PlannerView) -> int | None:
        current = view.graph.current
        if current is None or view.undecided:
            return None
        path, _ = map_shortest_path(view.graph, current, self._top.target)
        return path[1] if len(path) > 1 else None

    def _exit_policy(self, view: PlannerView, next_node: int) -> PolicyMid | None:
        edge = view.graph.edge_between(view.graph.current, next_node)
        if edge is None or edge.door is None:
            return None
        door = (edge.door[0] - view.origin.x, edge.door[1] - view.origin.y)
        bounds = room_bounds(view.canvas)
        if bounds is not None and bounds.doorways:
            door = min(
                bounds.exits().values(),
                key=lambda t: (abs(t[0] - door[0]) + abs(t[1] - door[1]), t[1], t[0]),
            )
        return PolicyMid(PlacePose(door[0], door[1], Heading.N), MidKind.EXIT, True, next_node)

    def _select_mid(self, view: PlannerView) -> PolicyMid | None:
        try:
            policy, _ = efe_mid(
                view.canvas,
                view.pose,
                view.preference,
                used_doorways=view.used_doorways,
                config=self.config,
            )
            return policy
        except NoTargetError:
            pass
        top = efe_top(
            view.graph,
            view.canvas,
            view.preference,
            view.goal_registry,
            used_doorways=view.used_doorways,
            exhausted=True,
            undecided=view.undecided,
        )
        if not top.moving:
            return None
        self._top = top
        return self._exit_policy(view, top.path[1])

    def _mid_valid(self, view: PlannerView) -> bool:
        mid = self._mid
        if mid.reached(view.pose):
            return False
        if view.canvas.kind_at(*mid.target.cell) == TileKind.WALL:
            return False
        if mid.kind is MidKind.EXPLORE:
            if view.preference.seeks_goal and (view.canvas.map_kinds == TileKind.GOAL).any():
                return False
            bounds = room_bounds(view.canvas)
            region = _region_mask(view.canvas, bounds) if bounds is not None else None
            if not view.canvas.contains(*mid.target.cell):
                return False
            return info_gain(view.canvas, mid.target, region) > 0
        return True

    def _low_valid(self, view: PlannerView) -> bool:
        low = self._low
        if not low.actions or view.pose != self._expected:
            return False
        for pose in low.poses:
            if view.canvas.kind_at(*pose.cell) == TileKind.WALL:
                return False
        if low.actions[0] is Action.FORWARD:
            return ego_predict(view.ego, Action.FORWARD).collision_prob < 1.0
        return True

    def _plan_low(self, view: PlannerView) -> PolicyLow:
        allowed = None
        if self._mid.kind is not MidKind.GOAL:
            allowed = _allowed(view.canvas, room_bounds(view.canvas))
        return efe_low(
            view.canvas,
            view.ego,
            view.pose,
            self._mid.target,
            any_heading=self._mid.any_heading,
            allowed=allowed,
            config=self.config,
        )


def plan_step(planner: Planner, view: PlannerView) -> Action:
    """Hierarchical dispatch of one action."""
    return planner.plan_step(view)
