"""Agent state and the perceive/act integration loop."""

from __future__ import annotations

import logging
from enum import Enum

import attr
import numpy as np

from .allocentric import (
    Decision,
    HypothesisSet,
    Outcome,
    PlaceCanvas,
    PlacePose,
    SpawnContext,
    hypo_decide,
    hypo_force,
    hypo_spawn,
    hypo_update,
    place_fuse,
    place_merge,
    place_mismatch,
    place_new,
    place_reanchor,
    room_bounds,
)
from .cogmap import (
    CognitiveGraph,
    GlobalPose,
    Guard,
    map_add_node,
    map_decay_tick,
    map_duplicate_guard,
    map_localize,
    map_predict_neighbour,
    pose_integrate,
)
from .config import Config
from .egocentric import EgoState, ego_init, ego_update
from .errors import CanvasOverflowError
from .gridworld import Action, Observation, TileKind, is_door
from .planner import Planner, PlannerView, Preference

_LOGGER = logging.getLogger(__name__)


class EventKind(Enum):
    """Cognitive map events."""

    NEW = "new"
    LOCALIZED = "localized"
    DUPLICATE = "duplicate"


class ResetReason(Enum):
    """Why the current place was abandoned."""

    MISMATCH = "mismatch"
    EXIT = "exit"
    OUTSIDE = "outside"
    OVERFLOW = "overflow"


@attr.s(slots=True, frozen=True)
class NodeEvent:
    """A commitment about which place the agent is in."""

    step: int = attr.ib()
    kind: EventKind = attr.ib()
    node_id: int = attr.ib()
    updates: int = attr.ib()
    hypotheses: int = attr.ib()
    forced: bool = attr.ib(default=False)


@attr.s(slots=True, frozen=True)
class AgentSnapshot:
    """What is needed to resume an agent with its map."""

    graph: CognitiveGraph = attr.ib(eq=False)
    pose: GlobalPose = attr.ib()
    origin: GlobalPose = attr.ib()
    # Doors the world had opened when the snapshot was taken
    opened_doors: frozenset[tuple[int, int]] = attr.ib(default=frozenset(), converter=frozenset)


class Agent:
    """Hierarchical agent: ego buffer, place canvas, hypotheses and map."""

    def __init__(
        self,
        config: Config,
        start: GlobalPose,
        preference: Preference | None = None,
        snapshot: AgentSnapshot | None = None,
    ) -> None:
        """Init."""
        self.config = config
        self.preference = preference or Preference.flat()
        self.planner = Planner(config.planner)
        self.ego: EgoState = ego_init(config.agent.forget_horizon)
        self.hypotheses: HypothesisSet | None = None
        self.events: list[NodeEvent] = []
        self.steps = 0
        self.resets = 0

        self._collided = False
        self._forward_since_switch = 0
        self._frame = 0
        self._entry: tuple[int, int] | None = None
        # door stood on and the cell it was stepped onto from
        self._door_step: tuple[tuple[int, int], tuple[int, int]] | None = None
        self._crossing: tuple[tuple[int, int], tuple[int, int]] | None = None

        if snapshot is not None:
            self.graph = snapshot.graph.copy()
            self.pose = snapshot.pose
            self.origin = snapshot.origin
            self.canvas = self.graph.nodes[self.graph.current].canvas
        else:
            self.graph = CognitiveGraph()
            self.pose = start
            self.origin = start
            self.canvas = place_new(config.agent.canvas_size, start.heading)

    @property
    def place_pose(self) -> PlacePose:
        """Pose in the current place frame."""
        return self.pose.relative_to(self.origin)

    @property
    def undecided(self) -> bool:
        """Whether the current place is still being identified."""
        return self.hypotheses is not None

    @property
    def current_node(self) -> int | None:
        """Node the agent believes it is in, None while undecided."""
        return None if self.undecided else self.graph.current

    @property
    def used_doorways(self) -> frozenset[tuple[int, int]]:
        """Doorways of the current place already crossed."""
        node = self.current_node
        if node is None:
            return frozenset()
        return self.graph.nodes[node].used_doorways

    def goal_registry(self) -> dict[int, tuple[int, int]]:
        """Goal cell per node whose canvas has seen it."""
        registry = {}
        for node_id, node in sorted(self.graph.nodes.items()):
            hits = np.argwhere(node.canvas.map_kinds == TileKind.GOAL)
            if len(hits):
                row, col = hits[0]
                registry[node_id] = (
                    int(col) - node.canvas.offset[0],
                    int(row) - node.canvas.offset[1],
                )
        return registry

    def set_preference(self, preference: Preference) -> None:
        """Switch task preference and drop cached plans."""
        self.preference = preference
        self.planner.reset()

    def snapshot(self) -> AgentSnapshot:
        """Freeze the map; commits any pending place identification."""
        if self.hypotheses is not None:
            self._commit(hypo_force(self.hypotheses), forced=True)
        return AgentSnapshot(self.graph, self.pose, self.origin)

    def bootstrap(self, obs: Observation) -> None:
        """Take in the observation available before the first action."""
        self.ego = ego_update(self.ego, None, obs, False)
        if self.graph.current is None:
            self.canvas = place_fuse(self.canvas, self.place_pose, obs)
            self.hypotheses = hypo_spawn(
                [], obs, SpawnContext(pose=self.place_pose), self.config.agent
            )
            self._commit(hypo_decide(self.hypotheses, *self._decide_args()))
        else:
            self._fuse(obs)
            self._frame += 1

    def act(self) -> Action:
        """Choose the next action."""
        action = self.planner.plan_step(self._view())
        if self.planner.stalled and self.hypotheses is not None:
            self._commit(hypo_force(self.hypotheses), forced=True)
            action = self.planner.plan_step(self._view())
        return action

    def perceive(self, action: Action, collision: bool, obs: Observation) -> None:
        """Integrate the outcome of an action."""
        self.steps += 1
        previous = (self.pose.x, self.pose.y)
        self.pose = pose_integrate(self.pose, action, collision)
        self.ego = ego_update(self.ego, action, obs, collision)
        map_decay_tick(self.graph, self.config.agent.decay)

        moved = action is Action.FORWARD and not collision
        self._collided = action is Action.FORWARD and collision
        if moved:
            self._forward_since_switch += 1

        reason = self._room_change(moved, previous, obs)
        if reason is not None:
            self._reset(reason, obs)
            return
        self._fuse(obs)
        if self.hypotheses is not None:
            self._update_hypotheses(obs)

    def _decide_args(self) -> tuple[float, float]:
        return self.config.agent.decide_threshold, self.config.agent.decide_margin

    def _view(self) -> PlannerView:
        return PlannerView(
            ego=self.ego,
            canvas=self.canvas,
            pose=self.place_pose,
            origin=self.origin,
            graph=self.graph,
            preference=self.preference,
            frame=self._frame,
            used_doorways=self.used_doorways,
            goal_registry=self.goal_registry() if self.preference.seeks_goal else {},
            collided=self._collided,
            undecided=self.undecided,
        )

    def _set_canvas(self, canvas: PlaceCanvas) -> None:
        self.canvas = canvas
        if self.hypotheses is None and self.graph.current is not None:
            self.graph.update_node(self.graph.current, canvas=canvas)

    def _fuse(self, obs: Observation) -> None:
        place = self.place_pose
        try:
            canvas = place_fuse(self.canvas, place, obs)
        except CanvasOverflowError:
            canvas = place_fuse(place_reanchor(self.canvas, place, obs), place, obs, clip=True)
        self._set_canvas(canvas)

    def _door_crossing(
        self, moved: bool, previous: tuple[int, int], obs: Observation
    ) -> tuple[tuple[int, int], tuple[int, int]] | None:
        """Door just walked through and the cell it was entered from."""
        if not moved:
            return None
        here = (self.pose.x, self.pose.y)
        if is_door(obs.underfoot):
            self._door_step = (here, previous)
            return None
        door_step, self._door_step = self._door_step, None
        if door_step is None or here == door_step[1]:
            return None
        return door_step

    def _room_change(
        self, moved: bool, previous: tuple[int, int], obs: Observation
    ) -> ResetReason | None:
        crossing = self._door_crossing(moved, previous, obs)
        if crossing is not None:
            _LOGGER.debug("Walked through the door at %s", crossing[0])
            self._crossing = crossing
            return ResetReason.EXIT

        place = self.place_pose
        agent_config = self.config.agent
        score = place_mismatch(self.canvas, place, obs, agent_config.min_overlap)
        if score.defined and score.value > agent_config.room_change_threshold:
            _LOGGER.debug("Mismatch %.2f over %d cells", score.value, score.compared_cells)
            return ResetReason.MISMATCH

        if self._door_step is None:
            bounds = room_bounds(self.canvas)
            if bounds is not None and not bounds.admits(*place.cell):
                return ResetReason.OUTSIDE

        if not self.canvas.contains(*place.cell):
            try:
                place_reanchor(self.canvas, place)
            except CanvasOverflowError:
                return ResetReason.OVERFLOW
        return None

    def _left_doorway(self, door: tuple[int, int], came_from: tuple[int, int]) -> tuple[int, int]:
        """Doorway of the current place nearest a door, in its frame."""
        dx, dy = door[0] - self.origin.x, door[1] - self.origin.y
        bounds = room_bounds(self.canvas)
        if bounds is None or not bounds.doorways:
            return came_from[0] - self.origin.x, came_from[1] - self.origin.y
        return min(
            bounds.doorways,
            key=lambda cell: (abs(cell[0] - dx) + abs(cell[1] - dy), cell[1], cell[0]),
        )

    def _reset(self, reason: ResetReason, obs: Observation) -> None:
        if self.hypotheses is not None:
            self._commit(hypo_force(self.hypotheses), forced=True)

        left = self.graph.current
        crossing = self._crossing if reason is ResetReason.EXIT else None
        self._crossing = None
        if crossing is not None and left is not None:
            self.graph.mark_doorway(left, self._left_doorway(*crossing))

        self.resets += 1
        self._entry = crossing[0] if crossing is not None else (self.pose.x, self.pose.y)
        expected = (
            map_predict_neighbour(self.graph, left, self._entry, self.config.agent.dup_radius)
            if left is not None
            else None
        )
        expected_poses = {
            node_id: self.pose.relative_to(node.anchor)
            for node_id, node in self.graph.nodes.items()
        }

        self.origin = self.pose
        self._frame += 1
        entry = PlacePose(0, 0, self.pose.heading)
        fresh = place_new(self.config.agent.canvas_size, self.pose.heading)
        self.canvas = place_fuse(fresh, entry, obs)

        # a door just walked through separates the agent from the place it left
        known = [
            (node_id, node.canvas)
            for node_id, node in sorted(self.graph.nodes.items())
            if crossing is None or node_id != left
        ]
        context = SpawnContext(
            pose=entry,
            previous=left,
            exit_door=self._entry,
            expected=expected,
            expected_poses=expected_poses,
        )
        self.hypotheses = hypo_spawn(known, obs, context, self.config.agent)
        _LOGGER.debug(
            "Place reset (%s) at %s leaving %s, expecting %s, %d hypotheses",
            reason.value,
            self._entry,
            left,
            expected,
            len(self.hypotheses),
        )
        decision = hypo_decide(self.hypotheses, *self._decide_args())
        if decision.outcome is not Outcome.UNDECIDED:
            self._commit(decision)

    def _update_hypotheses(self, obs: Observation) -> None:
        known = {node_id: node.canvas for node_id, node in self.graph.nodes.items()}
        self.hypotheses = hypo_update(
            self.hypotheses, self.place_pose, obs, known, self.config.agent
        )
        decision = hypo_decide(self.hypotheses, *self._decide_args())
        if decision.outcome is not Outcome.UNDECIDED:
            self._commit(decision)
        elif self.hypotheses.step_count >= self.config.agent.max_undecided_steps:
            self._commit(hypo_force(self.hypotheses), forced=True)

    def _entry_cells(self) -> list[PlacePose]:
        """Where the pending place was entered and the door crossed, in its own frame."""
        if self._entry is None:
            return []
        heading = self.canvas.origin.heading
        door = PlacePose(self._entry[0] - self.origin.x, self._entry[1] - self.origin.y, heading)
        return [PlacePose(0, 0, heading), door]

    def _commit(self, decision: Decision, forced: bool = False) -> None:
        hset = self.hypotheses
        updates = hset.step_count if hset is not None else 0
        size = len(hset) if hset is not None else 0
        temp = self.canvas
        entry_cells = self._entry_cells()

        if decision.outcome is Outcome.LOCALIZED:
            node_id = decision.node_id
            place = decision.transform.apply(self.place_pose)
            guard = map_duplicate_guard(
                self.graph, node_id, self.pose, place, self.config.agent.dup_radius
            )
            if guard is Guard.DUPLICATE:
                self._new_node(
                    temp, entry_cells, EventKind.DUPLICATE, updates, size, forced, node_id
                )
            else:
                node = self.graph.nodes[node_id]
                merged = place_merge(node.canvas, temp, decision.transform)
                self.graph.update_node(node_id, canvas=merged)
                map_localize(
                    self.graph, node_id, cost=self._forward_since_switch, door=self._entry
                )
                self.origin = GlobalPose(
                    self.pose.x - place.x, self.pose.y - place.y, node.anchor.heading
                )
                self.canvas = merged
                for cell in entry_cells:
                    self.graph.mark_doorway(node_id, decision.transform.apply(cell).cell)
                self._record(EventKind.LOCALIZED, node_id, updates, size, forced)
        else:
            self._new_node(temp, entry_cells, EventKind.NEW, updates, size, forced, None)

        self.hypotheses = None
        self._forward_since_switch = 0
        self._frame += 1

    def _new_node(
        self,
        canvas: PlaceCanvas,
        entry_cells: list[PlacePose],
        kind: EventKind,
        updates: int,
        size: int,
        forced: bool,
        derived_from: int | None,
    ) -> None:
        node_id = map_add_node(
            self.graph,
            canvas,
            self.origin,
            step=self.steps,
            cost=self._forward_since_switch,
            door=self._entry,
            derived_from=derived_from,
        )
        for cell in entry_cells:
            self.graph.mark_doorway(node_id, cell.cell)
        self._record(kind, node_id, updates, size, forced)

    def _record(self, kind: EventKind, node_id: int, updates: int, size: int, forced: bool) -> None:
        event = NodeEvent(self.steps, kind, node_id, updates, size, forced)
        self.events.append(event)
        _LOGGER.debug(
            "Step %d: %s node %d after %d updates over %d hypotheses%s",
            event.step,
            kind.value,
            node_id,
            updates,
            size,
            " (forced)" if forced else "",
        )
