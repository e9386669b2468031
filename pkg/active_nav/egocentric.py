"""Agent-frame short-memory model predicting observations and collisions."""

from __future__ import annotations

import logging
from typing import NamedTuple, Sequence

import attr
import numpy as np

from .const import DEFAULT_FORGET_HORIZON
from .gridworld import (
    UNKNOWN,
    VIEW_AGENT_COL,
    VIEW_AGENT_ROW,
    VIEW_SIZE,
    Action,
    Observation,
    TileKind,
    render_window,
    traversable,
)

_LOGGER = logging.getLogger(__name__)

EGO_RADIUS = 6
EGO_SIZE = 2 * EGO_RADIUS + 1

# Buffer rows/cols holding the observation window
_WINDOW_ROWS = slice(EGO_RADIUS - VIEW_AGENT_ROW, EGO_RADIUS - VIEW_AGENT_ROW + VIEW_SIZE)
_WINDOW_COLS = slice(EGO_RADIUS - VIEW_AGENT_COL, EGO_RADIUS - VIEW_AGENT_COL + VIEW_SIZE)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@attr.s(slots=True, frozen=True, eq=False)
class EgoState:
    """Agent-centred buffer; row 0 is ahead and the agent sits at the centre."""

    kinds: np.ndarray = attr.ib(converter=_frozen)
    ages: np.ndarray = attr.ib(converter=_frozen)
    clock: int = attr.ib(default=0)
    forget_horizon: int = attr.ib(default=DEFAULT_FORGET_HORIZON)

    @property
    def front(self) -> int:
        """Belief about the tile straight ahead."""
        return int(self.kinds[EGO_RADIUS - 1, EGO_RADIUS])


class EgoPrediction(NamedTuple):
    """Imagined outcome of one action."""

    observation: Observation
    collision_prob: float


def ego_init(forget_horizon: int = DEFAULT_FORGET_HORIZON) -> EgoState:
    """Empty buffer."""
    return EgoState(
        kinds=np.full((EGO_SIZE, EGO_SIZE), UNKNOWN, dtype=np.int8),
        ages=np.zeros((EGO_SIZE, EGO_SIZE), dtype=np.int32),
        forget_horizon=forget_horizon,
    )


def _shifted(array: np.ndarray, action: Action, moved: bool, fill: int) -> np.ndarray:
    if action is Action.TURN_LEFT:
        return np.rot90(array, -1).copy()
    if action is Action.TURN_RIGHT:
        return np.rot90(array, 1).copy()
    if action is Action.FORWARD and moved:
        out = np.full_like(array, fill)
        out[1:, :] = array[:-1, :]
        return out
    return array.copy()


def ego_update(
    state: EgoState, action: Action | None, obs: Observation, collision: bool
) -> EgoState:
    """Move the buffer with the agent, age it, then write the observation in.

    A ``None`` action records an observation taken without moving.
    """
    if action is Action.FORWARD:
        front = state.front
        if collision and front != UNKNOWN and traversable(front, optimistic=False):
            _LOGGER.warning(
                "Collision reported while the tile ahead is believed %s",
                TileKind(front).name,
            )
        elif not collision and front == TileKind.WALL:
            _LOGGER.warning("Moved forward through a tile believed to be a wall")

    moved = action is Action.FORWARD and not collision
    kinds = _shifted(state.kinds, action, moved, UNKNOWN)
    ages = _shifted(state.ages, action, moved, 0) + 1

    seen = obs.visible
    window_kinds = kinds[_WINDOW_ROWS, _WINDOW_COLS]
    window_ages = ages[_WINDOW_ROWS, _WINDOW_COLS]
    window_kinds[seen] = obs.cells[seen]
    window_ages[seen] = 0

    kinds[ages > state.forget_horizon] = UNKNOWN
    return EgoState(kinds, ages, state.clock + 1, state.forget_horizon)


def _predict(kinds: np.ndarray, action: Action) -> tuple[EgoPrediction, np.ndarray]:
    if action is Action.FORWARD:
        front = int(kinds[EGO_RADIUS - 1, EGO_RADIUS])
        if front == TileKind.WALL:
            collision_prob = 1.0
        elif front == UNKNOWN:
            collision_prob = 0.5
        else:
            collision_prob = 0.0
    else:
        collision_prob = 0.0

    moved = action is Action.FORWARD and collision_prob < 1.0
    after = _shifted(kinds, action, moved, UNKNOWN)
    if moved and after[EGO_RADIUS, EGO_RADIUS] == TileKind.DOOR_CLOSED:
        after[EGO_RADIUS, EGO_RADIUS] = TileKind.DOOR_OPEN
    observation = render_window(after[_WINDOW_ROWS, _WINDOW_COLS])
    return EgoPrediction(observation, collision_prob), after


def ego_predict(state: EgoState, action: Action) -> EgoPrediction:
    """Predict the next observation and collision probability of an action."""
    return _predict(state.kinds, action)[0]


def ego_rollout(state: EgoState, actions: Sequence[Action]) -> list[EgoPrediction]:
    """Chain predictions, moving the imagined buffer after each action."""
    kinds = state.kinds
    predictions = []
    for action in actions:
        prediction, kinds = _predict(kinds, action)
        predictions.append(prediction)
    return predictions


def ego_cells(state: EgoState) -> list[tuple[int, int, int]]:
    """Known buffer cells as (forward, lateral, kind) offsets from the agent."""
    rows, cols = np.nonzero(state.kinds != UNKNOWN)
    return [
        (EGO_RADIUS - int(r), int(c) - EGO_RADIUS, int(state.kinds[r, c]))
        for r, c in zip(rows, cols)
    ]
