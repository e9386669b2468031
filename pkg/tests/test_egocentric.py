"""Tests for the egocentric buffer."""

from __future__ import annotations

import logging

import numpy as np

from active_nav.egocentric import (
    EGO_RADIUS,
    ego_cells,
    ego_init,
    ego_predict,
    ego_rollout,
    ego_update,
)
from active_nav.gridworld import (
    HIDDEN,
    UNKNOWN,
    VIEW_SIZE,
    Action,
    Heading,
    Observation,
    Pose,
    TileKind,
    observe,
)

from .worlds import KEYED_ROOM, draw, drive, look_around


def _looked_around(world, pose, horizon: int = 20):
    state = ego_init(horizon)
    views = look_around(world, pose)
    state = ego_update(state, None, views[0][1], False)
    for _pose, obs in views[1:]:
        state = ego_update(state, Action.TURN_LEFT, obs, False)
    return ego_update(state, Action.TURN_LEFT, observe(world, pose), False)


def test_init_is_empty():
    state = ego_init()
    assert (state.kinds == UNKNOWN).all()
    assert ego_cells(state) == []
    assert state.front == UNKNOWN


def test_buffer_cells_match_the_world():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = _looked_around(world, world.start)
    fx, fy = Heading.N.vector
    rx, ry = Heading.N.right
    cells = ego_cells(state)
    assert len(cells) == 36
    for forward, lateral, kind in cells:
        x = 2 + forward * fx + lateral * rx
        y = 3 + forward * fy + lateral * ry
        assert world.kind_at(x, y) == kind


def test_forward_move_shifts_the_buffer():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = _looked_around(world, world.start)
    (_, collision, obs, pose), = drive(world, world.start, [Action.FORWARD])
    state = ego_update(state, Action.FORWARD, obs, collision)
    for forward, lateral, kind in ego_cells(state):
        assert world.kind_at(pose.x + lateral, pose.y - forward) == kind


def test_rollout_reproduces_ground_truth_in_a_known_room():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = _looked_around(world, world.start)
    plan = [Action.FORWARD, Action.TURN_RIGHT, Action.FORWARD, Action.FORWARD, Action.FORWARD]
    predictions = ego_rollout(state, plan)
    trace = drive(world.copy(), world.start, plan)
    for prediction, (_, collision, obs, _) in zip(predictions, trace):
        assert prediction.observation == obs
        assert prediction.collision_prob == (1.0 if collision else 0.0)
    assert trace[-1][1] is True


def test_predict_unknown_front_is_uncertain():
    assert ego_predict(ego_init(), Action.FORWARD).collision_prob == 0.5
    assert ego_predict(ego_init(), Action.TURN_LEFT).collision_prob == 0.0


def test_cells_fade_after_the_horizon():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = ego_update(ego_init(3), None, observe(world, world.start), False)
    blank = Observation(np.full((VIEW_SIZE, VIEW_SIZE), HIDDEN, dtype=np.int8))
    for _ in range(3):
        state = ego_update(state, None, blank, False)
    assert ego_cells(state)
    state = ego_update(state, None, blank, False)
    assert ego_cells(state) == []


def test_rollout_does_not_touch_the_state():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = _looked_around(world, world.start)
    before = state.kinds.copy()
    ego_rollout(state, [Action.FORWARD, Action.TURN_LEFT, Action.FORWARD])
    assert np.array_equal(state.kinds, before)


def test_unexpected_collision_is_logged(caplog):
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = ego_update(ego_init(), None, observe(world, world.start), False)
    assert state.front == TileKind.RED
    with caplog.at_level(logging.WARNING, logger="active_nav.egocentric"):
        ego_update(state, Action.FORWARD, observe(world, world.start), True)
    assert "Collision reported" in caplog.text


def test_agent_sits_in_the_middle():
    world = draw(KEYED_ROOM, Pose(2, 3, Heading.N))
    state = ego_update(ego_init(), None, observe(world, world.start), False)
    assert state.kinds[EGO_RADIUS, EGO_RADIUS] == TileKind.RED
