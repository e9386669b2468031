"""Tests for place canvases, room bounds and localization hypotheses."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from active_nav.allocentric import (
    IDENTITY,
    Hypothesis,
    HypothesisSet,
    Outcome,
    PlacePose,
    RoomBounds,
    SpawnContext,
    Transform,
    hypo_decide,
    hypo_force,
    hypo_spawn,
    hypo_update,
    place_complete,
    place_fuse,
    place_merge,
    place_mismatch,
    place_new,
    place_query,
    room_bounds,
    rotate_xy,
)
from active_nav.config import AgentConfig
from active_nav.const import DEFAULT_ROOM_CHANGE_THRESHOLD
from active_nav.errors import CanvasOverflowError, OutOfFrameError
from active_nav.gridworld import UNKNOWN, Heading, Pose, TileKind, canonical, observe

from .worlds import (
    KEYED_ROOM,
    TWO_ROOMS,
    TWO_ROOMS_LAYOUT,
    draw,
    fused_room,
    open_hall,
    recolour,
)


def _place(pose: Pose, origin: Pose) -> PlacePose:
    return PlacePose(pose.x - origin.x, pose.y - origin.y, pose.heading)


@pytest.mark.parametrize("rotation", range(4))
def test_transform_inverse_and_compose(rotation):
    transform = Transform(rotation, 2, -3)
    other = Transform(rotation + 1, -1, 5)
    pose = PlacePose(1, 4, Heading.E)
    assert transform.inverse().apply(transform.apply(pose)) == pose
    assert transform.compose(transform.inverse()) == IDENTITY
    assert transform.compose(other).apply(pose) == transform.apply(other.apply(pose))


def test_rotation_is_clockwise():
    assert rotate_xy(0, -1, 1) == (1, 0)
    assert rotate_xy(1, 0, 1) == (0, 1)
    assert Transform(1, 0, 0).apply(PlacePose(0, -1, Heading.N)) == PlacePose(1, 0, Heading.E)


def test_fused_room_matches_ground_truth():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    canvas = fused_room(world, world.start)
    known = canvas.known_cells()
    assert len(known) == 36
    for x, y in known:
        assert canvas.kind_at(x, y) == world.kind_at(3 + x, 3 + y)
    complete = place_complete(canvas)
    ox, oy = canvas.offset
    assert complete[oy - 2, ox - 2] == TileKind.GOAL
    assert complete[0, 0] == UNKNOWN


def test_query_predicts_every_pose_of_a_known_room():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    canvas = fused_room(world, world.start)
    for x in range(1, 5):
        for y in range(1, 5):
            for heading in Heading:
                pose = Pose(x, y, heading)
                assert place_query(canvas, _place(pose, world.start)) == observe(world, pose)


def test_query_outside_the_canvas():
    with pytest.raises(OutOfFrameError):
        place_query(place_new(13), PlacePose(20, 0, Heading.N))


def test_mismatch_of_consistent_and_recoloured_views():
    world = draw(KEYED_ROOM, Pose(2, 4, Heading.N))
    canvas = fused_room(world, world.start)
    same = place_mismatch(canvas, PlacePose(0, 0, Heading.N), observe(world, world.start))
    assert same.value == 0.0
    assert same.defined

    green = draw(recolour(KEYED_ROOM, "r", "g"), Pose(2, 4, Heading.N))
    other = place_mismatch(canvas, PlacePose(0, 0, Heading.N), observe(green, green.start))
    assert other.defined
    assert other.value > DEFAULT_ROOM_CHANGE_THRESHOLD


def test_mismatch_needs_overlap():
    world = draw(KEYED_ROOM, Pose(2, 4, Heading.N))
    score = place_mismatch(place_new(), PlacePose(0, 0, Heading.N), observe(world, world.start))
    assert score == (0.0, 0, False)


def test_open_and_closed_doors_agree():
    world = draw(TWO_ROOMS, Pose(4, 2, Heading.E))
    canvas = place_fuse(place_new(), PlacePose(0, 0, Heading.E), observe(world, world.start))
    world.tiles[2, 6] = TileKind.DOOR_OPEN
    score = place_mismatch(canvas, PlacePose(0, 0, Heading.E), observe(world, world.start))
    assert score.compared_cells > 0
    # cells behind the opened door were never fused, so nothing disagrees
    assert score.value == 0.0


def test_overflow_raises_or_clips(caplog):
    world = draw(open_hall(), Pose(7, 10, Heading.N))
    obs = observe(world, world.start)
    with pytest.raises(CanvasOverflowError):
        place_fuse(place_new(5), PlacePose(0, 0, Heading.N), obs)
    with caplog.at_level(logging.WARNING, logger="active_nav.allocentric"):
        canvas = place_fuse(place_new(5), PlacePose(0, 0, Heading.N), obs, clip=True)
    assert "outside the place canvas" in caplog.text
    assert canvas.kind_at(0, 0) == TileKind.RED


def test_merge_aligns_two_frames():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    partial = place_fuse(place_new(), PlacePose(0, 0, Heading.N), observe(world, world.start))
    other_origin = Pose(2, 2, Heading.E)
    full = fused_room(world, other_origin)
    merged = place_merge(partial, full, Transform(0, -1, -1))
    assert merged.observation_count == partial.observation_count + full.observation_count
    assert len(merged.known_cells()) == 36
    for x, y in merged.known_cells():
        assert merged.kind_at(x, y) == world.kind_at(3 + x, 3 + y)


def test_bounds_of_a_closed_room():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    canvas = fused_room(world, world.start)
    assert room_bounds(canvas) == RoomBounds(-3, -3, 2, 2, ())


def test_bounds_unknown_before_the_walls_are_seen():
    world = draw(KEYED_ROOM, Pose(3, 4, Heading.N))
    canvas = place_fuse(place_new(), PlacePose(0, 0, Heading.N), observe(world, world.start))
    assert room_bounds(canvas) is None


def test_bounds_find_the_doorway():
    world = draw(TWO_ROOMS, Pose(2, 2, Heading.N), layout=TWO_ROOMS_LAYOUT)
    canvas = fused_room(world, world.start)
    bounds = room_bounds(canvas)
    assert bounds == RoomBounds(-2, -2, 3, 3, ((3, 0),))
    assert bounds.outward((3, 0)) is Heading.E
    assert bounds.exits() == {(3, 0): (4, 0)}
    assert bounds.contains(3, 0)
    assert not bounds.contains(4, 0)
    assert bounds.admits(4, 0)
    assert not bounds.admits(5, 0)


def test_spawn_without_known_places():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    hset = hypo_spawn([], observe(world, world.start), SpawnContext(), AgentConfig())
    assert len(hset) == 1
    assert hset.best().is_new_place
    assert np.allclose(hset.weights(), [1.0])
    assert hypo_decide(hset, 0.9, 0.5).outcome is Outcome.NEW_PLACE


def _keyed_spawn(config: AgentConfig) -> tuple[HypothesisSet, object]:
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    canvas = fused_room(world, world.start)
    obs = observe(world, Pose(2, 2, Heading.W))
    context = SpawnContext(pose=PlacePose(0, 0, Heading.W))
    return hypo_spawn([(0, canvas)], obs, context, config), (canvas, obs)


def test_spawn_localizes_in_a_known_room():
    hset, _ = _keyed_spawn(AgentConfig())
    assert len(hset) <= AgentConfig().spawn_cap
    assert np.isclose(hset.weights().sum(), 1.0)
    decision = hypo_decide(hset, 0.9, 0.5)
    assert decision.outcome is Outcome.LOCALIZED
    assert decision.node_id == 0
    assert decision.transform == Transform(0, -1, -1)
    assert hypo_force(hset) == decision


def test_spawn_respects_the_cap():
    hset, _ = _keyed_spawn(AgentConfig(spawn_cap=10))
    assert len(hset) <= 10
    assert any(h.is_new_place for h in hset.hypotheses)


def test_update_prunes_a_third_and_renormalizes():
    config = AgentConfig()
    hset, (canvas, obs) = _keyed_spawn(config)
    size = len(hset)
    expected = size - min(int(size * config.prune_fraction), size - len(hset.targets()))
    updated = hypo_update(hset, PlacePose(0, 0, Heading.W), obs, {0: canvas}, config)
    assert len(updated) == expected
    assert updated.step_count == 1
    assert np.isclose(updated.weights().sum(), 1.0)
    assert updated.targets() == hset.targets()


def test_contradicting_view_raises_novelty():
    config = AgentConfig()
    hset, (canvas, _) = _keyed_spawn(config)
    before = next(w for h, w in zip(hset.hypotheses, hset.weights()) if h.is_new_place)
    green = draw(recolour(KEYED_ROOM, "r", "g"), Pose(2, 2, Heading.W))
    updated = hypo_update(
        hset, PlacePose(0, 0, Heading.W), observe(green, green.start), {0: canvas}, config
    )
    after = next(w for h, w in zip(updated.hypotheses, updated.weights()) if h.is_new_place)
    assert after > before


def test_decide_on_an_empty_or_flat_set():
    assert hypo_decide(HypothesisSet([]), 0.9, 0.5).outcome is Outcome.UNDECIDED
    hset, _ = _keyed_spawn(AgentConfig())
    assert hypo_decide(hset, 1.0, 0.5).outcome is Outcome.UNDECIDED


def test_canonical_folds_open_doors():
    kinds = np.array([TileKind.DOOR_OPEN, TileKind.DOOR_CLOSED, TileKind.RED])
    assert canonical(kinds).tolist() == [TileKind.DOOR_CLOSED, TileKind.DOOR_CLOSED, TileKind.RED]


def _keyed_spawn_at(expected: PlacePose, rows=KEYED_ROOM) -> tuple[HypothesisSet, object]:
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    canvas = fused_room(world, world.start)
    seen = draw(rows, Pose(2, 2, Heading.W))
    obs = observe(seen, seen.start)
    context = SpawnContext(pose=PlacePose(0, 0, Heading.W), expected_poses={0: expected})
    return hypo_spawn([(0, canvas)], obs, context, AgentConfig()), (canvas, obs)


def test_spawn_seeds_the_pose_path_integration_predicts():
    hset, _ = _keyed_spawn_at(PlacePose(-1, -1, Heading.W))
    known = [h for h in hset.hypotheses if not h.is_new_place]
    assert known
    assert all(h.transform.rotation == 0 for h in known)
    decision = hypo_decide(hset, 0.9, 0.5)
    assert decision.outcome is Outcome.LOCALIZED
    assert decision.transform == Transform(0, -1, -1)


def test_spawn_drops_look_alikes_that_path_integration_rules_out():
    hset, _ = _keyed_spawn_at(PlacePose(6, 6, Heading.W))
    assert hset.targets() == {None}
    assert hypo_decide(hset, 0.9, 0.5).outcome is Outcome.NEW_PLACE


def test_novelty_waits_for_an_update_while_known_places_remain():
    config = AgentConfig()
    hset, (canvas, obs) = _keyed_spawn_at(
        PlacePose(-1, -1, Heading.W), recolour(KEYED_ROOM, "r", "g")
    )
    assert hset.targets() == {0, None}
    assert hset.best().is_new_place
    assert hypo_decide(hset, 0.9, 0.5).outcome is Outcome.UNDECIDED

    updated = hypo_update(hset, PlacePose(0, 0, Heading.W), obs, {0: canvas}, config)
    assert hypo_decide(updated, 0.9, 0.5).outcome is Outcome.NEW_PLACE


def test_update_rules_out_poses_outside_the_room():
    world = draw(TWO_ROOMS, Pose(2, 2, Heading.N), layout=TWO_ROOMS_LAYOUT)
    canvas = fused_room(world, world.start)
    obs = observe(world, Pose(3, 2, Heading.E))
    inside = Hypothesis(0, Transform(0, 1, 0), 0.0)
    outside = Hypothesis(0, Transform(0, 6, 0), 0.0)
    hset = HypothesisSet([inside, outside])
    updated = hypo_update(hset, PlacePose(0, 0, Heading.E), obs, {0: canvas}, AgentConfig())
    assert updated.best().transform == Transform(0, 1, 0)
    assert updated.weights().max() > 0.99
