"""Tests for the three planning levels."""

from __future__ import annotations

import pytest

from active_nav.allocentric import PlacePose, place_fuse, place_new
from active_nav.cogmap import CognitiveGraph, GlobalPose, map_add_node
from active_nav.egocentric import ego_init, ego_update
from active_nav.errors import NoPathError, NoTargetError
from active_nav.gridworld import Action, Heading, Pose, TileKind, observe
from active_nav.planner import (
    EfeScore,
    MidKind,
    Planner,
    PlannerView,
    PolicyMid,
    PolicyTop,
    Preference,
    efe_low,
    efe_mid,
    efe_top,
    info_gain,
)

from .worlds import KEYED_ROOM, TWO_ROOMS, TWO_ROOMS_LAYOUT, draw, fused_room


def _keyed():
    world = draw(KEYED_ROOM, Pose(3, 3, Heading.N))
    return world, fused_room(world, world.start)


def _chain(length: int) -> CognitiveGraph:
    graph = CognitiveGraph()
    for index in range(length):
        door = (6 * index - 3, 0) if index else None
        map_add_node(graph, place_new(), GlobalPose(6 * index, 0, Heading.E), step=index, door=door)
    return graph


def _view(canvas, preference: Preference) -> PlannerView:
    graph = CognitiveGraph()
    map_add_node(graph, canvas, GlobalPose(3, 3, Heading.N))
    return PlannerView(
        ego=ego_init(),
        canvas=canvas,
        pose=PlacePose(0, 0, Heading.N),
        origin=GlobalPose(3, 3, Heading.N),
        graph=graph,
        preference=preference,
        frame=0,
    )


def test_preference_values_only_the_goal():
    assert Preference.flat().pragmatic(TileKind.GOAL) == 0.0
    assert Preference.goal_tile(5.0).pragmatic(TileKind.GOAL) == 5.0
    assert Preference.goal_tile().pragmatic(TileKind.RED) == 0.0


def test_score_objective_adds_weighted_path():
    score = EfeScore(4.0, 0.0, 10.0, 0.1)
    assert score.total == -4.0
    assert score.objective == pytest.approx(-3.0)


def test_info_gain_of_an_empty_canvas():
    assert info_gain(place_new(17), PlacePose(0, 0, Heading.N)) == 48


def test_info_gain_of_a_known_room():
    _, canvas = _keyed()
    for heading in Heading:
        assert info_gain(canvas, PlacePose(0, 0, heading)) == 0


def test_mid_explores_a_partial_room():
    world = draw(KEYED_ROOM, Pose(3, 4, Heading.N))
    canvas = place_fuse(place_new(), PlacePose(0, 0, Heading.N), observe(world, world.start))
    policy, score = efe_mid(canvas, PlacePose(0, 0, Heading.N), Preference.flat())
    assert policy.kind is MidKind.EXPLORE
    assert score.epistemic > 0
    assert canvas.kind_at(*policy.target.cell) != TileKind.WALL


def test_mid_has_nothing_to_do_in_a_closed_known_room():
    _, canvas = _keyed()
    with pytest.raises(NoTargetError):
        efe_mid(canvas, PlacePose(0, 0, Heading.N), Preference.flat())


def test_mid_heads_for_a_seen_goal():
    _, canvas = _keyed()
    policy, score = efe_mid(canvas, PlacePose(0, 0, Heading.N), Preference.goal_tile())
    assert policy.kind is MidKind.GOAL
    assert policy.target.cell == (-2, -2)
    assert policy.any_heading
    assert score.pragmatic > 0


def test_low_takes_the_cheapest_sequence():
    _, canvas = _keyed()
    start, target = PlacePose(0, 0, Heading.N), PlacePose(-2, -2, Heading.N)
    low = efe_low(canvas, ego_init(), start, target, any_heading=True)
    assert low.actions == (
        Action.FORWARD,
        Action.FORWARD,
        Action.TURN_LEFT,
        Action.FORWARD,
        Action.FORWARD,
    )
    assert low.poses[-1] == PlacePose(-2, -2, Heading.W)


def test_low_already_there():
    _, canvas = _keyed()
    pose = PlacePose(0, 0, Heading.N)
    low = efe_low(canvas, ego_init(), pose, PlacePose(0, 0, Heading.E), any_heading=True)
    assert low.actions == ()


def test_low_refuses_a_wall_target():
    _, canvas = _keyed()
    with pytest.raises(NoPathError):
        efe_low(canvas, ego_init(), PlacePose(0, 0, Heading.N), PlacePose(-3, 0, Heading.N))


def test_top_routes_to_a_registered_goal():
    graph = _chain(3)
    graph.current = 0
    top = efe_top(graph, place_new(), Preference.goal_tile(), {2: (12, 0)})
    assert top == PolicyTop(2, (0, 1, 2))
    assert top.moving


def test_top_stays_while_undecided_or_busy():
    graph = _chain(3)
    graph.current = 0
    assert efe_top(graph, place_new(), Preference.flat(), {}, undecided=True) == PolicyTop()
    assert efe_top(graph, place_new(), Preference.flat(), {}) == PolicyTop(0, (0,))


def test_top_leaves_an_exhausted_place():
    graph = _chain(3)
    graph.current = 0
    top = efe_top(graph, place_new(), Preference.flat(), {}, exhausted=True)
    assert top == PolicyTop(1, (0, 1))


def test_mid_policy_reached():
    mid = PolicyMid(PlacePose(1, 1, Heading.N), MidKind.EXIT, any_heading=True)
    assert mid.reached(PlacePose(1, 1, Heading.S))
    assert not PolicyMid(PlacePose(1, 1, Heading.N)).reached(PlacePose(1, 1, Heading.S))


def test_planner_stalls_when_nothing_is_left():
    _, canvas = _keyed()
    planner = Planner()
    assert planner.plan_step(_view(canvas, Preference.flat())) is Action.TURN_LEFT
    assert planner.stalled


def test_planner_walks_to_a_seen_goal():
    _, canvas = _keyed()
    planner = Planner()
    view = _view(canvas, Preference.goal_tile())
    assert planner.plan_step(view) is Action.FORWARD
    assert not planner.stalled
    assert planner.mid.kind is MidKind.GOAL


def _on_the_door(heading: Heading) -> PlannerView:
    world = draw(TWO_ROOMS, Pose(2, 2, Heading.E), layout=TWO_ROOMS_LAYOUT)
    pose = Pose(6, 2, heading)
    obs = observe(world, pose)
    canvas = place_fuse(place_new(), PlacePose(0, 0, heading), obs)
    graph = CognitiveGraph()
    map_add_node(graph, canvas, GlobalPose(6, 2, heading))
    return PlannerView(
        ego=ego_update(ego_init(), None, obs, False),
        canvas=canvas,
        pose=PlacePose(0, 0, heading),
        origin=GlobalPose(6, 2, heading),
        graph=graph,
        preference=Preference.flat(),
        frame=0,
    )


def test_planner_walks_on_through_a_door():
    planner = Planner()
    assert planner.plan_step(_on_the_door(Heading.E)) is Action.FORWARD
    assert planner.mid is None
    assert not planner.stalled


def test_planner_does_not_walk_into_the_aisle_wall():
    planner = Planner()
    assert planner.plan_step(_on_the_door(Heading.N)) is not Action.FORWARD
