"""Acceptance-scale runs. Set ACTIVE_NAV_SLOW=1 to include them."""

from __future__ import annotations

import attr
import numpy as np
import pytest

from active_nav.agent import Agent, EventKind
from active_nav.allocentric import PlacePose, place_fuse, place_new, place_query
from active_nav.cogmap import GlobalPose
from active_nav.config import Config
from active_nav.gridworld import Action, Heading, Pose, canonical, observe, step
from active_nav.oracle import oracle_goal
from active_nav.runner import TaskKind, TaskSpec, mean_deviation, run_suite

from .worlds import LOOK_ALIKE, LOOK_ALIKE_CENTRES, draw

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def suite():
    config = Config()
    tasks = [TaskSpec.exploration(config.task.coverage_target), TaskSpec.goal_reach()]
    return run_suite(config, config.suite.seeds, tasks, workers=1)


@pytest.mark.parametrize("task", list(TaskKind))
def test_suite_success_and_efficiency(suite, task):
    rows = suite.rows[suite.rows["task"] == task.value]
    assert len(rows) == 20
    assert rows["success"].sum() >= 19
    assert mean_deviation(suite.rows, task) <= 3 * rows["oracle_steps"].mean()


def _room(width: int, height: int, color: str) -> tuple[str, ...]:
    edge = "#" * (width + 2)
    return (edge,) + ("#" + color * width + "#",) * height + (edge,)


def _disagreement(world, canvas, origin: Pose) -> float:
    fractions = []
    for y in range(1, world.height - 1):
        for x in range(1, world.width - 1):
            if (x, y) == (origin.x, origin.y):
                continue
            for heading in Heading:
                truth = observe(world, Pose(x, y, heading))
                pred = place_query(canvas, PlacePose(x - origin.x, y - origin.y, heading))
                seen = truth.visible
                wrong = canonical(pred.cells[seen]) != canonical(truth.cells[seen])
                fractions.append(float(wrong.mean()))
    return float(np.mean(fractions))


@pytest.mark.parametrize(("width", "fuses"), [(4, 3), (5, 3), (6, 3), (7, 3), (8, 5)])
def test_place_inference_converges(width, fuses):
    rng = np.random.default_rng(width)
    scores = []
    for _ in range(5):
        height = int(rng.integers(4, 8))
        color = str(rng.choice(["r", "g", "b", "p"]))
        origin = Pose(1 + (width - 1) // 2, 1 + (height - 1) // 2, Heading.N)
        world = draw(_room(width, height, color), origin)
        canvas = place_new()
        pose = origin
        for _ in range(fuses):
            relative = PlacePose(pose.x - origin.x, pose.y - origin.y, pose.heading)
            canvas = place_fuse(canvas, relative, observe(world, pose))
            pose = pose.turned(Action.TURN_RIGHT)
        scores.append(_disagreement(world, canvas, origin))
    assert np.mean(scores) < 0.2


def _visit(world, agent: Agent, pose: Pose, target: tuple[int, int]) -> Pose:
    route = oracle_goal(attr.evolve(world, goal=target), pose)
    for action in list(route.actions) + [Action.TURN_LEFT] * 4:
        pose, collision = step(world, pose, action)
        agent.perceive(action, collision, observe(world, pose))
    return pose


def test_look_alike_loop_relocalizes():
    world = draw(LOOK_ALIKE, Pose(*LOOK_ALIKE_CENTRES["nw"], Heading.E))
    agent = Agent(Config(), GlobalPose(*LOOK_ALIKE_CENTRES["nw"], Heading.E))
    pose = world.start
    agent.bootstrap(observe(world, pose))
    for _ in range(4):
        pose, collision = step(world, pose, Action.TURN_LEFT)
        agent.perceive(Action.TURN_LEFT, collision, observe(world, pose))

    for room in ("ne", "se", "sw", "nw"):
        pose = _visit(world, agent, pose, LOOK_ALIKE_CENTRES[room])
    first_pass = len(agent.events)
    for room in ("sw", "se", "ne", "nw"):
        pose = _visit(world, agent, pose, LOOK_ALIKE_CENTRES[room])

    created = [e for e in agent.events if e.kind is not EventKind.LOCALIZED]
    assert len(agent.graph) == 4
    assert [e.kind for e in created] == [EventKind.NEW] * 4
    assert all(e.updates <= 4 for e in created)
    revisits = agent.events[first_pass:]
    assert revisits
    assert all(e.kind is EventKind.LOCALIZED and e.updates <= 2 for e in revisits)
