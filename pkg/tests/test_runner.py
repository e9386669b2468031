"""Tests for episodes, replay, two-phase runs and suite reports."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from active_nav.agent import Agent
from active_nav.cogmap import GlobalPose
from active_nav.config import Config, TaskConfig
from active_nav.egocentric import ego_predict
from active_nav.gridworld import Action, generate_maze
from active_nav.runner import (
    TaskKind,
    TaskSpec,
    mean_deviation,
    replay,
    run_episode,
    run_suite,
    run_two_phase,
    step_cap_for,
)
from active_nav.store import dump_map, parse_map


def test_single_room_exploration_succeeds(single_room_config):
    log = run_episode(single_room_config, 0, TaskSpec.exploration())
    assert log.success
    assert log.coverage[-1] >= 0.95
    assert len(log.records) <= log.step_cap
    assert np.all(np.diff(log.coverage) >= 0)
    assert log.nodes >= 1
    assert log.events[0].node_id == 0


def test_episodes_are_deterministic(single_room_config):
    first = run_episode(single_room_config, 3, TaskSpec.exploration())
    second = run_episode(single_room_config, 3, TaskSpec.exploration())
    assert first.to_jsonl() == second.to_jsonl()


def test_replay_reproduces_poses(pair_config):
    log = run_episode(pair_config, 2, TaskSpec.exploration(step_cap=120))
    assert replay(pair_config, log) == log.poses


def test_goal_reach_in_a_single_room(single_room_config):
    log = run_episode(single_room_config, 1, TaskSpec.goal_reach())
    world = generate_maze(single_room_config.environment, 1)
    assert log.success
    last = log.poses[-1] if log.records else log.start
    assert (last.x, last.y) == world.goal
    assert log.forward_steps >= log.oracle_steps


def test_summary_fields(single_room_config):
    log = run_episode(single_room_config, 0, TaskSpec.exploration(step_cap=5))
    summary = log.summary()
    assert summary["total_steps"] == len(log.records) <= 5
    assert summary["deviation"] == summary["forward_steps"] - summary["oracle_steps"]
    assert summary["forward_steps"] + summary["turn_steps"] <= summary["total_steps"]
    assert log.to_jsonl().count("\n") == 2 + len(log.records) + len(log.events)


def test_step_cap_resolution():
    task = TaskSpec.exploration()
    assert step_cap_for(Config(), TaskSpec.exploration(step_cap=9), 100) == 9
    capped = Config(task=TaskConfig(step_cap=40))
    assert step_cap_for(capped, task, 100) == 40
    assert step_cap_for(Config(), task, 10) == 120


@pytest.mark.parametrize(("target", "cap"), [(0.0, None), (1.5, None), (0.5, 0)])
def test_task_spec_validation(target, cap):
    with pytest.raises(ValueError):
        TaskSpec.exploration(target, cap)


def test_suite_writes_reports(single_room_config, tmp_path):
    tasks = [TaskSpec.exploration(), TaskSpec.goal_reach()]
    report = run_suite(single_room_config, [1, 0], tasks, workers=1, out_dir=tmp_path)
    assert list(report.rows["seed"]) == [0, 1, 0, 1]
    assert list(report.rows["task"]) == ["exploration"] * 2 + ["goal_reach"] * 2
    assert report.task_summary(TaskKind.EXPLORATION)["episodes"] == 2

    rows = pd.read_csv(tmp_path / "episodes.csv")
    explore = rows[rows["task"] == "exploration"]
    expected = float((explore["forward_steps"] - explore["oracle_steps"]).mean())
    assert mean_deviation(rows, "exploration") == pytest.approx(expected)
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "logs" / "goal_reach-1.jsonl").exists()


def test_suite_needs_seeds(single_room_config):
    with pytest.raises(ValueError):
        run_suite(single_room_config, [], [TaskSpec.exploration()])


def test_two_phase_map_survives_the_store(pair_config):
    result = run_two_phase(pair_config, 1)
    loaded = parse_map(dump_map(result.snapshot))
    again = run_episode(pair_config, 1, TaskSpec.goal_reach(), snapshot=loaded)
    assert again.to_jsonl() == result.goal_reach.to_jsonl()
    assert result.goal_reach.start == result.exploration.poses[-1]
    assert result.exploration.task is TaskKind.EXPLORATION


@pytest.mark.parametrize("seed", [0, 4, 19, 5])
def test_never_walks_into_a_wall_it_has_seen(monkeypatch, seed):
    blind: list[GlobalPose] = []
    act = Agent.act

    def checked(self):
        action = act(self)
        if action is Action.FORWARD and ego_predict(self.ego, action).collision_prob >= 1.0:
            blind.append(self.pose)
        return action

    monkeypatch.setattr(Agent, "act", checked)
    run_episode(Config(), seed, TaskSpec.exploration(step_cap=300))
    assert blind == []


def test_goal_reach_after_exploring_stays_near_the_shortest_route(pair_config):
    result = run_two_phase(pair_config, 1)
    assert result.exploration.success
    goal = result.goal_reach
    assert goal.success
    rooms = {record.node for record in goal.records if record.node is not None}
    assert goal.forward_steps <= goal.oracle_steps + 2 * max(1, len(rooms))
