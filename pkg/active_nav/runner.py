"""Episode and suite runner with oracle-relative metrics."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import attr
import numpy as np
import pandas as pd

from .agent import Agent, AgentSnapshot, NodeEvent
from .cogmap import GlobalPose
from .config import Config
from .gridworld import (
    Action,
    Heading,
    Pose,
    TileKind,
    WorldGrid,
    coverable_tiles,
    generate_maze,
    observe,
    step,
    window_coords,
)
from .oracle import oracle_explore, oracle_goal
from .planner import Preference

_LOGGER = logging.getLogger(__name__)


class TaskKind(Enum):
    """Evaluation tasks."""

    EXPLORATION = "exploration"
    GOAL_REACH = "goal_reach"


def _check_target(instance, attribute, value) -> None:
    if not 0.0 < value <= 1.0:
        raise ValueError(f"coverage_target must lie in (0, 1], got {value}")


def _check_cap(instance, attribute, value) -> None:
    if value is not None and value <= 0:
        raise ValueError(f"step_cap must be positive, got {value}")


@attr.s(slots=True, frozen=True)
class TaskSpec:
    """What counts as success, and when to give up."""

    kind: TaskKind = attr.ib(converter=TaskKind)
    coverage_target: float = attr.ib(default=0.95, validator=_check_target)
    step_cap: int | None = attr.ib(default=None, validator=_check_cap)

    @classmethod
    def exploration(cls, coverage_target: float = 0.95, step_cap: int | None = None) -> TaskSpec:
        """Observe a fraction of the coverable tiles."""
        return cls(TaskKind.EXPLORATION, coverage_target, step_cap)

    @classmethod
    def goal_reach(cls, step_cap: int | None = None) -> TaskSpec:
        """Step on the goal tile."""
        return cls(TaskKind.GOAL_REACH, step_cap=step_cap)

    def preference(self, config: Config) -> Preference:
        """Prior preference the agent plans with."""
        if self.kind is TaskKind.GOAL_REACH:
            return Preference.goal_tile(config.planner.goal_bonus)
        return Preference.flat()


@attr.s(slots=True, frozen=True)
class StepRecord:
    """One environment step."""

    step: int = attr.ib()
    action: str = attr.ib()
    x: int = attr.ib()
    y: int = attr.ib()
    heading: str = attr.ib()
    collision: bool = attr.ib()
    coverage: float = attr.ib()
    node: int | None = attr.ib()
    hypotheses: int = attr.ib()


@attr.s(slots=True, frozen=True)
class EpisodeLog:
    """Everything an episode produced, replayable from its seed."""

    seed: int = attr.ib()
    task: TaskKind = attr.ib()
    start: Pose = attr.ib()
    opened_doors: tuple[tuple[int, int], ...] = attr.ib(converter=tuple)
    step_cap: int = attr.ib()
    oracle_steps: int = attr.ib()
    records: tuple[StepRecord, ...] = attr.ib(converter=tuple)
    events: tuple[NodeEvent, ...] = attr.ib(converter=tuple)
    success: bool = attr.ib()
    nodes: int = attr.ib()

    @property
    def actions(self) -> list[Action]:
        """Action trace."""
        return [Action[record.action] for record in self.records]

    @property
    def poses(self) -> list[Pose]:
        """Pose after every step."""
        return [Pose(r.x, r.y, Heading[r.heading]) for r in self.records]

    @property
    def coverage(self) -> list[float]:
        """Coverage after every step."""
        return [record.coverage for record in self.records]

    @property
    def hypothesis_sizes(self) -> list[int]:
        """Live hypothesis count after every step."""
        return [record.hypotheses for record in self.records]

    @property
    def forward_steps(self) -> int:
        """Position-changing actions."""
        return sum(1 for r in self.records if r.action == Action.FORWARD.name and not r.collision)

    @property
    def turn_steps(self) -> int:
        """Turn actions."""
        return sum(1 for r in self.records if r.action != Action.FORWARD.name)

    @property
    def deviation(self) -> int:
        """Forward steps beyond the oracle."""
        return self.forward_steps - self.oracle_steps

    def summary(self) -> dict[str, Any]:
        """Per-episode row of a suite report."""
        return {
            "task": self.task.value,
            "seed": self.seed,
            "success": self.success,
            "forward_steps": self.forward_steps,
            "turn_steps": self.turn_steps,
            "total_steps": len(self.records),
            "oracle_steps": self.oracle_steps,
            "deviation": self.deviation,
            "coverage": self.coverage[-1] if self.records else 0.0,
            "nodes": self.nodes,
            "step_cap": self.step_cap,
        }

    def to_jsonl(self) -> str:
        """Line-delimited records: header, steps, events, then the summary."""
        lines = [
            {
                "record": "episode",
                "seed": self.seed,
                "task": self.task.value,
                "start": [self.start.x, self.start.y, self.start.heading.name],
                "opened_doors": [list(door) for door in self.opened_doors],
                "step_cap": self.step_cap,
                "oracle_steps": self.oracle_steps,
            }
        ]
        lines += [{"record": "step", **attr.asdict(record)} for record in self.records]
        lines += [
            {
                "record": "event",
                "step": event.step,
                "kind": event.kind.value,
                "node": event.node_id,
                "updates": event.updates,
                "hypotheses": event.hypotheses,
                "forced": event.forced,
            }
            for event in self.events
        ]
        lines.append({"record": "summary", **self.summary()})
        return "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)


def step_cap_for(config: Config, task: TaskSpec, tour_steps: int) -> int:
    """Task cap, else configured cap, else a multiple of the oracle tour."""
    if task.step_cap is not None:
        return task.step_cap
    if config.task.step_cap is not None:
        return config.task.step_cap
    return max(1, math.ceil(config.task.step_cap_factor * max(1, tour_steps)))


def _open_doors(world: WorldGrid, doors: Iterable[tuple[int, int]]) -> None:
    for x, y in doors:
        if world.tiles[y, x] == TileKind.DOOR_CLOSED:
            world.tiles[y, x] = TileKind.DOOR_OPEN


def opened_doors(world: WorldGrid) -> tuple[tuple[int, int], ...]:
    """Doors currently open."""
    return tuple(
        door for door in world.doors if world.tiles[door[1], door[0]] == TileKind.DOOR_OPEN
    )


def play_episode(
    config: Config,
    seed: int,
    task: TaskSpec,
    *,
    snapshot: AgentSnapshot | None = None,
    world: WorldGrid | None = None,
) -> tuple[EpisodeLog, Agent, WorldGrid]:
    """Run an episode and hand back the agent and world it ended with."""
    if world is None:
        world = generate_maze(config.environment, seed)
    if snapshot is not None:
        _open_doors(world, snapshot.opened_doors)
        pose = Pose(snapshot.pose.x, snapshot.pose.y, snapshot.pose.heading)
    else:
        pose = world.start
    start = pose
    opened = opened_doors(world)

    coverable = coverable_tiles(world)
    tour_steps = oracle_explore(world, start, task.coverage_target).steps
    if task.kind is TaskKind.GOAL_REACH:
        oracle_steps = oracle_goal(world, start).steps
    else:
        oracle_steps = tour_steps
    step_cap = step_cap_for(config, task, tour_steps)

    agent = Agent(
        config,
        GlobalPose(start.x, start.y, start.heading),
        task.preference(config),
        snapshot,
    )
    seen: set[tuple[int, int]] = set()

    def look(current: Pose) -> tuple[object, float]:
        obs = observe(world, current)
        xs, ys = window_coords(current.x, current.y, current.heading)
        mask = obs.visible
        seen.update(zip(xs[mask].tolist(), ys[mask].tolist()))
        return obs, len(seen & coverable) / len(coverable) if coverable else 1.0

    def done(current: Pose, coverage: float) -> bool:
        if task.kind is TaskKind.GOAL_REACH:
            return (current.x, current.y) == tuple(world.goal)
        return coverage >= task.coverage_target

    obs, coverage = look(pose)
    agent.bootstrap(obs)
    success = done(pose, coverage)
    records: list[StepRecord] = []
    while not success and len(records) < step_cap:
        action = agent.act()
        outcome = step(world, pose, action)
        pose = outcome.new_pose
        obs, coverage = look(pose)
        agent.perceive(action, outcome.collision, obs)
        records.append(
            StepRecord(
                step=len(records) + 1,
                action=action.name,
                x=pose.x,
                y=pose.y,
                heading=pose.heading.name,
                collision=outcome.collision,
                coverage=round(coverage, 6),
                node=agent.current_node,
                hypotheses=len(agent.hypotheses) if agent.hypotheses is not None else 0,
            )
        )
        success = done(pose, coverage)

    log = EpisodeLog(
        seed=seed,
        task=task.kind,
        start=start,
        opened_doors=opened,
        step_cap=step_cap,
        oracle_steps=oracle_steps,
        records=records,
        events=agent.events,
        success=success,
        nodes=len(agent.graph),
    )
    _LOGGER.debug(
        "Seed %d %s: success=%s, %d forward steps (oracle %d), %d nodes",
        seed,
        task.kind.value,
        success,
        log.forward_steps,
        oracle_steps,
        log.nodes,
    )
    return log, agent, world


def run_episode(
    config: Config,
    seed: int,
    task: TaskSpec,
    *,
    snapshot: AgentSnapshot | None = None,
) -> EpisodeLog:
    """Run the full agent loop until success or the step cap."""
    return play_episode(config, seed, task, snapshot=snapshot)[0]


def replay(config: Config, log: EpisodeLog) -> list[Pose]:
    """Re-execute a log's actions on its seed and return the poses visited."""
    world = generate_maze(config.environment, log.seed)
    _open_doors(world, log.opened_doors)
    pose = log.start
    poses = []
    for action in log.actions:
        pose = step(world, pose, action).new_pose
        poses.append(pose)
    return poses


@attr.s(slots=True, frozen=True)
class TwoPhaseResult:
    """Exploration followed by goal reach in the same world."""

    exploration: EpisodeLog = attr.ib()
    goal_reach: EpisodeLog = attr.ib()
    snapshot: AgentSnapshot = attr.ib()


def run_two_phase(
    config: Config, seed: int, coverage_target: float | None = None
) -> TwoPhaseResult:
    """Explore, then go straight for the goal with the map just built."""
    target = config.task.coverage_target if coverage_target is None else coverage_target
    explore_log, agent, world = play_episode(config, seed, TaskSpec.exploration(target))
    snapshot = attr.evolve(agent.snapshot(), opened_doors=opened_doors(world))
    goal_log, _, _ = play_episode(
        config, seed, TaskSpec.goal_reach(), snapshot=snapshot, world=world
    )
    return TwoPhaseResult(explore_log, goal_log, snapshot)


@attr.s(slots=True, frozen=True, eq=False)
class SuiteReport:
    """Per-seed rows and per-task means."""

    rows: pd.DataFrame = attr.ib()
    summary: pd.DataFrame = attr.ib()
    logs: tuple[EpisodeLog, ...] = attr.ib(converter=tuple)

    def task_summary(self, task: TaskKind | str) -> dict[str, Any]:
        """Means of one task."""
        name = TaskKind(task).value
        row = self.summary[self.summary["task"] == name]
        return row.iloc[0].to_dict()


def summarize(rows: list[dict[str, Any]]) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Order episode rows and aggregate them per task."""
    df = pd.DataFrame(rows)
    order = {kind.value: index for index, kind in enumerate(TaskKind)}
    df["task_order"] = df["task"].map(order)
    df = df.sort_values(["task_order", "seed"]).drop(columns="task_order").reset_index(drop=True)
    grp = df.groupby("task", as_index=False, sort=False).agg(
        mean_forward_steps=("forward_steps", "mean"),
        mean_oracle_steps=("oracle_steps", "mean"),
        mean_deviation=("deviation", "mean"),
        mean_turn_steps=("turn_steps", "mean"),
        success_rate=("success", "mean"),
        episodes=("seed", "count"),
    )
    return df, grp


def _run_job(job: tuple[Config, int, TaskSpec]) -> EpisodeLog:
    config, seed, task = job
    return run_episode(config, seed, task)


def run_suite(
    config: Config,
    seeds: Sequence[int],
    tasks: Sequence[TaskSpec],
    *,
    workers: int | None = None,
    out_dir: str | Path | None = None,
) -> SuiteReport:
    """Run every task on every seed and aggregate against the oracles."""
    if not seeds:
        raise ValueError("run_suite needs at least one seed")
    workers = config.suite.workers if workers is None else workers
    jobs = [(config, int(seed), task) for task in tasks for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(_run_job, jobs))
    else:
        logs = [_run_job(job) for job in jobs]

    rows, summary = summarize([log.summary() for log in logs])
    failed = [(log.task.value, log.seed) for log in logs if not log.success]
    if failed:
        _LOGGER.warning("%d of %d episodes failed: %s", len(failed), len(logs), failed)

    if out_dir is not None:
        out = Path(out_dir)
        (out / "logs").mkdir(parents=True, exist_ok=True)
        rows.to_csv(out / "episodes.csv", index=False)
        summary.to_csv(out / "summary.csv", index=False)
        for log in logs:
            (out / "logs" / f"{log.task.value}-{log.seed}.jsonl").write_text(
                log.to_jsonl(), encoding="UTF-8"
            )
        _LOGGER.info("Wrote suite report for %d episodes to %s", len(logs), out)

    return SuiteReport(rows, summary, logs)


def mean_deviation(rows: pd.DataFrame, task: TaskKind | str) -> float:
    """Mean of agent minus oracle forward steps for one task."""
    subset = rows[rows["task"] == TaskKind(task).value]
    return float(np.mean(subset["forward_steps"] - subset["oracle_steps"]))
