"""Configuration loading for active_nav.

The configuration file is YAML with a top level ``active_nav:`` mapping and an
optional ``logger:`` mapping. Everything is validated by ``CONFIG_SCHEMA`` and
turned into frozen records so the engine never touches raw dictionaries.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import attr
import voluptuous as vol
import yaml

from .const import (
    COLOR_NAMES,
    CONF_ADJACENCY_BONUS,
    CONF_AGENT,
    CONF_AISLE_LEN,
    CONF_CANVAS_SIZE,
    CONF_COLORS,
    CONF_CONNECTIVITY,
    CONF_COVERAGE_TARGET,
    CONF_DECAY,
    CONF_DECIDE_MARGIN,
    CONF_DECIDE_THRESHOLD,
    CONF_DEFAULT,
    CONF_DUP_RADIUS,
    CONF_ENVIRONMENT,
    CONF_FORGET_HORIZON,
    CONF_GOAL_BONUS,
    CONF_LOGGER,
    CONF_LOGS,
    CONF_MATCH_NOISE,
    CONF_MAX_ROOM,
    CONF_MAX_UNDECIDED_STEPS,
    CONF_MIN_OVERLAP,
    CONF_MIN_ROOM,
    CONF_PATH_WEIGHT,
    CONF_PLANNER,
    CONF_POSE_PENALTY,
    CONF_PRUNE_FRACTION,
    CONF_ROOM_CHANGE_THRESHOLD,
    CONF_ROOM_COLS,
    CONF_ROOM_ROWS,
    CONF_SEEDS,
    CONF_SPAWN_CAP,
    CONF_STEP_CAP,
    CONF_STEP_CAP_FACTOR,
    CONF_SUITE,
    CONF_TASK,
    CONF_TURN_COST,
    CONF_WORKERS,
    CONNECTIVITY_MODES,
    DEFAULT_ADJACENCY_BONUS,
    DEFAULT_AISLE_LEN,
    DEFAULT_CANVAS_SIZE,
    DEFAULT_CONNECTIVITY,
    DEFAULT_COVERAGE_TARGET,
    DEFAULT_DECAY,
    DEFAULT_DECIDE_MARGIN,
    DEFAULT_DECIDE_THRESHOLD,
    DEFAULT_DUP_RADIUS,
    DEFAULT_FORGET_HORIZON,
    DEFAULT_GOAL_BONUS,
    DEFAULT_MATCH_NOISE,
    DEFAULT_MAX_ROOM,
    DEFAULT_MAX_UNDECIDED_STEPS,
    DEFAULT_MIN_OVERLAP,
    DEFAULT_MIN_ROOM,
    DEFAULT_PATH_WEIGHT,
    DEFAULT_POSE_PENALTY,
    DEFAULT_PRUNE_FRACTION,
    DEFAULT_ROOM_CHANGE_THRESHOLD,
    DEFAULT_ROOM_COLS,
    DEFAULT_ROOM_ROWS,
    DEFAULT_SEED_COUNT,
    DEFAULT_SPAWN_CAP,
    DEFAULT_STEP_CAP_FACTOR,
    DEFAULT_TURN_COST,
    DEFAULT_WORKERS,
    DOMAIN,
    MAX_ROOM_LIMIT,
    MIN_ROOM_LIMIT,
)
from .errors import ConfigurationError

_LOGGER = logging.getLogger(__name__)

_POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))
_PROBABILITY = vol.All(vol.Coerce(float), vol.Range(min=0.0, max=1.0))

_LOG_LEVELS = vol.In(["debug", "info", "warning", "error", "critical"])


def _odd(value: int) -> int:
    if value % 2 != 1:
        raise vol.Invalid("must be odd")
    return value


ENVIRONMENT_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ROOM_ROWS, default=DEFAULT_ROOM_ROWS): _POSITIVE_INT,
        vol.Optional(CONF_ROOM_COLS, default=DEFAULT_ROOM_COLS): _POSITIVE_INT,
        vol.Optional(CONF_MIN_ROOM, default=DEFAULT_MIN_ROOM): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_ROOM_LIMIT, max=MAX_ROOM_LIMIT)
        ),
        vol.Optional(CONF_MAX_ROOM, default=DEFAULT_MAX_ROOM): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_ROOM_LIMIT, max=MAX_ROOM_LIMIT)
        ),
        vol.Optional(CONF_CONNECTIVITY, default=DEFAULT_CONNECTIVITY): vol.In(
            CONNECTIVITY_MODES
        ),
        vol.Optional(CONF_AISLE_LEN, default=DEFAULT_AISLE_LEN): vol.All(
            _POSITIVE_INT, _odd
        ),
        vol.Optional(CONF_COLORS, default=list(COLOR_NAMES)): vol.All(
            [vol.In(COLOR_NAMES)], vol.Length(min=1)
        ),
    }
)

AGENT_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_FORGET_HORIZON, default=DEFAULT_FORGET_HORIZON): _POSITIVE_INT,
        vol.Optional(CONF_CANVAS_SIZE, default=DEFAULT_CANVAS_SIZE): vol.All(
            vol.Coerce(int), vol.Range(min=13)
        ),
        vol.Optional(
            CONF_ROOM_CHANGE_THRESHOLD, default=DEFAULT_ROOM_CHANGE_THRESHOLD
        ): _PROBABILITY,
        vol.Optional(CONF_MIN_OVERLAP, default=DEFAULT_MIN_OVERLAP): _POSITIVE_INT,
        vol.Optional(CONF_MATCH_NOISE, default=DEFAULT_MATCH_NOISE): vol.All(
            vol.Coerce(float), vol.Range(min=1e-6, max=0.5)
        ),
        vol.Optional(CONF_SPAWN_CAP, default=DEFAULT_SPAWN_CAP): vol.All(
            vol.Coerce(int), vol.Range(min=2)
        ),
        vol.Optional(CONF_PRUNE_FRACTION, default=DEFAULT_PRUNE_FRACTION): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=0.9)
        ),
        vol.Optional(
            CONF_DECIDE_THRESHOLD, default=DEFAULT_DECIDE_THRESHOLD
        ): _PROBABILITY,
        vol.Optional(CONF_DECIDE_MARGIN, default=DEFAULT_DECIDE_MARGIN): _PROBABILITY,
        vol.Optional(CONF_ADJACENCY_BONUS, default=DEFAULT_ADJACENCY_BONUS): vol.All(
            vol.Coerce(float), vol.Range(min=1.0)
        ),
        vol.Optional(CONF_POSE_PENALTY, default=DEFAULT_POSE_PENALTY): vol.All(
            vol.Coerce(float), vol.Range(min=1e-300, max=1.0)
        ),
        vol.Optional(CONF_DECAY, default=DEFAULT_DECAY): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False)
        ),
        vol.Optional(CONF_DUP_RADIUS, default=DEFAULT_DUP_RADIUS): vol.All(
            vol.Coerce(int), vol.Range(min=0)
        ),
        vol.Optional(
            CONF_MAX_UNDECIDED_STEPS, default=DEFAULT_MAX_UNDECIDED_STEPS
        ): _POSITIVE_INT,
    }
)

PLANNER_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_GOAL_BONUS, default=DEFAULT_GOAL_BONUS): vol.All(
            vol.Coerce(float), vol.Range(min=0.0)
        ),
        vol.Optional(CONF_PATH_WEIGHT, default=DEFAULT_PATH_WEIGHT): vol.All(
            vol.Coerce(float), vol.Range(min=0.0)
        ),
        vol.Optional(CONF_TURN_COST, default=DEFAULT_TURN_COST): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
    }
)

TASK_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_COVERAGE_TARGET, default=DEFAULT_COVERAGE_TARGET): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False)
        ),
        vol.Optional(CONF_STEP_CAP_FACTOR, default=DEFAULT_STEP_CAP_FACTOR): vol.All(
            vol.Coerce(float), vol.Range(min=1.0)
        ),
        vol.Optional(CONF_STEP_CAP): vol.Any(None, _POSITIVE_INT),
    }
)

SUITE_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_SEEDS, default=list(range(DEFAULT_SEED_COUNT))): vol.All(
            [vol.Coerce(int)], vol.Length(min=1)
        ),
        vol.Optional(CONF_WORKERS, default=DEFAULT_WORKERS): _POSITIVE_INT,
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(DOMAIN, default={}): vol.Schema(
            {
                vol.Optional(CONF_ENVIRONMENT, default={}): ENVIRONMENT_SCHEMA,
                vol.Optional(CONF_AGENT, default={}): AGENT_SCHEMA,
                vol.Optional(CONF_PLANNER, default={}): PLANNER_SCHEMA,
                vol.Optional(CONF_TASK, default={}): TASK_SCHEMA,
                vol.Optional(CONF_SUITE, default={}): SUITE_SCHEMA,
            }
        ),
        vol.Optional(CONF_LOGGER, default={}): vol.Schema(
            {
                vol.Optional(CONF_DEFAULT, default="warning"): _LOG_LEVELS,
                vol.Optional(CONF_LOGS, default={}): {str: _LOG_LEVELS},
            }
        ),
    },
    extra=vol.ALLOW_EXTRA,
)


@attr.s(slots=True, frozen=True)
class EnvironmentConfig:
    """Maze generator parameters."""

    room_rows: int = attr.ib(default=DEFAULT_ROOM_ROWS)
    room_cols: int = attr.ib(default=DEFAULT_ROOM_COLS)
    min_room: int = attr.ib(default=DEFAULT_MIN_ROOM)
    max_room: int = attr.ib(default=DEFAULT_MAX_ROOM)
    connectivity: str = attr.ib(default=DEFAULT_CONNECTIVITY)
    aisle_len: int = attr.ib(default=DEFAULT_AISLE_LEN)
    colors: tuple[str, ...] = attr.ib(default=tuple(COLOR_NAMES), converter=tuple)

    def validate(self) -> None:
        """Raise ConfigurationError when a bound is violated."""
        if self.room_rows < 1:
            raise ConfigurationError("room_rows must be at least 1", CONF_ROOM_ROWS)
        if self.room_cols < 1:
            raise ConfigurationError("room_cols must be at least 1", CONF_ROOM_COLS)
        if not MIN_ROOM_LIMIT <= self.min_room <= self.max_room <= MAX_ROOM_LIMIT:
            raise ConfigurationError(
                f"room sizes must satisfy {MIN_ROOM_LIMIT} <= min_room <= max_room"
                f" <= {MAX_ROOM_LIMIT}, got {self.min_room}..{self.max_room}",
                CONF_MIN_ROOM,
            )
        if self.connectivity not in CONNECTIVITY_MODES:
            raise ConfigurationError(
                f"unknown connectivity {self.connectivity!r}", CONF_CONNECTIVITY
            )
        if self.aisle_len < 1 or self.aisle_len % 2 != 1:
            raise ConfigurationError(
                f"aisle_len must be odd and positive, got {self.aisle_len}",
                CONF_AISLE_LEN,
            )
        if not self.colors or any(c not in COLOR_NAMES for c in self.colors):
            raise ConfigurationError(
                f"colors must be a non-empty subset of {COLOR_NAMES}", CONF_COLORS
            )


@attr.s(slots=True, frozen=True)
class AgentConfig:
    """Model layer parameters."""

    forget_horizon: int = attr.ib(default=DEFAULT_FORGET_HORIZON)
    canvas_size: int = attr.ib(default=DEFAULT_CANVAS_SIZE)
    room_change_threshold: float = attr.ib(default=DEFAULT_ROOM_CHANGE_THRESHOLD)
    min_overlap: int = attr.ib(default=DEFAULT_MIN_OVERLAP)
    match_noise: float = attr.ib(default=DEFAULT_MATCH_NOISE)
    spawn_cap: int = attr.ib(default=DEFAULT_SPAWN_CAP)
    prune_fraction: float = attr.ib(default=DEFAULT_PRUNE_FRACTION)
    decide_threshold: float = attr.ib(default=DEFAULT_DECIDE_THRESHOLD)
    decide_margin: float = attr.ib(default=DEFAULT_DECIDE_MARGIN)
    adjacency_bonus: float = attr.ib(default=DEFAULT_ADJACENCY_BONUS)
    pose_penalty: float = attr.ib(default=DEFAULT_POSE_PENALTY)
    decay: float = attr.ib(default=DEFAULT_DECAY)
    dup_radius: int = attr.ib(default=DEFAULT_DUP_RADIUS)
    max_undecided_steps: int = attr.ib(default=DEFAULT_MAX_UNDECIDED_STEPS)


@attr.s(slots=True, frozen=True)
class PlannerConfig:
    """Expected free energy constants."""

    goal_bonus: float = attr.ib(default=DEFAULT_GOAL_BONUS)
    path_weight: float = attr.ib(default=DEFAULT_PATH_WEIGHT)
    turn_cost: float = attr.ib(default=DEFAULT_TURN_COST)


@attr.s(slots=True, frozen=True)
class TaskConfig:
    """Episode termination settings."""

    coverage_target: float = attr.ib(default=DEFAULT_COVERAGE_TARGET)
    step_cap_factor: float = attr.ib(default=DEFAULT_STEP_CAP_FACTOR)
    step_cap: int | None = attr.ib(default=None)


@attr.s(slots=True, frozen=True)
class SuiteConfig:
    """Seeds and parallelism of a suite run."""

    seeds: tuple[int, ...] = attr.ib(
        default=tuple(range(DEFAULT_SEED_COUNT)), converter=tuple
    )
    workers: int = attr.ib(default=DEFAULT_WORKERS)


@attr.s(slots=True, frozen=True)
class LoggerConfig:
    """Per-logger levels."""

    default: str = attr.ib(default="warning")
    logs: dict[str, str] = attr.ib(factory=dict)


@attr.s(slots=True, frozen=True)
class Config:
    """Complete validated configuration."""

    environment: EnvironmentConfig = attr.ib(factory=EnvironmentConfig)
    agent: AgentConfig = attr.ib(factory=AgentConfig)
    planner: PlannerConfig = attr.ib(factory=PlannerConfig)
    task: TaskConfig = attr.ib(factory=TaskConfig)
    suite: SuiteConfig = attr.ib(factory=SuiteConfig)
    logger: LoggerConfig = attr.ib(factory=LoggerConfig)


def config_from_dict(raw: dict[str, Any] | None) -> Config:
    """Validate a raw mapping and build the config records."""
    try:
        data = CONFIG_SCHEMA(raw or {})
    except vol.Invalid as err:
        key = ".".join(str(part) for part in err.path) or None
        raise ConfigurationError(f"invalid configuration: {err}", key) from err

    section = data[DOMAIN]
    config = Config(
        environment=EnvironmentConfig(**section[CONF_ENVIRONMENT]),
        agent=AgentConfig(**section[CONF_AGENT]),
        planner=PlannerConfig(**section[CONF_PLANNER]),
        task=TaskConfig(**section[CONF_TASK]),
        suite=SuiteConfig(**section[CONF_SUITE]),
        logger=LoggerConfig(**data[CONF_LOGGER]),
    )
    config.environment.validate()
    return config


def load_config(path: str | Path | None) -> Config:
    """Read a YAML configuration file, or return the defaults."""
    if path is None:
        return config_from_dict(None)

    path = Path(path)
    try:
        with open(path, encoding="UTF-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as err:
        raise ConfigurationError(f"cannot read {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from err

    if raw is not None and not isinstance(raw, dict):
        raise ConfigurationError(f"{path} must contain a mapping")

    _LOGGER.debug("Loaded configuration from %s", path)
    return config_from_dict(raw)


def config_as_dict(config: Config) -> dict[str, Any]:
    """Turn a config back into the file layout."""
    return {
        DOMAIN: {
            CONF_ENVIRONMENT: attr.asdict(config.environment, retain_collection_types=False),
            CONF_AGENT: attr.asdict(config.agent),
            CONF_PLANNER: attr.asdict(config.planner),
            CONF_TASK: attr.asdict(config.task),
            CONF_SUITE: attr.asdict(config.suite, retain_collection_types=False),
        },
        CONF_LOGGER: attr.asdict(config.logger),
    }
