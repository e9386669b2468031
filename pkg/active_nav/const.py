"""Constants for active_nav."""
import json
from logging import Logger, getLogger
from pathlib import Path
from typing import Final

LOGGER: Logger = getLogger(__package__)

manifestfile = Path(__file__).parent / "manifest.json"
with open(file=manifestfile, encoding="UTF-8") as json_file:
    manifest_data = json.load(json_file)

DOMAIN = manifest_data.get("domain")
NAME = manifest_data.get("name")
VERSION = manifest_data.get("version")
MAP_FORMAT_VERSION: Final = manifest_data.get("map_format_version")
MAZE_FORMAT_VERSION: Final = manifest_data.get("maze_format_version")

MAP_STORAGE_KEY = f"{DOMAIN}.map"
MAZE_HEADER = "active-nav-maze"

CONF_ENVIRONMENT = "environment"
CONF_AGENT = "agent"
CONF_PLANNER = "planner"
CONF_TASK = "task"
CONF_SUITE = "suite"
CONF_LOGGER = "logger"

CONF_ROOM_ROWS = "room_rows"
CONF_ROOM_COLS = "room_cols"
CONF_MIN_ROOM = "min_room"
CONF_MAX_ROOM = "max_room"
CONF_CONNECTIVITY = "connectivity"
CONF_AISLE_LEN = "aisle_len"
CONF_COLORS = "colors"

CONF_FORGET_HORIZON = "forget_horizon"
CONF_CANVAS_SIZE = "canvas_size"
CONF_ROOM_CHANGE_THRESHOLD = "room_change_threshold"
CONF_MIN_OVERLAP = "min_overlap"
CONF_MATCH_NOISE = "match_noise"
CONF_SPAWN_CAP = "spawn_cap"
CONF_PRUNE_FRACTION = "prune_fraction"
CONF_DECIDE_THRESHOLD = "decide_threshold"
CONF_DECIDE_MARGIN = "decide_margin"
CONF_ADJACENCY_BONUS = "adjacency_bonus"
CONF_POSE_PENALTY = "pose_penalty"
CONF_DECAY = "decay"
CONF_DUP_RADIUS = "dup_radius"
CONF_MAX_UNDECIDED_STEPS = "max_undecided_steps"

CONF_GOAL_BONUS = "goal_bonus"
CONF_PATH_WEIGHT = "path_weight"
CONF_TURN_COST = "turn_cost"

CONF_COVERAGE_TARGET = "coverage_target"
CONF_STEP_CAP_FACTOR = "step_cap_factor"
CONF_STEP_CAP = "step_cap"

CONF_SEEDS = "seeds"
CONF_WORKERS = "workers"

CONF_DEFAULT = "default"
CONF_LOGS = "logs"

CONNECTIVITY_FULL = "full"
CONNECTIVITY_TREE = "tree"
CONNECTIVITY_MODES = [CONNECTIVITY_FULL, CONNECTIVITY_TREE]

COLOR_NAMES = ["red", "green", "blue", "purple"]

DEFAULT_ROOM_ROWS = 3
DEFAULT_ROOM_COLS = 3
DEFAULT_MIN_ROOM = 4
DEFAULT_MAX_ROOM = 7
DEFAULT_CONNECTIVITY = CONNECTIVITY_FULL
DEFAULT_AISLE_LEN = 3
MIN_ROOM_LIMIT = 4
MAX_ROOM_LIMIT = 8

DEFAULT_FORGET_HORIZON = 20
DEFAULT_CANVAS_SIZE = 17
DEFAULT_ROOM_CHANGE_THRESHOLD = 0.35
DEFAULT_MIN_OVERLAP = 5
DEFAULT_MATCH_NOISE = 0.02
DEFAULT_SPAWN_CAP = 600
DEFAULT_PRUNE_FRACTION = 1 / 3
DEFAULT_DECIDE_THRESHOLD = 0.9
DEFAULT_DECIDE_MARGIN = 0.5
DEFAULT_ADJACENCY_BONUS = 10.0
DEFAULT_POSE_PENALTY = 1e-6
DEFAULT_DECAY = 0.99
DEFAULT_DUP_RADIUS = 3
DEFAULT_MAX_UNDECIDED_STEPS = 12

DEFAULT_GOAL_BONUS = 1000.0
DEFAULT_PATH_WEIGHT = 0.1
DEFAULT_TURN_COST = 0.25

DEFAULT_COVERAGE_TARGET = 0.95
DEFAULT_STEP_CAP_FACTOR = 12

DEFAULT_SEED_COUNT = 20
DEFAULT_WORKERS = 1

# Exit codes of the command line
EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_TASK_FAILED = 2

SLOW_TESTS_ENV = "ACTIVE_NAV_SLOW"
