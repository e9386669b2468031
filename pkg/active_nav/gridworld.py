"""Procedural multi-room grid maze with occluded egocentric observations."""

from __future__ import annotations

import logging
from collections import deque
from enum import IntEnum
from pathlib import Path
from typing import Iterable, NamedTuple

import attr
import numpy as np

from .config import EnvironmentConfig
from .const import CONNECTIVITY_TREE, MAZE_FORMAT_VERSION, MAZE_HEADER
from .errors import MazeFormatError

_LOGGER = logging.getLogger(__name__)

VIEW_SIZE = 7
VIEW_AGENT_ROW = 6
VIEW_AGENT_COL = 3

# Observation sentinels, kept outside TileKind so kind codes stay dense.
HIDDEN = -1
UNKNOWN = -2


class TileKind(IntEnum):
    """Ground truth tile kinds."""

    WALL = 0
    RED = 1
    GREEN = 2
    BLUE = 3
    PURPLE = 4
    DOOR_CLOSED = 5
    DOOR_OPEN = 6
    GOAL = 7


NUM_KINDS = len(TileKind)

COLOR_KINDS = {
    "red": TileKind.RED,
    "green": TileKind.GREEN,
    "blue": TileKind.BLUE,
    "purple": TileKind.PURPLE,
}
KIND_COLORS = {kind: name for name, kind in COLOR_KINDS.items()}

# Lookup tables indexed by code + 2, covering UNKNOWN, HIDDEN and every kind.
_LUT_OFFSET = 2
TRANSPARENT = np.array(
    [True, False, False, True, True, True, True, False, True, True], dtype=bool
)
TRAVERSABLE = np.array(
    [True, False, False, True, True, True, True, True, True, True], dtype=bool
)
KNOWN_TRAVERSABLE = TRAVERSABLE.copy()
KNOWN_TRAVERSABLE[UNKNOWN + _LUT_OFFSET] = False


def transparent(kinds: np.ndarray) -> np.ndarray:
    """Transparency of kind codes, unknown cells counting as transparent."""
    return TRANSPARENT[np.asarray(kinds) + _LUT_OFFSET]


def traversable(kinds: np.ndarray, optimistic: bool = True) -> np.ndarray:
    """Traversability of kind codes; unknown cells pass only when optimistic."""
    table = TRAVERSABLE if optimistic else KNOWN_TRAVERSABLE
    return table[np.asarray(kinds) + _LUT_OFFSET]


def canonical(kinds: np.ndarray) -> np.ndarray:
    """Fold open doors onto closed ones for appearance comparisons."""
    kinds = np.asarray(kinds)
    return np.where(kinds == TileKind.DOOR_OPEN, TileKind.DOOR_CLOSED, kinds)


def is_door(kinds: np.ndarray) -> np.ndarray:
    """Whether kind codes are doors, open or closed."""
    return canonical(kinds) == TileKind.DOOR_CLOSED


class Heading(IntEnum):
    """Compass heading, clockwise, with N pointing to decreasing y."""

    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def vector(self) -> tuple[int, int]:
        """Unit step along the heading."""
        return _HEADING_VECTORS[self]

    @property
    def right(self) -> tuple[int, int]:
        """Unit step to the right of the heading."""
        return _HEADING_VECTORS[(self + 1) % 4]

    def turned(self, action: Action) -> Heading:
        """Heading after a turn action."""
        if action is Action.TURN_LEFT:
            return Heading((self - 1) % 4)
        if action is Action.TURN_RIGHT:
            return Heading((self + 1) % 4)
        return self

    def opposite(self) -> Heading:
        """Heading pointing the other way."""
        return Heading((self + 2) % 4)


_HEADING_VECTORS = ((0, -1), (1, 0), (0, 1), (-1, 0))


def heading_of(dx: int, dy: int) -> Heading:
    """Heading of a unit step."""
    return Heading(_HEADING_VECTORS.index((dx, dy)))


class Action(IntEnum):
    """The three motor actions, in planner tie-break order."""

    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2


@attr.s(slots=True, frozen=True)
class Pose:
    """World frame pose."""

    x: int = attr.ib()
    y: int = attr.ib()
    heading: Heading = attr.ib(converter=Heading)

    def front(self) -> tuple[int, int]:
        """Tile directly ahead."""
        dx, dy = self.heading.vector
        return self.x + dx, self.y + dy

    def turned(self, action: Action) -> Pose:
        """Pose after a turn."""
        return attr.evolve(self, heading=self.heading.turned(action))


class StepOutcome(NamedTuple):
    """Result of one environment step."""

    new_pose: Pose
    collision: bool


@attr.s(slots=True, frozen=True, eq=False)
class Observation:
    """7x7 egocentric window; row 0 is farthest ahead, the agent sits at (6, 3).

    Cells hold a TileKind code, HIDDEN, or (for predictions only) UNKNOWN.
    """

    cells: np.ndarray = attr.ib()

    @property
    def visible(self) -> np.ndarray:
        """Mask of cells carrying a known tile kind."""
        return self.cells >= 0

    @property
    def underfoot(self) -> int:
        """Kind of the tile the agent stands on."""
        return int(self.cells[VIEW_AGENT_ROW, VIEW_AGENT_COL])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return bool(np.array_equal(self.cells, other.cells))


@attr.s(slots=True, frozen=True)
class Room:
    """Room interior rectangle."""

    row: int = attr.ib()
    col: int = attr.ib()
    x: int = attr.ib()
    y: int = attr.ib()
    width: int = attr.ib()
    height: int = attr.ib()
    color: str = attr.ib()

    def contains(self, x: int, y: int) -> bool:
        """Whether a tile lies in the interior."""
        return self.x <= x < self.x + self.width and self.y <= y < self.y + self.height

    @property
    def center(self) -> tuple[int, int]:
        """Interior tile closest to the middle."""
        return self.x + (self.width - 1) // 2, self.y + (self.height - 1) // 2

    def tiles(self) -> list[tuple[int, int]]:
        """Interior tiles in row major order."""
        return [
            (x, y)
            for y in range(self.y, self.y + self.height)
            for x in range(self.x, self.x + self.width)
        ]


@attr.s(slots=True, frozen=True)
class Aisle:
    """Corridor joining two rooms, with its door in the middle."""

    rooms: tuple[int, int] = attr.ib(converter=tuple)
    cells: tuple[tuple[int, int], ...] = attr.ib(converter=tuple)

    @property
    def door(self) -> tuple[int, int]:
        """Door tile."""
        return self.cells[len(self.cells) // 2]


@attr.s(slots=True, eq=False)
class WorldGrid:
    """Ground truth maze. Only door tiles ever change after construction."""

    tiles: np.ndarray = attr.ib()
    rooms: tuple[Room, ...] = attr.ib(converter=tuple)
    aisles: tuple[Aisle, ...] = attr.ib(converter=tuple)
    goal: tuple[int, int] = attr.ib(converter=tuple)
    start: Pose = attr.ib()

    @property
    def width(self) -> int:
        """Tile count along x."""
        return int(self.tiles.shape[1])

    @property
    def height(self) -> int:
        """Tile count along y."""
        return int(self.tiles.shape[0])

    @property
    def doors(self) -> tuple[tuple[int, int], ...]:
        """Door coordinates."""
        return tuple(aisle.door for aisle in self.aisles)

    def in_bounds(self, x: int, y: int) -> bool:
        """Whether a coordinate lies on the grid."""
        return 0 <= x < self.width and 0 <= y < self.height

    def kind_at(self, x: int, y: int) -> TileKind:
        """Tile kind at a coordinate."""
        return TileKind(int(self.tiles[y, x]))

    def room_at(self, x: int, y: int) -> int | None:
        """Index of the room whose interior holds the tile."""
        for index, room in enumerate(self.rooms):
            if room.contains(x, y):
                return index
        return None

    def copy(self) -> WorldGrid:
        """Independent copy, doors included."""
        return WorldGrid(
            tiles=self.tiles.copy(),
            rooms=self.rooms,
            aisles=self.aisles,
            goal=self.goal,
            start=self.start,
        )

    def with_doors_open(self) -> WorldGrid:
        """Copy with every door open."""
        world = self.copy()
        world.tiles[world.tiles == TileKind.DOOR_CLOSED] = TileKind.DOOR_OPEN
        return world


def _room_offsets(sizes: Iterable[int], aisle_len: int) -> list[int]:
    offsets = [1]
    for size in list(sizes)[:-1]:
        offsets.append(offsets[-1] + int(size) + aisle_len)
    return offsets


def _spanning_tree(
    pairs: list[tuple[tuple[int, int], tuple[int, int]]],
    rng: np.random.Generator,
) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    parent: dict[tuple[int, int], tuple[int, int]] = {}

    def find(node: tuple[int, int]) -> tuple[int, int]:
        while parent.setdefault(node, node) != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    links = []
    for index in rng.permutation(len(pairs)):
        a, b = pairs[int(index)]
        root_a, root_b = find(a), find(b)
        if root_a != root_b:
            parent[root_a] = root_b
            links.append(pairs[int(index)])
    return sorted(links)


def generate_maze(config: EnvironmentConfig, seed: int) -> WorldGrid:
    """Generate a maze; identical (config, seed) yield identical worlds."""
    config.validate()
    rng = np.random.default_rng(seed)

    widths = rng.integers(config.min_room, config.max_room + 1, size=config.room_cols)
    heights = rng.integers(config.min_room, config.max_room + 1, size=config.room_rows)
    xs = _room_offsets(widths, config.aisle_len)
    ys = _room_offsets(heights, config.aisle_len)
    width = xs[-1] + int(widths[-1]) + 1
    height = ys[-1] + int(heights[-1]) + 1

    tiles = np.full((height, width), TileKind.WALL, dtype=np.int8)
    palette = [COLOR_KINDS[name] for name in config.colors]

    rooms: list[Room] = []
    grid_index: dict[tuple[int, int], int] = {}
    for row in range(config.room_rows):
        for col in range(config.room_cols):
            kind = palette[int(rng.integers(len(palette)))]
            room = Room(
                row=row,
                col=col,
                x=xs[col],
                y=ys[row],
                width=int(widths[col]),
                height=int(heights[row]),
                color=KIND_COLORS[kind],
            )
            tiles[room.y : room.y + room.height, room.x : room.x + room.width] = kind
            grid_index[(row, col)] = len(rooms)
            rooms.append(room)

    pairs = []
    for row in range(config.room_rows):
        for col in range(config.room_cols):
            if col + 1 < config.room_cols:
                pairs.append(((row, col), (row, col + 1)))
            if row + 1 < config.room_rows:
                pairs.append(((row, col), (row + 1, col)))
    if config.connectivity == CONNECTIVITY_TREE:
        pairs = _spanning_tree(pairs, rng)

    aisles = []
    middle = config.aisle_len // 2
    for cell_a, cell_b in pairs:
        room_a = rooms[grid_index[cell_a]]
        room_b = rooms[grid_index[cell_b]]
        if cell_a[0] == cell_b[0]:
            y = room_a.y + int(rng.integers(room_a.height))
            cells = [(room_a.x + room_a.width + k, y) for k in range(config.aisle_len)]
        else:
            x = room_a.x + int(rng.integers(room_a.width))
            cells = [(x, room_a.y + room_a.height + k) for k in range(config.aisle_len)]
        for k, (x, y) in enumerate(cells):
            if k < middle:
                tiles[y, x] = COLOR_KINDS[room_a.color]
            elif k == middle:
                tiles[y, x] = TileKind.DOOR_CLOSED
            else:
                tiles[y, x] = COLOR_KINDS[room_b.color]
        aisles.append(Aisle(rooms=(grid_index[cell_a], grid_index[cell_b]), cells=cells))

    room_tiles = [tile for room in rooms for tile in room.tiles()]
    goal = room_tiles[int(rng.integers(len(room_tiles)))]
    tiles[goal[1], goal[0]] = TileKind.GOAL

    candidates = [tile for tile in room_tiles if tile != goal]
    start_xy = candidates[int(rng.integers(len(candidates)))]
    start = Pose(start_xy[0], start_xy[1], Heading(int(rng.integers(4))))

    _LOGGER.debug(
        "Generated %dx%d maze for seed %s: %d rooms, %d aisles, goal %s",
        width,
        height,
        seed,
        len(rooms),
        len(aisles),
        goal,
    )
    return WorldGrid(tiles=tiles, rooms=rooms, aisles=aisles, goal=goal, start=start)


def step(world: WorldGrid, pose: Pose, action: Action) -> StepOutcome:
    """Apply one action; Forward into a closed door opens it and moves through."""
    if action is not Action.FORWARD:
        return StepOutcome(pose.turned(action), False)

    x, y = pose.front()
    if not world.in_bounds(x, y) or world.tiles[y, x] == TileKind.WALL:
        return StepOutcome(pose, True)
    if world.tiles[y, x] == TileKind.DOOR_CLOSED:
        world.tiles[y, x] = TileKind.DOOR_OPEN
        _LOGGER.debug("Door at (%d, %d) opened", x, y)
    return StepOutcome(attr.evolve(pose, x=x, y=y), False)


_ROWS, _COLS = np.indices((VIEW_SIZE, VIEW_SIZE))
_FORWARD_OFFSET = VIEW_AGENT_ROW - _ROWS
_LATERAL_OFFSET = _COLS - VIEW_AGENT_COL


def window_coords(x: int, y: int, heading: Heading) -> tuple[np.ndarray, np.ndarray]:
    """Frame coordinates of every window cell for a pose."""
    fx, fy = Heading(heading).vector
    rx, ry = Heading(heading).right
    xs = x + _FORWARD_OFFSET * fx + _LATERAL_OFFSET * rx
    ys = y + _FORWARD_OFFSET * fy + _LATERAL_OFFSET * ry
    return xs, ys


def _predecessors() -> tuple[tuple[int, int, tuple[tuple[int, int], ...]], ...]:
    order = [VIEW_AGENT_COL]
    for distance in range(1, VIEW_AGENT_COL + 1):
        order += [VIEW_AGENT_COL - distance, VIEW_AGENT_COL + distance]

    plan = []
    for row in range(VIEW_AGENT_ROW, -1, -1):
        for col in order:
            if row == VIEW_AGENT_ROW and col == VIEW_AGENT_COL:
                continue
            if col == VIEW_AGENT_COL:
                candidates = [(row + 1, col)]
            else:
                inward = 1 if col < VIEW_AGENT_COL else -1
                candidates = [(row + 1, col), (row + 1, col + inward), (row, col + inward)]
            plan.append(
                (row, col, tuple((r, c) for r, c in candidates if r < VIEW_SIZE))
            )
    return tuple(plan)


_VISIBILITY_PLAN = _predecessors()


def propagate_visibility(clear: np.ndarray) -> np.ndarray:
    """Visible mask of a 7x7 window given its transparency mask.

    Rows are processed from the agent row upward and columns from the centre
    outward; a cell is visible when one of its inward predecessors is both
    visible and transparent. The agent cell is always visible and transparent.
    """
    clear = np.asarray(clear, dtype=bool).tolist()
    clear[VIEW_AGENT_ROW][VIEW_AGENT_COL] = True
    visible = [[False] * VIEW_SIZE for _ in range(VIEW_SIZE)]
    visible[VIEW_AGENT_ROW][VIEW_AGENT_COL] = True
    for row, col, preds in _VISIBILITY_PLAN:
        for r, c in preds:
            if visible[r][c] and clear[r][c]:
                visible[row][col] = True
                break
    return np.array(visible, dtype=bool)


def render_window(kinds: np.ndarray) -> Observation:
    """Apply the occlusion rule to a 7x7 block of kind codes."""
    seen = propagate_visibility(transparent(kinds))
    return Observation(np.where(seen, kinds, HIDDEN).astype(np.int8))


def observe(world: WorldGrid, pose: Pose) -> Observation:
    """Egocentric observation at a pose."""
    xs, ys = window_coords(pose.x, pose.y, pose.heading)
    inside = (xs >= 0) & (xs < world.width) & (ys >= 0) & (ys < world.height)
    kinds = np.full((VIEW_SIZE, VIEW_SIZE), HIDDEN, dtype=np.int8)
    kinds[inside] = world.tiles[ys[inside], xs[inside]]
    seen = propagate_visibility(inside & transparent(kinds)) & inside
    return Observation(np.where(seen, kinds, HIDDEN).astype(np.int8))


def visible_world_coords(world: WorldGrid, pose: Pose) -> frozenset[tuple[int, int]]:
    """World coordinates of the visible cells of observe(world, pose)."""
    obs = observe(world, pose)
    xs, ys = window_coords(pose.x, pose.y, pose.heading)
    mask = obs.visible
    return frozenset(zip(xs[mask].tolist(), ys[mask].tolist()))


def reachable_tiles(world: WorldGrid, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Flood fill over traversable tiles, in breadth first order."""
    open_tiles = traversable(world.tiles)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in _HEADING_VECTORS:
            nx, ny = x + dx, y + dy
            if (nx, ny) in seen or not world.in_bounds(nx, ny):
                continue
            if not open_tiles[ny, nx]:
                continue
            seen.add((nx, ny))
            order.append((nx, ny))
            queue.append((nx, ny))
    return order


def coverable_tiles(world: WorldGrid) -> frozenset[tuple[int, int]]:
    """Tiles visible from at least one reachable pose, with every door open."""
    opened = world.with_doors_open()
    covered: set[tuple[int, int]] = set()
    for x, y in reachable_tiles(opened, (world.start.x, world.start.y)):
        for heading in Heading:
            covered |= visible_world_coords(opened, Pose(x, y, heading))
    return frozenset(covered)


_TILE_CHARS = {
    TileKind.WALL: "#",
    TileKind.RED: "r",
    TileKind.GREEN: "g",
    TileKind.BLUE: "b",
    TileKind.PURPLE: "p",
    TileKind.DOOR_CLOSED: "D",
    TileKind.DOOR_OPEN: "d",
    TileKind.GOAL: "G",
}
_CHAR_TILES = {char: kind for kind, char in _TILE_CHARS.items()}


def dump_maze(world: WorldGrid) -> str:
    """Serialize a maze to the versioned text format."""
    legend = " ".join(f"{char}={kind.name.lower()}" for kind, char in _TILE_CHARS.items())
    lines = [
        f"{MAZE_HEADER} {MAZE_FORMAT_VERSION}",
        f"legend {legend}",
        f"size {world.width} {world.height}",
        f"start {world.start.x} {world.start.y} {world.start.heading.name}",
        f"goal {world.goal[0]} {world.goal[1]}",
    ]
    for room in world.rooms:
        lines.append(
            f"room {room.row} {room.col} {room.x} {room.y}"
            f" {room.width} {room.height} {room.color}"
        )
    for aisle in world.aisles:
        cells = " ".join(f"{x},{y}" for x, y in aisle.cells)
        lines.append(f"aisle {aisle.rooms[0]} {aisle.rooms[1]} {cells}")
    lines.append("grid")
    for row in world.tiles:
        lines.append("".join(_TILE_CHARS[TileKind(int(code))] for code in row))
    return "\n".join(lines) + "\n"


def _fields(line: str, number: int, keyword: str, count: int) -> list[str]:
    parts = line.split()
    if not parts or parts[0] != keyword:
        raise MazeFormatError(f"expected '{keyword}' record", number)
    if count >= 0 and len(parts) - 1 != count:
        raise MazeFormatError(
            f"'{keyword}' record needs {count} fields, got {len(parts) - 1}", number
        )
    return parts[1:]


def _ints(values: list[str], number: int) -> list[int]:
    try:
        return [int(value) for value in values]
    except ValueError as err:
        raise MazeFormatError(f"expected integers: {err}", number) from err


def load_maze(text: str) -> WorldGrid:
    """Parse the text format written by dump_maze."""
    lines = text.splitlines()
    cursor = 0

    def next_line() -> tuple[int, str]:
        nonlocal cursor
        if cursor >= len(lines):
            raise MazeFormatError("unexpected end of file", cursor + 1)
        cursor += 1
        return cursor, lines[cursor - 1]

    number, line = next_line()
    header = line.split()
    if len(header) != 2 or header[0] != MAZE_HEADER:
        raise MazeFormatError("missing maze header", number)
    if _ints(header[1:], number)[0] > MAZE_FORMAT_VERSION:
        raise MazeFormatError(f"unsupported maze version {header[1]}", number)

    number, line = next_line()
    _fields(line, number, "legend", -1)
    number, line = next_line()
    width, height = _ints(_fields(line, number, "size", 2), number)
    number, line = next_line()
    start_fields = _fields(line, number, "start", 3)
    try:
        heading = Heading[start_fields[2]]
    except KeyError as err:
        raise MazeFormatError(f"unknown heading {start_fields[2]!r}", number) from err
    start = Pose(*_ints(start_fields[:2], number), heading)
    number, line = next_line()
    goal = tuple(_ints(_fields(line, number, "goal", 2), number))

    rooms = []
    aisles = []
    while True:
        number, line = next_line()
        keyword = line.split()[0] if line.split() else ""
        if keyword == "grid":
            break
        if keyword == "room":
            fields = _fields(line, number, "room", 7)
            row, col, x, y, w, h = _ints(fields[:6], number)
            rooms.append(Room(row, col, x, y, w, h, fields[6]))
        elif keyword == "aisle":
            fields = _fields(line, number, "aisle", -1)
            ends = _ints(fields[:2], number)
            try:
                cells = [tuple(int(v) for v in cell.split(",")) for cell in fields[2:]]
            except ValueError as err:
                raise MazeFormatError(f"bad aisle cell: {err}", number) from err
            aisles.append(Aisle(rooms=ends, cells=cells))
        else:
            raise MazeFormatError(f"unexpected record {keyword!r}", number)

    tiles = np.zeros((height, width), dtype=np.int8)
    for y in range(height):
        number, line = next_line()
        if len(line) != width:
            raise MazeFormatError(f"grid row must be {width} wide", number)
        for x, char in enumerate(line):
            if char not in _CHAR_TILES:
                raise MazeFormatError(f"unknown tile {char!r}", number)
            tiles[y, x] = _CHAR_TILES[char]

    return WorldGrid(tiles=tiles, rooms=rooms, aisles=aisles, goal=goal, start=start)


def save_maze(world: WorldGrid, path: str | Path) -> None:
    """Write a maze file."""
    Path(path).write_text(dump_maze(world), encoding="UTF-8")


def read_maze(path: str | Path) -> WorldGrid:
    """Read a maze file."""
    return load_maze(Path(path).read_text(encoding="UTF-8"))
