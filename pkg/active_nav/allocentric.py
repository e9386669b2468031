"""Place layer: per-room evidence canvases and multi-hypothesis localization.

A place frame is a translation of the global frame that puts the pose at which
the place was entered at (0, 0). Canvases store per-kind evidence counts on a
square array; ``offset`` maps place coordinates to array indices.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

import attr
import numpy as np

from .config import AgentConfig
from .const import DEFAULT_CANVAS_SIZE, DEFAULT_MIN_OVERLAP
from .errors import CanvasOverflowError, InternalConsistencyError, OutOfFrameError
from .gridworld import (
    NUM_KINDS,
    UNKNOWN,
    VIEW_AGENT_COL,
    VIEW_AGENT_ROW,
    Heading,
    Observation,
    TileKind,
    canonical,
    render_window,
    traversable,
    window_coords,
)

_LOGGER = logging.getLogger(__name__)

_SEED_DEPTH = 5
_SEED_LIMIT = 200
_STAMP_SCALE = 1 << 32


@attr.s(slots=True, frozen=True)
class PlacePose:
    """Pose in a place frame."""

    x: int = attr.ib()
    y: int = attr.ib()
    heading: Heading = attr.ib(converter=Heading)

    @property
    def cell(self) -> tuple[int, int]:
        """Position without heading."""
        return self.x, self.y


def rotate_xy(x, y, rotation: int):
    """Rotate coordinates clockwise by quarter turns; works on arrays too."""
    rotation %= 4
    if rotation == 0:
        return x, y
    if rotation == 1:
        return -y, x
    if rotation == 2:
        return -x, -y
    return y, -x


@attr.s(slots=True, frozen=True)
class Transform:
    """Rigid map between place frames: rotate clockwise, then translate."""

    rotation: int = attr.ib(converter=lambda value: int(value) % 4)
    dx: int = attr.ib(converter=int)
    dy: int = attr.ib(converter=int)

    def apply_xy(self, x, y):
        """Transform coordinates."""
        rx, ry = rotate_xy(x, y, self.rotation)
        return rx + self.dx, ry + self.dy

    def apply(self, pose: PlacePose) -> PlacePose:
        """Transform a pose."""
        x, y = self.apply_xy(pose.x, pose.y)
        return PlacePose(int(x), int(y), (pose.heading + self.rotation) % 4)

    def inverse(self) -> Transform:
        """Transform undoing this one."""
        back = (4 - self.rotation) % 4
        dx, dy = rotate_xy(-self.dx, -self.dy, back)
        return Transform(back, dx, dy)

    def compose(self, other: Transform) -> Transform:
        """Apply ``other`` first, then this transform."""
        dx, dy = self.apply_xy(other.dx, other.dy)
        return Transform(self.rotation + other.rotation, dx, dy)


IDENTITY = Transform(0, 0, 0)

_UNSET = object()


@attr.s(slots=True, eq=False)
class PlaceCanvas:
    """Evidence counts of one place."""

    counts: np.ndarray = attr.ib()
    stamps: np.ndarray = attr.ib()
    offset: tuple[int, int] = attr.ib(converter=tuple)
    origin: PlacePose = attr.ib()
    observation_count: int = attr.ib(default=0)
    _map: np.ndarray | None = attr.ib(default=None, init=False, repr=False)
    _bounds: object = attr.ib(default=_UNSET, init=False, repr=False)

    @property
    def size(self) -> int:
        """Side of the square array."""
        return int(self.counts.shape[0])

    @property
    def map_kinds(self) -> np.ndarray:
        """MAP kind per array cell, UNKNOWN where no evidence exists."""
        if self._map is None:
            totals = self.counts.sum(axis=-1)
            score = self.counts.astype(np.int64) * _STAMP_SCALE + self.stamps
            best = score.argmax(axis=-1)
            kinds = np.where(totals > 0, best, UNKNOWN).astype(np.int8)
            kinds.setflags(write=False)
            self._map = kinds
        return self._map

    def index_of(self, x, y):
        """Array indices (column, row) of place coordinates."""
        return x + self.offset[0], y + self.offset[1]

    def contains(self, x: int, y: int) -> bool:
        """Whether place coordinates fall on the array."""
        ix, iy = self.index_of(x, y)
        return 0 <= ix < self.size and 0 <= iy < self.size

    def kind_at(self, x: int, y: int) -> int:
        """MAP kind at place coordinates."""
        if not self.contains(x, y):
            return UNKNOWN
        ix, iy = self.index_of(x, y)
        return int(self.map_kinds[iy, ix])

    def lookup(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """MAP kinds at arrays of place coordinates, UNKNOWN off the array."""
        ix, iy = self.index_of(np.asarray(xs), np.asarray(ys))
        inside = (ix >= 0) & (ix < self.size) & (iy >= 0) & (iy < self.size)
        out = np.full(ix.shape, UNKNOWN, dtype=np.int8)
        out[inside] = self.map_kinds[iy[inside], ix[inside]]
        return out

    def known_cells(self) -> list[tuple[int, int]]:
        """Place coordinates carrying evidence, row major."""
        rows, cols = np.nonzero(self.map_kinds != UNKNOWN)
        return [
            (int(c) - self.offset[0], int(r) - self.offset[1]) for r, c in zip(rows, cols)
        ]

    def evidence_box(self) -> tuple[int, int, int, int] | None:
        """Bounding box (x0, y0, x1, y1) of evidence in place coordinates."""
        rows, cols = np.nonzero(self.counts.sum(axis=-1) > 0)
        if rows.size == 0:
            return None
        return (
            int(cols.min()) - self.offset[0],
            int(rows.min()) - self.offset[1],
            int(cols.max()) - self.offset[0],
            int(rows.max()) - self.offset[1],
        )


class MismatchScore(NamedTuple):
    """Disagreement between an observation and a canvas."""

    value: float
    compared_cells: int
    defined: bool


def place_new(size: int = DEFAULT_CANVAS_SIZE, heading: Heading = Heading.N) -> PlaceCanvas:
    """Empty canvas whose origin is the entry pose."""
    shape = (size, size, NUM_KINDS)
    return PlaceCanvas(
        counts=np.zeros(shape, dtype=np.int32),
        stamps=np.zeros(shape, dtype=np.int32),
        offset=(size // 2, size // 2),
        origin=PlacePose(0, 0, heading),
    )


def _visible_cells(pose: PlacePose, obs: Observation):
    xs, ys = window_coords(pose.x, pose.y, pose.heading)
    seen = obs.visible
    return xs[seen], ys[seen], obs.cells[seen].astype(np.int64)


def place_fuse(
    canvas: PlaceCanvas, pose: PlacePose, obs: Observation, clip: bool = False
) -> PlaceCanvas:
    """Add one observation's visible cells to the evidence counts."""
    xs, ys, kinds = _visible_cells(pose, obs)
    ix, iy = canvas.index_of(xs, ys)
    inside = (ix >= 0) & (ix < canvas.size) & (iy >= 0) & (iy < canvas.size)
    outside = int((~inside).sum())
    if outside:
        if not clip:
            raise CanvasOverflowError(outside)
        _LOGGER.warning("Dropped %d observed cells outside the place canvas", outside)

    counts = canvas.counts.copy()
    stamps = canvas.stamps.copy()
    stamp = canvas.observation_count + 1
    counts[iy[inside], ix[inside], kinds[inside]] += 1
    stamps[iy[inside], ix[inside], kinds[inside]] = stamp
    return PlaceCanvas(counts, stamps, canvas.offset, canvas.origin, stamp)


def _recentred(canvas: PlaceCanvas, xs: Sequence[int], ys: Sequence[int]) -> PlaceCanvas:
    """Shift the array so evidence plus the given cells sit in the middle."""
    box = canvas.evidence_box()
    all_x = list(xs) + ([box[0], box[2]] if box else [])
    all_y = list(ys) + ([box[1], box[3]] if box else [])
    span = max(max(all_x) - min(all_x), max(all_y) - min(all_y)) + 1
    if span > canvas.size:
        raise CanvasOverflowError(span - canvas.size)

    ox = (canvas.size - (max(all_x) - min(all_x) + 1)) // 2 - min(all_x)
    oy = (canvas.size - (max(all_y) - min(all_y) + 1)) // 2 - min(all_y)
    counts = np.zeros_like(canvas.counts)
    stamps = np.zeros_like(canvas.stamps)
    rows, cols = np.nonzero(canvas.counts.sum(axis=-1) > 0)
    new_rows = rows - canvas.offset[1] + oy
    new_cols = cols - canvas.offset[0] + ox
    counts[new_rows, new_cols] = canvas.counts[rows, cols]
    stamps[new_rows, new_cols] = canvas.stamps[rows, cols]
    _LOGGER.debug("Re-anchored canvas offset %s -> %s", canvas.offset, (ox, oy))
    return PlaceCanvas(counts, stamps, (ox, oy), canvas.origin, canvas.observation_count)


def place_reanchor(
    canvas: PlaceCanvas, pose: PlacePose, obs: Observation | None = None
) -> PlaceCanvas:
    """Recentre the array around the evidence and a new footprint.

    Falls back to keeping only the pose cell in frame when the full footprint
    does not fit; raises CanvasOverflowError when even that fails.
    """
    if obs is not None:
        xs, ys, _ = _visible_cells(pose, obs)
        try:
            return _recentred(canvas, xs.tolist(), ys.tolist())
        except CanvasOverflowError:
            pass
    return _recentred(canvas, [pose.x], [pose.y])


def place_query(canvas: PlaceCanvas, pose: PlacePose) -> Observation:
    """Render the window the canvas predicts at a pose."""
    if not canvas.contains(pose.x, pose.y):
        raise OutOfFrameError(f"pose {pose} lies outside the place canvas")
    xs, ys = window_coords(pose.x, pose.y, pose.heading)
    return render_window(canvas.lookup(xs, ys))


def place_mismatch(
    canvas: PlaceCanvas,
    pose: PlacePose,
    obs: Observation,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> MismatchScore:
    """Fraction of observed cells that contradict the canvas evidence."""
    xs, ys, kinds = _visible_cells(pose, obs)
    predicted = canvas.lookup(xs, ys)
    compared = predicted != UNKNOWN
    count = int(compared.sum())
    if count == 0:
        return MismatchScore(0.0, 0, False)
    disagree = int((canonical(predicted[compared]) != canonical(kinds[compared])).sum())
    return MismatchScore(disagree / count, count, count >= min_overlap)


def place_complete(canvas: PlaceCanvas) -> np.ndarray:
    """MAP room map, indexed [y + offset_y, x + offset_x]."""
    return canvas.map_kinds.copy()


def place_merge(target: PlaceCanvas, source: PlaceCanvas, transform: Transform) -> PlaceCanvas:
    """Fold source evidence into target; transform maps source to target frame."""
    rows, cols = np.nonzero(source.counts.sum(axis=-1) > 0)
    if rows.size == 0:
        return target
    sx = cols - source.offset[0]
    sy = rows - source.offset[1]
    tx, ty = transform.apply_xy(sx, sy)

    ix, iy = target.index_of(tx, ty)
    inside = (ix >= 0) & (ix < target.size) & (iy >= 0) & (iy < target.size)
    if not inside.all():
        try:
            target = _recentred(target, tx.tolist(), ty.tolist())
        except CanvasOverflowError:
            _LOGGER.warning("Merged evidence does not fit the canvas, clipping")
        ix, iy = target.index_of(tx, ty)
        inside = (ix >= 0) & (ix < target.size) & (iy >= 0) & (iy < target.size)

    counts = target.counts.copy()
    stamps = target.stamps.copy()
    src_counts = source.counts[rows[inside], cols[inside]]
    src_stamps = np.where(
        src_counts > 0, source.stamps[rows[inside], cols[inside]] + target.observation_count, 0
    )
    counts[iy[inside], ix[inside]] += src_counts
    stamps[iy[inside], ix[inside]] = np.maximum(stamps[iy[inside], ix[inside]], src_stamps)
    return PlaceCanvas(
        counts,
        stamps,
        target.offset,
        target.origin,
        target.observation_count + source.observation_count,
    )


@attr.s(slots=True, frozen=True)
class RoomBounds:
    """Wall rectangle (inclusive) of a room and the openings on it."""

    x0: int = attr.ib()
    y0: int = attr.ib()
    x1: int = attr.ib()
    y1: int = attr.ib()
    doorways: tuple[tuple[int, int], ...] = attr.ib(converter=tuple)

    def contains(self, x: int, y: int) -> bool:
        """Whether a cell lies on or inside the wall rectangle."""
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def outward(self, doorway: tuple[int, int]) -> Heading:
        """Heading that leaves the room through a doorway."""
        x, y = doorway
        if x == self.x0:
            return Heading.W
        if x == self.x1:
            return Heading.E
        if y == self.y0:
            return Heading.N
        return Heading.S

    def exit_tile(self, doorway: tuple[int, int]) -> tuple[int, int]:
        """First tile outside the rectangle beyond a doorway."""
        dx, dy = self.outward(doorway).vector
        return doorway[0] + dx, doorway[1] + dy

    def exits(self) -> dict[tuple[int, int], tuple[int, int]]:
        """Exit tile per doorway."""
        return {door: self.exit_tile(door) for door in self.doorways}

    def admits(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Whether an agent may stand on cells: inside the rectangle or on an exit tile."""
        xs, ys = np.asarray(xs), np.asarray(ys)
        inside = (self.x0 <= xs) & (xs <= self.x1) & (self.y0 <= ys) & (ys <= self.y1)
        for x, y in self.exits().values():
            inside = inside | ((xs == x) & (ys == y))
        return inside


def _cast(canvas: PlaceCanvas, x: int, y: int, dx: int, dy: int) -> int | None:
    """Walk from a cell to the first known wall; None if unknown comes first."""
    while True:
        x += dx
        y += dy
        kind = canvas.kind_at(x, y)
        if kind == TileKind.WALL:
            return x if dx else y
        if kind == UNKNOWN:
            return None


def _check_rectangle(canvas: PlaceCanvas, x0: int, y0: int, x1: int, y1: int) -> RoomBounds | None:
    if x1 - x0 - 1 < 2 or y1 - y0 - 1 < 2:
        return None
    border = [(x, y0) for x in range(x0 + 1, x1)]
    border += [(x1, y) for y in range(y0 + 1, y1)]
    border += [(x, y1) for x in range(x1 - 1, x0, -1)]
    border += [(x0, y) for y in range(y1 - 1, y0, -1)]
    doorways = []
    for x, y in border:
        kind = canvas.kind_at(x, y)
        if kind == UNKNOWN:
            return None
        if kind != TileKind.WALL:
            doorways.append((x, y))
    xs, ys = np.meshgrid(np.arange(x0 + 1, x1), np.arange(y0 + 1, y1))
    if (canvas.lookup(xs, ys) == TileKind.WALL).any():
        return None
    return RoomBounds(x0, y0, x1, y1, sorted(doorways, key=lambda d: (d[1], d[0])))


def _bound_seeds(canvas: PlaceCanvas) -> Iterable[tuple[int, int]]:
    origin = canvas.origin
    dx, dy = origin.heading.vector
    for k in range(_SEED_DEPTH):
        yield origin.x + k * dx, origin.y + k * dy

    start = (origin.x, origin.y)
    seen = {start}
    queue = deque([start])
    while queue and len(seen) < _SEED_LIMIT:
        x, y = queue.popleft()
        yield x, y
        for vx, vy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            cell = (x + vx, y + vy)
            if cell in seen:
                continue
            if traversable(canvas.kind_at(*cell), optimistic=False):
                seen.add(cell)
                queue.append(cell)


def room_bounds(canvas: PlaceCanvas) -> RoomBounds | None:
    """Wall rectangle enclosing the entry pose, or None while walls are unseen."""
    if canvas._bounds is not _UNSET:
        return canvas._bounds

    result = None
    origin = canvas.origin
    tried = set()
    for x, y in _bound_seeds(canvas):
        if (x, y) in tried:
            continue
        tried.add((x, y))
        if not traversable(canvas.kind_at(x, y), optimistic=False):
            continue
        edges = (
            _cast(canvas, x, y, -1, 0),
            _cast(canvas, x, y, 0, -1),
            _cast(canvas, x, y, 1, 0),
            _cast(canvas, x, y, 0, 1),
        )
        if None in edges:
            continue
        x0, y0, x1, y1 = edges
        if not (x0 - 1 <= origin.x <= x1 + 1 and y0 - 1 <= origin.y <= y1 + 1):
            continue
        result = _check_rectangle(canvas, x0, y0, x1, y1)
        if result is not None:
            break

    canvas._bounds = result
    return result


@attr.s(slots=True, frozen=True)
class Hypothesis:
    """Candidate identity of the current place."""

    node_id: int | None = attr.ib()
    transform: Transform = attr.ib()
    log_weight: float = attr.ib()

    @property
    def is_new_place(self) -> bool:
        """Whether this is the novelty hypothesis."""
        return self.node_id is None


@attr.s(slots=True, frozen=True)
class HypothesisSet:
    """Hypotheses with log weights normalized to sum to one."""

    hypotheses: tuple[Hypothesis, ...] = attr.ib(converter=tuple)
    step_count: int = attr.ib(default=0)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def weights(self) -> np.ndarray:
        """Normalized weights in set order."""
        return np.exp(np.array([h.log_weight for h in self.hypotheses], dtype=float))

    def best(self) -> Hypothesis:
        """Highest weight hypothesis, earliest on ties."""
        return max(self.hypotheses, key=lambda h: h.log_weight)

    def targets(self) -> set[int | None]:
        """Distinct target places."""
        return {h.node_id for h in self.hypotheses}


class Outcome(Enum):
    """Localization verdict."""

    LOCALIZED = "localized"
    NEW_PLACE = "new_place"
    UNDECIDED = "undecided"


class Decision(NamedTuple):
    """Result of hypo_decide."""

    outcome: Outcome
    node_id: int | None = None
    transform: Transform | None = None


@attr.s(slots=True, frozen=True)
class SpawnContext:
    """What the rest of the agent knows when a place reset happens.

    ``expected_poses`` holds the agent pose in each known place frame as path
    integration puts it.
    """

    pose: PlacePose = attr.ib(factory=lambda: PlacePose(0, 0, Heading.N))
    previous: int | None = attr.ib(default=None)
    exit_door: tuple[int, int] | None = attr.ib(default=None)
    expected: int | None = attr.ib(default=None)
    expected_poses: Mapping[int, PlacePose] = attr.ib(factory=dict)


def _normalized(log_weights: np.ndarray) -> np.ndarray:
    top = log_weights.max()
    return log_weights - (top + math.log(np.exp(log_weights - top).sum()))


class _Likelihood:
    """Per-cell log likelihoods of the agreement model."""

    def __init__(self, match_noise: float) -> None:
        self.match = math.log(1.0 - match_noise)
        self.miss = math.log(match_noise)
        self.blank = math.log(1.0 / NUM_KINDS)

    def score(
        self,
        canvas: PlaceCanvas,
        qx: np.ndarray,
        qy: np.ndarray,
        kinds: np.ndarray,
        tx: np.ndarray,
        ty: np.ndarray,
        agent: tuple[int, int, int],
        bounds: RoomBounds | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Log likelihood, wall contradictions and compared cells per translation.

        ``agent`` is the rotated agent cell and the kind observed under it; a
        known canvas tile disagreeing there rules the alignment out, and so
        does an agent cell outside the room ``bounds``.
        """
        xs = qx[None, :] + np.asarray(tx)[:, None]
        ys = qy[None, :] + np.asarray(ty)[:, None]
        predicted = canvas.lookup(xs, ys)
        known = predicted != UNKNOWN
        agree = canonical(predicted) == canonical(kinds)[None, :]
        loglik = np.where(known, np.where(agree, self.match, self.miss), self.blank).sum(axis=1)
        wall_mismatch = (predicted == TileKind.WALL) != (kinds == TileKind.WALL)[None, :]
        contradictions = (known & wall_mismatch).sum(axis=1)
        ax, ay, own = agent
        if own >= 0:
            under = canvas.lookup(ax + np.asarray(tx), ay + np.asarray(ty))
            clash = (under != UNKNOWN) & (canonical(under) != canonical(own))
            loglik = loglik + np.where(clash, len(kinds) * self.miss, 0.0)
            contradictions = contradictions + clash
        if bounds is not None:
            outside = ~bounds.admits(ax + np.asarray(tx), ay + np.asarray(ty))
            loglik = loglik + np.where(outside, len(kinds) * self.miss, 0.0)
            contradictions = contradictions + outside
        return loglik, contradictions, known.sum(axis=1)


def _door_entries(bounds: RoomBounds | None) -> list[tuple[tuple[int, int], Heading]]:
    if bounds is None:
        return []
    return [
        (bounds.exit_tile(door), bounds.outward(door).opposite()) for door in bounds.doorways
    ]


def _sweep_cells(canvas: PlaceCanvas, bounds: RoomBounds | None) -> np.ndarray:
    cells = [
        (x, y)
        for x, y in canvas.known_cells()
        if traversable(canvas.kind_at(x, y), optimistic=False)
        and (bounds is None or bounds.contains(x, y))
    ]
    return np.array(cells, dtype=np.int64).reshape(-1, 2)


def _odometry_seed(
    canvas: PlaceCanvas,
    bounds: RoomBounds | None,
    expected: PlacePose | None,
    predicted: bool,
) -> np.ndarray:
    """The cell path integration puts the agent on, if the place could hold it."""
    empty = np.zeros((0, 2), dtype=np.int64)
    if expected is None:
        return empty
    kind = canvas.kind_at(expected.x, expected.y)
    if kind == TileKind.WALL:
        return empty
    if bounds is not None and not bounds.admits(expected.x, expected.y):
        return empty
    if not predicted and not traversable(kind, optimistic=False):
        return empty
    return np.array([[expected.x, expected.y]], dtype=np.int64)


def hypo_spawn(
    known: Sequence[tuple[int, PlaceCanvas]],
    first_obs: Observation,
    context: SpawnContext,
    config: AgentConfig,
) -> HypothesisSet:
    """Hypotheses for the place just entered.

    Candidates are the entries through known doorways, the known floor of
    each place, and the cell path integration predicts. When a pose is
    expected for a place, candidates farther than ``dup_radius`` from it or
    facing another way are not spawned, and the rest pay ``pose_penalty`` per
    tile of disagreement.
    """
    likelihood = _Likelihood(config.match_noise)
    px, py, kinds = _visible_cells(context.pose, first_obs)
    own = int(first_obs.cells[VIEW_AGENT_ROW, VIEW_AGENT_COL])
    novelty = len(kinds) * likelihood.blank

    scored: dict[tuple[int, int, int, int], float] = {}
    for node_id, canvas in known:
        bounds = room_bounds(canvas)
        doors = _door_entries(bounds)
        sweep = _sweep_cells(canvas, bounds)
        expected = context.expected_poses.get(node_id)
        seed = _odometry_seed(canvas, bounds, expected, node_id == context.expected)

        for rotation in range(4):
            qx, qy = rotate_xy(px, py, rotation)
            ax, ay = rotate_xy(context.pose.x, context.pose.y, rotation)
            heading = Heading((context.pose.heading + rotation) % 4)
            if expected is not None and heading != expected.heading:
                continue

            door_cells = np.array(
                [cell for cell, inward in doors if inward == heading], dtype=np.int64
            ).reshape(-1, 2)
            for cells, filtered in ((door_cells, False), (sweep, True), (seed, False)):
                if not len(cells):
                    continue
                loglik, contradictions, compared = likelihood.score(
                    canvas,
                    qx,
                    qy,
                    kinds,
                    cells[:, 0] - ax,
                    cells[:, 1] - ay,
                    (ax, ay, own),
                    bounds,
                )
                for index, (cx, cy) in enumerate(cells.tolist()):
                    if filtered and 2 * contradictions[index] > compared[index]:
                        continue
                    value = float(loglik[index])
                    if node_id == context.expected:
                        value += math.log(config.adjacency_bonus)
                    if expected is not None:
                        distance = abs(cx - expected.x) + abs(cy - expected.y)
                        if distance > config.dup_radius:
                            continue
                        value += distance * math.log(config.pose_penalty)
                    scored[(node_id, rotation, cx - ax, cy - ay)] = value

    ranked = sorted(scored.items(), key=lambda item: (-item[1], item[0]))
    ranked = ranked[: config.spawn_cap - 1]
    hypotheses = [
        Hypothesis(node_id, Transform(rotation, dx, dy), value)
        for (node_id, rotation, dx, dy), value in ranked
    ]
    hypotheses.append(Hypothesis(None, IDENTITY, novelty))

    log_weights = _normalized(np.array([h.log_weight for h in hypotheses]))
    result = HypothesisSet(
        [attr.evolve(h, log_weight=float(w)) for h, w in zip(hypotheses, log_weights)]
    )
    _LOGGER.debug(
        "Spawned %d hypotheses over %d known places (expected %s)",
        len(result),
        len(known),
        context.expected,
    )
    return result


def hypo_update(
    hset: HypothesisSet,
    pose: PlacePose,
    obs: Observation,
    known: Mapping[int, PlaceCanvas],
    config: AgentConfig,
) -> HypothesisSet:
    """Reweight every hypothesis by the new observation, then prune."""
    likelihood = _Likelihood(config.match_noise)
    px, py, kinds = _visible_cells(pose, obs)
    own = int(obs.cells[VIEW_AGENT_ROW, VIEW_AGENT_COL])
    log_weights = np.array([h.log_weight for h in hset.hypotheses], dtype=float)

    groups: dict[tuple[int, int], list[int]] = {}
    for index, hypothesis in enumerate(hset.hypotheses):
        if hypothesis.is_new_place:
            log_weights[index] += len(kinds) * likelihood.blank
        else:
            key = (hypothesis.node_id, hypothesis.transform.rotation)
            groups.setdefault(key, []).append(index)

    for (node_id, rotation), members in groups.items():
        if node_id not in known:
            raise InternalConsistencyError(f"hypothesis refers to unknown node {node_id}")
        qx, qy = rotate_xy(px, py, rotation)
        ax, ay = rotate_xy(pose.x, pose.y, rotation)
        tx = np.array([hset.hypotheses[i].transform.dx for i in members])
        ty = np.array([hset.hypotheses[i].transform.dy for i in members])
        canvas = known[node_id]
        loglik, _, _ = likelihood.score(
            canvas, qx, qy, kinds, tx, ty, (ax, ay, own), room_bounds(canvas)
        )
        log_weights[members] += loglik

    protected = set()
    best_per_target: dict[int | None, int] = {}
    for index, hypothesis in enumerate(hset.hypotheses):
        current = best_per_target.get(hypothesis.node_id)
        if current is None or log_weights[index] > log_weights[current]:
            best_per_target[hypothesis.node_id] = index
    protected.update(best_per_target.values())

    removable = sorted(
        (i for i in range(len(hset)) if i not in protected),
        key=lambda i: (log_weights[i], i),
    )
    doomed = set(removable[: int(len(hset) * config.prune_fraction)])
    keep = [i for i in range(len(hset)) if i not in doomed]

    normalized = _normalized(log_weights[keep])
    return HypothesisSet(
        [
            attr.evolve(hset.hypotheses[i], log_weight=float(w))
            for i, w in zip(keep, normalized)
        ],
        hset.step_count + 1,
    )


def _decision(hypothesis: Hypothesis) -> Decision:
    if hypothesis.is_new_place:
        return Decision(Outcome.NEW_PLACE)
    return Decision(Outcome.LOCALIZED, hypothesis.node_id, hypothesis.transform)


def hypo_decide(
    hset: HypothesisSet,
    threshold: float,
    margin: float,
) -> Decision:
    """Commit when the leading hypothesis is both strong and clearly ahead.

    Novelty is never decided before the first update while a known place is
    still a candidate.
    """
    if not len(hset):
        return Decision(Outcome.UNDECIDED)
    best = hset.best()
    if best.is_new_place and hset.step_count == 0 and len(hset.targets()) > 1:
        return Decision(Outcome.UNDECIDED)
    weights = np.sort(hset.weights())[::-1]
    runner_up = weights[1] if len(weights) > 1 else 0.0
    if weights[0] > threshold and weights[0] - runner_up >= margin:
        return _decision(best)
    return Decision(Outcome.UNDECIDED)


def hypo_force(hset: HypothesisSet) -> Decision:
    """Commit to the leading hypothesis regardless of confidence."""
    return _decision(hset.best())
