"""SVG renders of mazes, trajectories and place canvases."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.gridspec as gridspec  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import BoundaryNorm, ListedColormap  # noqa: E402

from .allocentric import PlaceCanvas  # noqa: E402
from .const import DOMAIN  # noqa: E402
from .gridworld import WorldGrid  # noqa: E402
from .runner import EpisodeLog  # noqa: E402

_LOGGER = logging.getLogger(__name__)

# Indexed by kind code + 2: UNKNOWN, HIDDEN, then every TileKind
_PALETTE = [
    "#d9d9d9",
    "#000000",
    "#3b3b3b",
    "#d62728",
    "#2ca02c",
    "#1f77b4",
    "#9467bd",
    "#8c564b",
    "#e3c9a8",
    "#ffffff",
]
_CMAP = ListedColormap(_PALETTE)
_NORM = BoundaryNorm(np.arange(-0.5, len(_PALETTE)), len(_PALETTE))
_RC = {"svg.hashsalt": DOMAIN, "svg.fonttype": "path"}


def _draw_tiles(ax, kinds: np.ndarray, extent=None) -> None:
    ax.imshow(
        np.asarray(kinds, dtype=int) + 2,
        cmap=_CMAP,
        norm=_NORM,
        interpolation="nearest",
        extent=extent,
    )
    ax.set_xticks([])
    ax.set_yticks([])


def _draw_trajectory(ax, log: EpisodeLog) -> None:
    xs = [log.start.x] + [record.x for record in log.records]
    ys = [log.start.y] + [record.y for record in log.records]
    ax.plot(xs, ys, color="#ff7f0e", linewidth=1.2)
    ax.plot(xs[0], ys[0], marker="o", color="#ff7f0e", markersize=4)
    ax.plot(xs[-1], ys[-1], marker="s", color="#ff7f0e", markersize=4)


def render_svg(
    world: WorldGrid,
    path: str | Path,
    log: EpisodeLog | None = None,
    canvases: Sequence[tuple[str, PlaceCanvas]] = (),
) -> Path:
    """Write the maze, an optional trajectory and per-place MAP insets."""
    path = Path(path)
    with plt.rc_context(_RC):
        rows = 2 if canvases else 1
        fig = plt.figure(figsize=(6, 6 + 2 * (rows - 1)))
        grid = gridspec.GridSpec(
            rows, max(1, len(canvases)), figure=fig, height_ratios=[3, 1][:rows]
        )
        ax = fig.add_subplot(grid[0, :])
        _draw_tiles(ax, world.tiles)
        if log is not None and log.records:
            _draw_trajectory(ax, log)
            ax.set_title(f"seed {log.seed} {log.task.value}", fontsize=9)

        for column, (label, canvas) in enumerate(canvases):
            inset = fig.add_subplot(grid[1, column])
            size = canvas.size
            ox, oy = canvas.offset
            _draw_tiles(
                inset,
                canvas.map_kinds,
                extent=(-ox - 0.5, size - ox - 0.5, size - oy - 0.5, -oy - 0.5),
            )
            inset.set_title(label, fontsize=7)

        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    _LOGGER.debug("Rendered %s", path)
    return path
