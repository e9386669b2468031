"""Command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import attr
import colorlog

from .config import Config, LoggerConfig, load_config
from .const import EXIT_SUCCESS, EXIT_TASK_FAILED, EXIT_USAGE, LOGGER, NAME, VERSION
from .errors import ConfigurationError, MapLoadError, MazeFormatError
from .gridworld import dump_maze, generate_maze, read_maze
from .render import render_svg
from .runner import EpisodeLog, TaskKind, TaskSpec, opened_doors, play_episode, run_suite
from .store import describe_map, load_map, save_map

_LOGGER = logging.getLogger(__name__)

_FORMAT = "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors map to the documented exit code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(config: LoggerConfig, verbose: bool = False) -> None:
    """Colored console logging with per-logger levels."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(_FORMAT, datefmt="%H:%M:%S"))
    LOGGER.handlers[:] = [handler]
    LOGGER.propagate = False
    LOGGER.setLevel(logging.DEBUG if verbose else config.default.upper())
    for name, level in config.logs.items():
        logging.getLogger(name).setLevel(level.upper())


def parse_seeds(text: str) -> list[int]:
    """Seeds given as ``3``, ``0-19`` or ``1,4,9``."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                low, high = part.rsplit("-", 1)
                seeds.extend(range(int(low), int(high) + 1))
            else:
                seeds.append(int(part))
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from err
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", type=Path, help="YAML configuration file")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with every subcommand."""
    parser = _Parser(prog="active_nav", description=f"{NAME} {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="write a maze file")
    _add_common(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out", type=Path, help="output file, stdout if omitted")

    episodes = (("explore", "run an exploration episode"), ("goal", "run a goal episode"))
    for name, help_text in episodes:
        episode = sub.add_parser(name, help=help_text)
        _add_common(episode)
        episode.add_argument("--seed", type=int, default=0)
        episode.add_argument("--step-cap", type=int, help="override the step cap")
        episode.add_argument("--log", type=Path, help="write the step log here")
        episode.add_argument("--svg", type=Path, help="render the episode here")
        episode.add_argument("--save-map", type=Path, help="save the final map here")
        if name == "goal":
            episode.add_argument("--map", type=Path, help="resume from a saved map")

    suite = sub.add_parser("suite", help="run a seeded suite")
    _add_common(suite)
    suite.add_argument("--seeds", type=parse_seeds, help="e.g. 0-19 or 1,2,3")
    suite.add_argument(
        "--tasks",
        nargs="+",
        choices=[kind.value for kind in TaskKind],
        default=[kind.value for kind in TaskKind],
    )
    suite.add_argument("--workers", type=int, help="parallel episodes")
    suite.add_argument("-o", "--out-dir", type=Path, help="CSV and log directory")

    render = sub.add_parser("render", help="render a maze or an episode")
    _add_common(render)
    source = render.add_mutually_exclusive_group()
    source.add_argument("--seed", type=int, default=0)
    source.add_argument("--maze", type=Path, help="maze file to draw without an episode")
    render.add_argument(
        "--task", choices=[kind.value for kind in TaskKind], help="run this task and draw it"
    )
    render.add_argument("-o", "--out", type=Path, required=True)

    dump = sub.add_parser("map-dump", help="describe a saved map")
    _add_common(dump)
    dump.add_argument("map", type=Path)
    return parser


def _task(config: Config, kind: TaskKind, step_cap: int | None = None) -> TaskSpec:
    if kind is TaskKind.GOAL_REACH:
        return TaskSpec.goal_reach(step_cap)
    return TaskSpec.exploration(config.task.coverage_target, step_cap)


def _episode(args: argparse.Namespace, config: Config, kind: TaskKind) -> int:
    snapshot = load_map(args.map) if getattr(args, "map", None) else None
    log, agent, world = play_episode(
        config, args.seed, _task(config, kind, args.step_cap), snapshot=snapshot
    )
    if args.log:
        args.log.write_text(log.to_jsonl(), encoding="UTF-8")
    if args.save_map:
        save_map(attr.evolve(agent.snapshot(), opened_doors=opened_doors(world)), args.save_map)
    if args.svg:
        render_svg(world, args.svg, log, _insets(agent))
    _report(log)
    return EXIT_SUCCESS if log.success else EXIT_TASK_FAILED


def _insets(agent) -> list:
    return [
        (f"node {node_id}", node.canvas) for node_id, node in sorted(agent.graph.nodes.items())
    ]


def _report(log: EpisodeLog) -> None:
    summary = log.summary()
    print(" ".join(f"{key}={value}" for key, value in summary.items()))


def _suite(args: argparse.Namespace, config: Config) -> int:
    seeds = args.seeds or list(config.suite.seeds)
    tasks = [_task(config, TaskKind(name)) for name in args.tasks]
    report = run_suite(config, seeds, tasks, workers=args.workers, out_dir=args.out_dir)
    print(report.summary.to_string(index=False))
    return EXIT_SUCCESS if bool(report.rows["success"].all()) else EXIT_TASK_FAILED


def _render(args: argparse.Namespace, config: Config) -> int:
    if args.maze:
        render_svg(read_maze(args.maze), args.out)
        return EXIT_SUCCESS
    if args.task is None:
        render_svg(generate_maze(config.environment, args.seed), args.out)
        return EXIT_SUCCESS
    log, agent, world = play_episode(config, args.seed, _task(config, TaskKind(args.task)))
    render_svg(world, args.out, log, _insets(agent))
    return EXIT_SUCCESS if log.success else EXIT_TASK_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        setup_logging(config.logger, args.verbose)
        if args.command == "gen":
            text = dump_maze(generate_maze(config.environment, args.seed))
            if args.out:
                args.out.write_text(text, encoding="UTF-8")
            else:
                sys.stdout.write(text)
            return EXIT_SUCCESS
        if args.command == "explore":
            return _episode(args, config, TaskKind.EXPLORATION)
        if args.command == "goal":
            return _episode(args, config, TaskKind.GOAL_REACH)
        if args.command == "suite":
            return _suite(args, config)
        if args.command == "render":
            return _render(args, config)
        print(describe_map(load_map(args.map)))
        return EXIT_SUCCESS
    except ConfigurationError as err:
        _LOGGER.error("Configuration error (%s): %s", err.get_key(), err)
    except (MazeFormatError, MapLoadError, OSError) as err:
        _LOGGER.error("%s", err)
    return EXIT_USAGE
