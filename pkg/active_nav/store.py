"""Persistent storage of cognitive maps."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .agent import AgentSnapshot
from .allocentric import PlaceCanvas, PlacePose, Transform
from .cogmap import CognitiveGraph, Edge, ExperienceNode, GlobalPose
from .const import MAP_FORMAT_VERSION, MAP_STORAGE_KEY
from .errors import MapLoadError
from .gridworld import NUM_KINDS, Heading

_LOGGER = logging.getLogger(__name__)

STORAGE_VERSION_MAJOR = MAP_FORMAT_VERSION
# Minor versions only add optional fields, which the schemas default.
STORAGE_VERSION_MINOR = 0

_HEADING = vol.In([h.name for h in Heading])
_CELL = vol.ExactSequence([int, int])
_POSE = vol.ExactSequence([int, int, _HEADING])
_RUNS = [vol.ExactSequence([vol.Range(min=0), vol.Range(min=1), int])]

HEADER_SCHEMA = vol.Schema(
    {
        vol.Required("version"): int,
        vol.Required("minor_version"): int,
        vol.Required("key"): MAP_STORAGE_KEY,
    }
)

STATE_SCHEMA = vol.Schema(
    {
        vol.Required("record"): "state",
        vol.Required("current"): vol.Any(None, int),
        vol.Required("pose"): _POSE,
        vol.Required("origin"): _POSE,
        vol.Optional("opened_doors", default=[]): [_CELL],
    }
)

CANVAS_SCHEMA = vol.Schema(
    {
        vol.Required("size"): vol.All(int, vol.Range(min=1)),
        vol.Required("offset"): _CELL,
        vol.Required("origin"): _POSE,
        vol.Required("observation_count"): vol.All(int, vol.Range(min=0)),
        vol.Required("counts"): _RUNS,
        vol.Required("stamps"): _RUNS,
    }
)

NODE_SCHEMA = vol.Schema(
    {
        vol.Required("record"): "node",
        vol.Required("id"): vol.All(int, vol.Range(min=0)),
        vol.Required("anchor"): _POSE,
        vol.Required("activation"): vol.Coerce(float),
        vol.Required("created_at"): int,
        vol.Optional("used_doorways", default=[]): [_CELL],
        vol.Optional("derived_from", default=None): vol.Any(None, int),
        vol.Required("canvas"): CANVAS_SCHEMA,
    }
)

EDGE_SCHEMA = vol.Schema(
    {
        vol.Required("record"): "edge",
        vol.Required("source"): int,
        vol.Required("target"): int,
        vol.Required("transform"): vol.ExactSequence([vol.In(range(4)), int, int]),
        vol.Required("cost"): vol.All(int, vol.Range(min=1)),
        vol.Optional("door", default=None): vol.Any(None, _CELL),
    }
)

END_SCHEMA = vol.Schema(
    {
        vol.Required("record"): "end",
        vol.Required("nodes"): int,
        vol.Required("edges"): int,
    }
)


def _pose(values: list) -> list:
    return [int(values[0]), int(values[1]), Heading(values[2]).name]


def _encode_runs(array: np.ndarray) -> list[list[int]]:
    """Runs of equal non-zero values in the flattened array."""
    flat = array.ravel()
    if flat.size == 0:
        return []
    starts = np.concatenate(([0], np.flatnonzero(np.diff(flat)) + 1))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    values = flat[starts]
    keep = values != 0
    return [
        [int(s), int(n), int(v)] for s, n, v in zip(starts[keep], lengths[keep], values[keep])
    ]


def _decode_runs(runs: list[list[int]], shape: tuple[int, ...], line: int) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=np.int32)
    for start, length, value in runs:
        if start + length > flat.size:
            raise MapLoadError("canvas run exceeds the canvas", line)
        flat[start : start + length] = value
    return flat.reshape(shape)


def _node_record(node: ExperienceNode) -> dict[str, Any]:
    canvas = node.canvas
    origin = canvas.origin
    return {
        "record": "node",
        "id": node.node_id,
        "anchor": _pose([node.anchor.x, node.anchor.y, node.anchor.heading]),
        "activation": node.activation,
        "created_at": node.created_at,
        "used_doorways": sorted([list(cell) for cell in node.used_doorways]),
        "derived_from": node.derived_from,
        "canvas": {
            "size": canvas.size,
            "offset": list(canvas.offset),
            "origin": _pose([origin.x, origin.y, origin.heading]),
            "observation_count": canvas.observation_count,
            "counts": _encode_runs(canvas.counts),
            "stamps": _encode_runs(canvas.stamps),
        },
    }


def _edge_record(edge: Edge) -> dict[str, Any]:
    return {
        "record": "edge",
        "source": edge.source,
        "target": edge.target,
        "transform": [edge.transform.rotation, edge.transform.dx, edge.transform.dy],
        "cost": edge.cost,
        "door": list(edge.door) if edge.door is not None else None,
    }


def dump_map(snapshot: AgentSnapshot) -> str:
    """Serialize a map as line-delimited JSON records."""
    graph = snapshot.graph
    records: list[dict[str, Any]] = [
        {
            "version": STORAGE_VERSION_MAJOR,
            "minor_version": STORAGE_VERSION_MINOR,
            "key": MAP_STORAGE_KEY,
        },
        {
            "record": "state",
            "current": graph.current,
            "pose": _pose([snapshot.pose.x, snapshot.pose.y, snapshot.pose.heading]),
            "origin": _pose([snapshot.origin.x, snapshot.origin.y, snapshot.origin.heading]),
            "opened_doors": sorted([list(door) for door in snapshot.opened_doors]),
        },
    ]
    records += [_node_record(graph.nodes[node_id]) for node_id in sorted(graph.nodes)]
    records += [_edge_record(edge) for edge in graph.edges]
    records.append({"record": "end", "nodes": len(graph.nodes), "edges": len(graph.edges)})
    return "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)


def _validate(schema: vol.Schema, record: dict, line: int) -> dict:
    try:
        return schema(record)
    except vol.Invalid as err:
        raise MapLoadError(f"invalid {record.get('record', 'header')} record: {err}", line) from err


def _canvas(data: dict, line: int) -> PlaceCanvas:
    size = data["size"]
    shape = (size, size, NUM_KINDS)
    x, y, heading = data["origin"]
    return PlaceCanvas(
        _decode_runs(data["counts"], shape, line),
        _decode_runs(data["stamps"], shape, line),
        tuple(data["offset"]),
        PlacePose(x, y, Heading[heading]),
        data["observation_count"],
    )


def _global(values: list) -> GlobalPose:
    return GlobalPose(values[0], values[1], Heading[values[2]])


def parse_map(text: str) -> AgentSnapshot:
    """Parse the records written by dump_map. Nothing is returned on error."""
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise MapLoadError(f"malformed record: {err.msg}", number) from err
        if not isinstance(record, dict):
            raise MapLoadError("record must be an object", number)
        records.append((number, record))

    if not records:
        raise MapLoadError("empty map file", 1)
    number, header = records[0]
    header = _validate(HEADER_SCHEMA, header, number)
    if header["version"] != STORAGE_VERSION_MAJOR:
        raise MapLoadError(
            f"unsupported map version {header['version']}, expected {STORAGE_VERSION_MAJOR}",
            number,
        )

    state = None
    nodes: dict[int, ExperienceNode] = {}
    edges: list[Edge] = []
    end = None
    for number, raw in records[1:]:
        if end is not None:
            raise MapLoadError("record after end marker", number)
        kind = raw.get("record")
        if kind == "state":
            state = _validate(STATE_SCHEMA, raw, number)
        elif kind == "node":
            data = _validate(NODE_SCHEMA, raw, number)
            if data["id"] in nodes:
                raise MapLoadError(f"duplicate node {data['id']}", number)
            nodes[data["id"]] = ExperienceNode(
                node_id=data["id"],
                canvas=_canvas(data["canvas"], number),
                anchor=_global(data["anchor"]),
                activation=data["activation"],
                created_at=data["created_at"],
                used_doorways=[tuple(cell) for cell in data["used_doorways"]],
                derived_from=data["derived_from"],
            )
        elif kind == "edge":
            data = _validate(EDGE_SCHEMA, raw, number)
            for end_id in (data["source"], data["target"]):
                if end_id not in nodes:
                    raise MapLoadError(f"edge refers to unknown node {end_id}", number)
            door = data["door"]
            edges.append(
                Edge(
                    data["source"],
                    data["target"],
                    Transform(*data["transform"]),
                    data["cost"],
                    tuple(door) if door is not None else None,
                )
            )
        elif kind == "end":
            end = _validate(END_SCHEMA, raw, number)
            if end["nodes"] != len(nodes) or end["edges"] != len(edges):
                raise MapLoadError("record counts disagree with end marker", number)
        else:
            raise MapLoadError(f"unknown record type {kind!r}", number)

    last = records[-1][0]
    if end is None:
        raise MapLoadError("map file is truncated, end marker missing", last)
    if state is None:
        raise MapLoadError("map file has no state record", last)
    if state["current"] is not None and state["current"] not in nodes:
        raise MapLoadError(f"current node {state['current']} is not in the map", last)

    graph = CognitiveGraph(nodes=nodes, edges=edges, current=state["current"])
    return AgentSnapshot(
        graph,
        _global(state["pose"]),
        _global(state["origin"]),
        [tuple(door) for door in state["opened_doors"]],
    )


def save_map(snapshot: AgentSnapshot, path: str | Path) -> None:
    """Write a map file."""
    Path(path).write_text(dump_map(snapshot), encoding="UTF-8")
    _LOGGER.debug("Saved %d node map to %s", len(snapshot.graph), path)


def load_map(path: str | Path) -> AgentSnapshot:
    """Read a map file."""
    try:
        text = Path(path).read_text(encoding="UTF-8")
    except OSError as err:
        raise MapLoadError(f"cannot read {path}: {err}") from err
    snapshot = parse_map(text)
    _LOGGER.debug("Loaded %d node map from %s", len(snapshot.graph), path)
    return snapshot


def describe_map(snapshot: AgentSnapshot) -> str:
    """Human readable listing of nodes and edges."""
    graph = snapshot.graph
    lines = [f"nodes: {len(graph)}  edges: {len(graph.edges)}  current: {graph.current}"]
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        lines.append(
            f"node {node_id}: anchor ({node.anchor.x}, {node.anchor.y}) "
            f"activation {node.activation:.3f} cells {len(node.canvas.known_cells())} "
            f"doorways {sorted(node.used_doorways)}"
            + (f" derived from {node.derived_from}" if node.derived_from is not None else "")
        )
    for edge in graph.edges:
        t = edge.transform
        lines.append(
            f"edge {edge.source} -> {edge.target}: shift ({t.dx}, {t.dy}) "
            f"rotation {t.rotation} cost {edge.cost} door {edge.door}"
        )
    return "\n".join(lines)
