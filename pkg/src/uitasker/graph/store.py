"""JSON-lines persistence for app graphs (format described in docs/graph-store.md)."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Union

from uitasker.actions import Action, ActionType
from uitasker.graph.model import (
    AppGraph,
    GraphError,
    ScreenDescription,
    ScreenNode,
    TargetLocator,
    TransitionEdge,
)
from uitasker.ui.fingerprint import ScreenFingerprint

FORMAT = "uitasker-graph"
VERSION = 1


class CorruptStore(GraphError):
    pass


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def node_record(node: ScreenNode) -> dict:
    d = node.description
    return {
        "type": "node",
        "node_id": node.node_id,
        "layout_signature": {
            "bits": node.layout_signature.hex(),
            "element_count": node.layout_signature.element_count,
        },
        "description": {
            "summary": d.summary,
            "activity_name": d.activity_name,
            "app_name": d.app_name,
            "clickable_labels": list(d.clickable_labels),
            "scrollable_labels": list(d.scrollable_labels),
            "editable_labels": list(d.editable_labels),
        },
        "served_commands": list(node.served_commands),
        "feedback_notes": list(node.feedback_notes),
    }


def edge_record(edge: TransitionEdge) -> dict:
    locator = None
    if edge.locator is not None:
        locator = {
            "resource_name": edge.locator.resource_name,
            "label": edge.locator.label,
            "cells": list(edge.locator.cells) if edge.locator.cells is not None else None,
        }
    return {
        "type": "edge",
        "from": edge.source,
        "to": edge.dest,
        "action": {"kind": edge.action.kind.value, "argument": edge.action.argument},
        "target_locator": locator,
        "traversal_count": edge.traversal_count,
    }


def dumps_graph(graph: AppGraph) -> str:
    lines = [_dumps({"format": FORMAT, "version": VERSION, "package_name": graph.package_name})]
    for node_id in sorted(graph.nodes):
        lines.append(_dumps(node_record(graph.nodes[node_id])))
    for edge in sorted(graph.edges.values(), key=TransitionEdge.sort_key):
        lines.append(_dumps(edge_record(edge)))
    return "\n".join(lines) + "\n"


def persist(graph: AppGraph, path: Union[str, Path]) -> Path:
    """Write ``graph`` atomically: a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dumps_graph(graph))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _node(rec: dict) -> ScreenNode:
    sig = rec["layout_signature"]
    d = rec["description"]
    return ScreenNode(
        node_id=int(rec["node_id"]),
        layout_signature=ScreenFingerprint(int(sig["bits"], 16), int(sig["element_count"])),
        description=ScreenDescription(
            summary=str(d["summary"]),
            activity_name=str(d.get("activity_name", "")),
            app_name=str(d.get("app_name", "")),
            clickable_labels=tuple(d.get("clickable_labels", ())),
            scrollable_labels=tuple(d.get("scrollable_labels", ())),
            editable_labels=tuple(d.get("editable_labels", ())),
        ),
        served_commands=[str(c) for c in rec.get("served_commands", [])],
        feedback_notes=[str(n) for n in rec.get("feedback_notes", [])],
    )


def _edge(rec: dict) -> TransitionEdge:
    loc = rec.get("target_locator")
    locator = None
    if loc is not None:
        cells = loc.get("cells")
        locator = TargetLocator(loc.get("resource_name"), loc.get("label"), tuple(cells) if cells is not None else None)
    action = Action(ActionType(rec["action"]["kind"]), rec["action"].get("argument"))
    count = int(rec["traversal_count"])
    if count < 1:
        raise ValueError("traversal_count must be at least 1")
    return TransitionEdge(int(rec["from"]), int(rec["to"]), action, locator, count)


def loads_graph(text: str, source: str = "<string>") -> AppGraph:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise CorruptStore(f"{source}: empty store file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptStore(f"{source}:1: bad header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise CorruptStore(f"{source}:1: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise CorruptStore(f"{source}:1: unsupported version {header.get('version')!r}")
    graph = AppGraph(str(header.get("package_name", "")))
    for number, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            kind = rec.get("type")
            if kind == "node":
                graph.add_node(_node(rec))
            elif kind == "edge":
                edge = _edge(rec)
                if edge.key in graph.edges:
                    raise ValueError("duplicate edge")
                graph.add_edge(edge)
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError, GraphError) as exc:
            raise CorruptStore(f"{source}:{number}: {exc}") from None
    return graph


def load(path: Union[str, Path], package_name: str = "") -> AppGraph:
    """Load a graph; a missing file is an empty graph."""
    path = Path(path)
    if not path.exists():
        return AppGraph(package_name)
    try:
        text = path.read_text("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptStore(f"{path}: not UTF-8: {exc}") from None
    return loads_graph(text, str(path))
