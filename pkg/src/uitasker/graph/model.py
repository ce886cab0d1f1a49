"""Per-app screen-transition graph.

Nodes are screens identified by their layout signature (a fingerprint of the
screen with all captions blanked), so a results page for "sushi" and one for
"spaghetti" are the same node.  Edges are the actions that moved between them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from uitasker.actions import Action, format_action
from uitasker.ui.fingerprint import ScreenFingerprint, layout_signature, quantize_bounds
from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import ScreenSnapshot, UiCapability, UiElement

MAX_SERVED_COMMANDS = 50


class GraphError(Exception):
    pass


class UnknownNode(GraphError, KeyError):
    pass


class UnknownCommand(GraphError, KeyError):
    pass


def page_label(activity_name: str) -> str:
    """``".SearchResultsActivity"`` -> ``"SearchResults"``."""
    name = activity_name.rsplit(".", 1)[-1] or activity_name
    name = re.sub(r"Activity$", "", name)
    return name or "Screen"


@dataclass(frozen=True)
class ScreenDescription:
    summary: str
    activity_name: str = ""
    app_name: str = ""
    clickable_labels: tuple[str, ...] = ()
    scrollable_labels: tuple[str, ...] = ()
    editable_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("clickable_labels", "scrollable_labels", "editable_labels"):
            object.__setattr__(self, name, tuple(sorted(set(getattr(self, name)))))

    def render(self) -> str:
        parts = [self.summary]
        for title, labels in (
            ("clickable", self.clickable_labels),
            ("scrollable", self.scrollable_labels),
            ("text-editable", self.editable_labels),
        ):
            if labels:
                parts.append(f"{title}: " + ", ".join(labels))
        return " | ".join(parts)


def interactive_labels(snapshot: ScreenSnapshot) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {"clickable": [], "scrollable": [], "editable": []}
    for element in snapshot.root.iter_tree():
        label = derive_label(element)
        if element.allows(UiCapability.CLICKABLE):
            out["clickable"].append(label)
        if element.allows(UiCapability.SCROLLABLE):
            out["scrollable"].append(label)
        if element.allows(UiCapability.TEXT_EDITABLE):
            out["editable"].append(label)
    return out


def heuristic_description(snapshot: ScreenSnapshot, summary: Optional[str] = None) -> ScreenDescription:
    labels = interactive_labels(snapshot)
    if summary is None:
        page = page_label(snapshot.activity_name)
        summary = f"{page} screen of {snapshot.app_name or snapshot.package_name or 'the app'}"
        if labels["editable"]:
            summary += " with text input"
        if labels["scrollable"]:
            summary += ", a scrollable list"
        summary += f" and {len(set(labels['clickable']))} tappable elements."
    return ScreenDescription(
        summary=summary,
        activity_name=snapshot.activity_name,
        app_name=snapshot.app_name,
        clickable_labels=tuple(labels["clickable"]),
        scrollable_labels=tuple(labels["scrollable"]),
        editable_labels=tuple(labels["editable"]),
    )


@dataclass(frozen=True)
class TargetLocator:
    """How to find an edge's target element again; fields are tried in order."""

    resource_name: Optional[str] = None
    label: Optional[str] = None
    cells: Optional[tuple[int, int, int, int]] = None

    @classmethod
    def of(cls, element: UiElement, snapshot: ScreenSnapshot) -> "TargetLocator":
        return cls(
            resource_name=element.resource_name,
            label=derive_label(element),
            cells=quantize_bounds(element.bounds, snapshot.resolution),
        )

    def resolve(self, snapshot: ScreenSnapshot, capability: Optional[UiCapability] = None) -> Optional[UiElement]:
        pool = [e for e in snapshot.root.iter_tree() if capability is None or e.allows(capability)]
        if not pool:
            return None
        if self.resource_name:
            named = [e for e in pool if e.resource_name == self.resource_name]
            if named:
                pool = named
                if len(pool) == 1:
                    return pool[0]
                return self._narrow(pool, snapshot)
        return self._narrow(pool, snapshot, strict=True)

    def _narrow(self, pool: list[UiElement], snapshot: ScreenSnapshot, strict: bool = False) -> Optional[UiElement]:
        if self.label is not None:
            wanted = self.label.casefold()
            labelled = [e for e in pool if derive_label(e).casefold() == wanted]
            if labelled:
                pool = labelled
                strict = False
        if self.cells is not None:
            placed = [e for e in pool if quantize_bounds(e.bounds, snapshot.resolution) == self.cells]
            if placed:
                return placed[0]
        if strict:
            return None
        return pool[0]

    def describe(self) -> str:
        return self.label or self.resource_name or "element"


@dataclass
class ScreenNode:
    node_id: int
    layout_signature: ScreenFingerprint
    description: ScreenDescription
    served_commands: list[str] = field(default_factory=list)
    feedback_notes: list[str] = field(default_factory=list)


@dataclass
class TransitionEdge:
    source: int
    dest: int
    action: Action
    locator: Optional[TargetLocator] = None
    traversal_count: int = 1

    @property
    def key(self) -> tuple:
        return (self.source, self.action, self.locator)

    def sort_key(self) -> tuple:
        loc = self.locator or TargetLocator()
        return (
            self.source,
            self.dest,
            format_action(self.action),
            loc.resource_name or "",
            loc.label or "",
            loc.cells or (),
        )

    def describe(self) -> str:
        text = format_action(self.action)
        return f"{text} {self.locator.describe()}" if self.locator else text


class AppGraph:
    def __init__(self, package_name: str = ""):
        self.package_name = package_name
        self.nodes: dict[int, ScreenNode] = {}
        self.edges: dict[tuple, TransitionEdge] = {}
        self._by_signature: dict[ScreenFingerprint, int] = {}
        self.next_id = 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AppGraph):
            return NotImplemented
        return (
            self.package_name == other.package_name
            and self.nodes == other.nodes
            and sorted(self.edges.values(), key=TransitionEdge.sort_key)
            == sorted(other.edges.values(), key=TransitionEdge.sort_key)
        )

    def __repr__(self) -> str:
        return f"AppGraph({self.package_name!r}, nodes={len(self.nodes)}, edges={len(self.edges)})"

    # -- nodes -------------------------------------------------------------
    def node(self, node_id: int) -> ScreenNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id} in graph for {self.package_name!r}") from None

    def node_for_signature(self, signature: ScreenFingerprint) -> Optional[int]:
        return self._by_signature.get(signature)

    def add_node(self, node: ScreenNode) -> None:
        if node.layout_signature in self._by_signature:
            raise GraphError(f"layout signature already belongs to node {self._by_signature[node.layout_signature]}")
        self.nodes[node.node_id] = node
        self._by_signature[node.layout_signature] = node.node_id
        self.next_id = max(self.next_id, node.node_id + 1)

    def ensure_node(self, snapshot: ScreenSnapshot, description: Optional[ScreenDescription] = None) -> int:
        signature = layout_signature(snapshot)
        existing = self._by_signature.get(signature)
        if existing is not None:
            return existing
        node = ScreenNode(self.next_id, signature, description or heuristic_description(snapshot))
        self.add_node(node)
        return node.node_id

    def remove_node(self, node_id: int) -> None:
        node = self.node(node_id)
        del self.nodes[node_id]
        del self._by_signature[node.layout_signature]
        self.edges = {k: e for k, e in self.edges.items() if node_id not in (e.source, e.dest)}

    # -- edges -------------------------------------------------------------
    def add_edge(self, edge: TransitionEdge) -> TransitionEdge:
        if edge.source not in self.nodes or edge.dest not in self.nodes:
            raise UnknownNode(f"edge endpoints {edge.source}->{edge.dest} must exist")
        existing = self.edges.get(edge.key)
        if existing is not None:
            existing.traversal_count += edge.traversal_count
            existing.dest = edge.dest
            return existing
        self.edges[edge.key] = edge
        return edge

    def out_edges(self, node_id: int) -> list[TransitionEdge]:
        return sorted((e for e in self.edges.values() if e.source == node_id), key=TransitionEdge.sort_key)

    # -- commands and feedback --------------------------------------------
    def add_served_command(self, node_id: int, command: str) -> None:
        served = self.node(node_id).served_commands
        if command in served:
            return
        served.append(command)
        del served[:-MAX_SERVED_COMMANDS]

    def nodes_serving(self, command: str) -> list[int]:
        return sorted(n.node_id for n in self.nodes.values() if command in n.served_commands)


def record_transition(
    graph: AppGraph,
    from_snapshot: ScreenSnapshot,
    action: Action,
    target: Union[int, UiElement, None],
    to_snapshot: ScreenSnapshot,
    *,
    from_description: Optional[ScreenDescription] = None,
    to_description: Optional[ScreenDescription] = None,
) -> AppGraph:
    """Add (or count again) the edge ``from_snapshot --action--> to_snapshot``."""
    source = graph.ensure_node(from_snapshot, from_description)
    dest = graph.ensure_node(to_snapshot, to_description)
    locator = None
    if target is not None:
        element = target if isinstance(target, UiElement) else from_snapshot.find(target)
        if element is None:
            raise GraphError(f"target {target} is not in the source snapshot")
        locator = TargetLocator.of(element, from_snapshot)
    graph.add_edge(TransitionEdge(source, dest, action, locator, 1))
    return graph


def apply_feedback(graph: AppGraph, node_or_task: Union[int, str], feedback: str) -> list[int]:
    """Attach a user note to a node, or to every node that served a command."""
    if isinstance(node_or_task, int):
        targets = [graph.node(node_or_task).node_id]
    else:
        targets = graph.nodes_serving(node_or_task)
        if not targets:
            raise UnknownNode(f"no saved screen served {node_or_task!r}")
    for node_id in targets:
        graph.nodes[node_id].feedback_notes.append(feedback)
    return targets


def amend_command(graph: AppGraph, node_id: int, old_command: str, new_command: str) -> None:
    served = graph.node(node_id).served_commands
    try:
        index = served.index(old_command)
    except ValueError:
        raise UnknownCommand(f"node {node_id} never served {old_command!r}") from None
    if new_command in served and served[index] != new_command:
        del served[index]
    else:
        served[index] = new_command


def edges_between(graph: AppGraph, source: int, dest: int) -> Iterable[TransitionEdge]:
    return (e for e in graph.edges.values() if e.source == source and e.dest == dest)
