"""Screen snapshot data model and the snapshot document parser.

A snapshot document is plain JSON-compatible data (see docs/snapshot-schema.md):

    {
      "app_name": "Chatter", "package_name": "com.example.chatter",
      "activity_name": ".InboxActivity", "resolution": [1080, 1920],
      "orientation": "portrait", "captured_at": 12,
      "root": {"id": 0, "widget_class": "container", "bounds": [0, 0, 1080, 1920],
               "allowed_actions": [], "children": [...]}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Mapping, NamedTuple, Optional


class MalformedSnapshot(ValueError):
    """Raised when a snapshot document violates the schema."""


WIDGET_CLASSES = (
    "button",
    "text-field",
    "icon",
    "image",
    "label",
    "list",
    "container",
    "checkbox",
    "progress-indicator",
    "other",
)


class UiCapability(str, Enum):
    CLICKABLE = "CLICKABLE"
    TEXT_EDITABLE = "TEXT_EDITABLE"
    SCROLLABLE = "SCROLLABLE"
    LONG_CLICKABLE = "LONG_CLICKABLE"


# Fixed rendering order for capability sets.
CAPABILITY_ORDER = (
    UiCapability.CLICKABLE,
    UiCapability.TEXT_EDITABLE,
    UiCapability.SCROLLABLE,
    UiCapability.LONG_CLICKABLE,
)


class Bounds(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: "Bounds") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def __str__(self) -> str:
        return f"({self.x},{self.y},{self.w},{self.h})"


@dataclass(frozen=True)
class UiElement:
    id: int
    widget_class: str
    bounds: Bounds
    text: Optional[str] = None
    content_desc: Optional[str] = None
    resource_name: Optional[str] = None
    allowed_actions: frozenset = frozenset()
    children: tuple["UiElement", ...] = ()

    def iter_tree(self) -> Iterator["UiElement"]:
        """Depth-first preorder walk including this element."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def allows(self, capability: UiCapability) -> bool:
        return capability in self.allowed_actions


@dataclass(frozen=True)
class ScreenSnapshot:
    root: UiElement
    resolution: tuple[int, int]
    app_name: str = ""
    package_name: str = ""
    activity_name: str = ""
    orientation: str = "portrait"
    captured_at: int = 0
    # Set by stabilization when the loading deadline expired.
    possibly_loading: bool = field(default=False, compare=False)

    def elements(self) -> list[UiElement]:
        return list(self.root.iter_tree())

    def find(self, element_id: int) -> Optional[UiElement]:
        for element in self.root.iter_tree():
            if element.id == element_id:
                return element
        return None

    def with_root(self, root: UiElement) -> "ScreenSnapshot":
        return replace(self, root=root)


def _bounds(raw: Any, where: str) -> Bounds:
    if raw is None:
        raise MalformedSnapshot(f"{where}: missing bounds")
    if isinstance(raw, Mapping):
        try:
            raw = [raw["x"], raw["y"], raw["w"], raw["h"]]
        except KeyError as exc:
            raise MalformedSnapshot(f"{where}: bounds missing {exc}") from None
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise MalformedSnapshot(f"{where}: bounds must be [x, y, w, h]")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
        raise MalformedSnapshot(f"{where}: bounds must be integers")
    x, y, w, h = raw
    if w < 0 or h < 0:
        raise MalformedSnapshot(f"{where}: negative dimensions {w}x{h}")
    return Bounds(x, y, w, h)


def _optional_str(raw: Mapping, key: str, where: str) -> Optional[str]:
    value = raw.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedSnapshot(f"{where}: {key} must be a string")
    return value


def _capabilities(raw: Any, where: str) -> frozenset:
    if raw is None:
        return frozenset()
    if not isinstance(raw, (list, tuple)):
        raise MalformedSnapshot(f"{where}: allowed_actions must be a list")
    try:
        return frozenset(UiCapability(str(a)) for a in raw)
    except ValueError as exc:
        raise MalformedSnapshot(f"{where}: {exc}") from None


def parse_snapshot(raw: Any) -> ScreenSnapshot:
    """Materialize a snapshot document (mapping or JSON text) into a ScreenSnapshot.

    Elements without an ``id`` receive their depth-first preorder index.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedSnapshot(f"invalid JSON: {exc}") from None
    if not isinstance(raw, Mapping):
        raise MalformedSnapshot("snapshot document must be a mapping")

    resolution = raw.get("resolution")
    if (
        not isinstance(resolution, (list, tuple))
        or len(resolution) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in resolution)
    ):
        raise MalformedSnapshot("missing or invalid resolution")
    width, height = resolution
    if width <= 0 or height <= 0:
        raise MalformedSnapshot("resolution must be strictly positive")
    if "root" not in raw or not isinstance(raw["root"], Mapping):
        raise MalformedSnapshot("missing root element")

    counter = 0
    seen_ids: set[int] = set()
    on_path: set[int] = set()

    def build(node: Mapping, where: str) -> UiElement:
        nonlocal counter
        if id(node) in on_path:
            raise MalformedSnapshot(f"{where}: cyclic element tree")
        on_path.add(id(node))
        preorder = counter
        counter += 1
        element_id = node.get("id", preorder)
        if not isinstance(element_id, int) or isinstance(element_id, bool):
            raise MalformedSnapshot(f"{where}: id must be an integer")
        if element_id in seen_ids:
            raise MalformedSnapshot(f"{where}: duplicate id {element_id}")
        seen_ids.add(element_id)
        widget_class = node.get("widget_class", "other")
        if widget_class not in WIDGET_CLASSES:
            widget_class = "other"
        raw_children = node.get("children") or []
        if not isinstance(raw_children, (list, tuple)):
            raise MalformedSnapshot(f"{where}: children must be a list")
        children = []
        for index, child in enumerate(raw_children):
            if not isinstance(child, Mapping):
                raise MalformedSnapshot(f"{where}.children[{index}]: not a mapping")
            children.append(build(child, f"{where}.children[{index}]"))
        on_path.discard(id(node))
        return UiElement(
            id=element_id,
            widget_class=widget_class,
            bounds=_bounds(node.get("bounds"), where),
            text=_optional_str(node, "text", where),
            content_desc=_optional_str(node, "content_desc", where),
            resource_name=_optional_str(node, "resource_name", where),
            allowed_actions=_capabilities(node.get("allowed_actions"), where),
            children=tuple(children),
        )

    root = build(raw["root"], "root")
    orientation = raw.get("orientation") or ("landscape" if width > height else "portrait")
    if orientation not in ("portrait", "landscape"):
        raise MalformedSnapshot(f"invalid orientation {orientation!r}")
    captured_at = raw.get("captured_at", 0)
    if not isinstance(captured_at, int):
        raise MalformedSnapshot("captured_at must be an integer tick")
    return ScreenSnapshot(
        root=root,
        resolution=(width, height),
        app_name=str(raw.get("app_name") or ""),
        package_name=str(raw.get("package_name") or ""),
        activity_name=str(raw.get("activity_name") or ""),
        orientation=orientation,
        captured_at=captured_at,
    )


def element_to_document(element: UiElement) -> dict:
    doc: dict[str, Any] = {
        "id": element.id,
        "widget_class": element.widget_class,
        "bounds": list(element.bounds),
        "allowed_actions": [c.value for c in CAPABILITY_ORDER if c in element.allowed_actions],
    }
    for key in ("text", "content_desc", "resource_name"):
        value = getattr(element, key)
        if value is not None:
            doc[key] = value
    doc["children"] = [element_to_document(c) for c in element.children]
    return doc


def snapshot_to_document(snapshot: ScreenSnapshot) -> dict:
    """Inverse of parse_snapshot."""
    return {
        "app_name": snapshot.app_name,
        "package_name": snapshot.package_name,
        "activity_name": snapshot.activity_name,
        "resolution": list(snapshot.resolution),
        "orientation": snapshot.orientation,
        "captured_at": snapshot.captured_at,
        "root": element_to_document(snapshot.root),
    }
