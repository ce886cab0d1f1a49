"""Declarative app specifications for the simulated device.

An app spec is a YAML document (see docs/app-spec.md)::

    app_name: Chatter
    package_name: com.example.chatter
    resolution: [1080, 1920]
    initial_screen: inbox
    params: {query: ""}
    screens:
      inbox:
        activity: .InboxActivity
        elements:
          - {class: icon, res: ic_search, bounds: [920, 40, 120, 100], actions: [CLICKABLE]}
    transitions:
      - {from: inbox, action: PRESS, target: ic_search, to: search}
      - {from: search, action: ENTER_TEXT, target: search_field, to: search_typed, capture: query}
    perturbations:
      - {after_step: 2, popup: {title: "Special offer", close: "Close"}}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from uitasker.actions import DIRECTIONS, ActionType
from uitasker.ui.snapshot import WIDGET_CLASSES, Bounds, UiCapability


class SpecError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class _Doc(dict):
    """Mapping that remembers the source line of itself and of each key."""

    line: int = 0
    key_lines: dict


class _Seq(list):
    line: int = 0
    item_lines: list


def _materialize(node: yaml.Node, constructor: yaml.constructor.SafeConstructor) -> Any:
    if isinstance(node, yaml.MappingNode):
        out = _Doc()
        out.line = node.start_mark.line + 1
        out.key_lines = {}
        for key_node, value_node in node.value:
            key = _materialize(key_node, constructor)
            out[key] = _materialize(value_node, constructor)
            out.key_lines[key] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        seq = _Seq(_materialize(item, constructor) for item in node.value)
        seq.line = node.start_mark.line + 1
        seq.item_lines = [item.start_mark.line + 1 for item in node.value]
        return seq
    return constructor.construct_object(node, deep=True)


def _line(doc: Any, key: Any = None) -> Optional[int]:
    if isinstance(doc, _Doc):
        if key is not None and key in doc.key_lines:
            return doc.key_lines[key]
        return doc.line
    if isinstance(doc, _Seq):
        if isinstance(key, int) and key < len(doc.item_lines):
            return doc.item_lines[key]
        return doc.line
    return None


@dataclass(frozen=True)
class ElementTemplate:
    widget_class: str
    bounds: Bounds
    text: Optional[str] = None
    content_desc: Optional[str] = None
    resource_name: Optional[str] = None
    actions: frozenset = frozenset()
    children: tuple["ElementTemplate", ...] = ()

    def names(self) -> set[str]:
        """Every string a transition may use to refer to this element."""
        return {n for n in (self.resource_name, self.text, self.content_desc) if n}

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ScreenSpec:
    name: str
    activity: str
    elements: tuple[ElementTemplate, ...]

    def walk(self):
        for element in self.elements:
            yield from element.walk()


@dataclass(frozen=True)
class Transition:
    screen: str
    action: ActionType
    to: str
    target: Optional[str] = None
    direction: Optional[str] = None
    capture: Optional[str] = None


@dataclass(frozen=True)
class Popup:
    title: str = "Special offer"
    close: str = "Close"


@dataclass(frozen=True)
class Perturbation:
    after_step: int
    popup: Optional[Popup] = None
    loading_ticks: int = 0
    shuffle_seed: Optional[int] = None


@dataclass(frozen=True)
class AppSpec:
    app_name: str
    package_name: str
    initial_screen: str
    screens: dict
    transitions: tuple[Transition, ...]
    resolution: tuple[int, int] = (1080, 1920)
    params: dict = field(default_factory=dict)
    perturbations: tuple[Perturbation, ...] = ()
    source: str = ""

    def screen(self, name: str) -> ScreenSpec:
        return self.screens[name]


def _require(doc: Any, key: str, where: Any, source: str) -> Any:
    if not isinstance(doc, dict) or key not in doc:
        raise SpecError(f"missing required field {key!r}", _line(where), source)
    return doc[key]


ELEMENT_KEYS = frozenset({"class", "text", "desc", "res", "bounds", "actions", "children"})


def _element(raw: Any, source: str) -> ElementTemplate:
    if not isinstance(raw, dict):
        raise SpecError("element must be a mapping", _line(raw), source)
    unknown = sorted(str(k) for k in raw if k not in ELEMENT_KEYS)
    if unknown:
        raise SpecError(f"unknown element field {unknown[0]!r}", _line(raw, unknown[0]), source)
    widget_class = raw.get("class", "other")
    if widget_class not in WIDGET_CLASSES:
        raise SpecError(f"unknown element class {widget_class!r}", _line(raw, "class"), source)
    bounds = _require(raw, "bounds", raw, source)
    if not (isinstance(bounds, list) and len(bounds) == 4 and all(isinstance(v, int) for v in bounds)):
        raise SpecError("bounds must be [x, y, w, h] integers", _line(raw, "bounds"), source)
    if bounds[2] < 0 or bounds[3] < 0:
        raise SpecError("bounds must have non-negative size", _line(raw, "bounds"), source)
    try:
        actions = frozenset(UiCapability(a) for a in raw.get("actions") or [])
    except ValueError as exc:
        raise SpecError(str(exc), _line(raw, "actions"), source) from None
    children = tuple(_element(c, source) for c in raw.get("children") or [])
    return ElementTemplate(
        widget_class=widget_class,
        bounds=Bounds(*bounds),
        text=raw.get("text"),
        content_desc=raw.get("desc"),
        resource_name=raw.get("res"),
        actions=actions,
        children=children,
    )


def _perturbation(raw: Any, source: str) -> Perturbation:
    if not isinstance(raw, dict) or "after_step" not in raw:
        raise SpecError("perturbation needs after_step", _line(raw), source)
    popup = None
    if "popup" in raw:
        p = raw["popup"] or {}
        popup = Popup(str(p.get("title", "Special offer")), str(p.get("close", "Close")))
    return Perturbation(
        after_step=int(raw["after_step"]),
        popup=popup,
        loading_ticks=int(raw.get("loading_ticks", 0)),
        shuffle_seed=raw.get("shuffle_seed"),
    )


def parse_app_spec(text: str, source: str = "") -> AppSpec:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise SpecError(f"invalid YAML: {exc.problem}", line, source) from None
    if node is None:
        raise SpecError("empty app spec", 1, source)
    doc = _materialize(node, yaml.constructor.SafeConstructor())
    if not isinstance(doc, dict):
        raise SpecError("app spec must be a mapping", 1, source)

    raw_screens = _require(doc, "screens", doc, source)
    if not isinstance(raw_screens, dict) or not raw_screens:
        raise SpecError("screens must be a nonempty mapping", _line(doc, "screens"), source)
    screens = {}
    for name, body in raw_screens.items():
        if not isinstance(body, dict):
            raise SpecError(f"screen {name!r} must be a mapping", _line(raw_screens, name), source)
        elements = tuple(_element(e, source) for e in body.get("elements") or [])
        activity = str(body.get("activity") or f".{str(name).title().replace('_', '')}Activity")
        screens[str(name)] = ScreenSpec(str(name), activity, elements)

    initial = _require(doc, "initial_screen", doc, source)
    if initial not in screens:
        raise SpecError(f"initial_screen {initial!r} is not declared", _line(doc, "initial_screen"), source)

    transitions = []
    raw_transitions = doc.get("transitions") or []
    for index, raw in enumerate(raw_transitions):
        line = _line(raw_transitions, index)
        if not isinstance(raw, dict):
            raise SpecError("transition must be a mapping", line, source)
        start = _require(raw, "from", raw, source)
        end = _require(raw, "to", raw, source)
        for label, name in (("from", start), ("to", end)):
            if name not in screens:
                raise SpecError(f"transition {label} undeclared screen {name!r}", _line(raw, label), source)
        try:
            action = ActionType(str(_require(raw, "action", raw, source)).upper())
        except ValueError:
            raise SpecError(f"unknown action {raw.get('action')!r}", _line(raw, "action"), source) from None
        target = raw.get("target")
        if target is not None:
            names = set().union(*(e.names() for e in screens[start].walk())) if screens[start].elements else set()
            if target not in names:
                raise SpecError(
                    f"transition target {target!r} is not an element of screen {start!r}",
                    _line(raw, "target"),
                    source,
                )
        direction = raw.get("direction")
        if direction is not None and str(direction).lower() not in DIRECTIONS:
            raise SpecError(f"bad direction {direction!r}", _line(raw, "direction"), source)
        transitions.append(
            Transition(
                screen=start,
                action=action,
                to=end,
                target=target,
                direction=str(direction).lower() if direction else None,
                capture=raw.get("capture"),
            )
        )

    resolution = doc.get("resolution", [1080, 1920])
    if not (isinstance(resolution, list) and len(resolution) == 2 and all(isinstance(v, int) and v > 0 for v in resolution)):
        raise SpecError("resolution must be two positive integers", _line(doc, "resolution"), source)
    perturbations = tuple(_perturbation(p, source) for p in doc.get("perturbations") or [])
    return AppSpec(
        app_name=str(_require(doc, "app_name", doc, source)),
        package_name=str(_require(doc, "package_name", doc, source)),
        initial_screen=str(initial),
        screens=screens,
        transitions=tuple(transitions),
        resolution=(resolution[0], resolution[1]),
        params={str(k): str(v) for k, v in (doc.get("params") or {}).items()},
        perturbations=perturbations,
        source=source,
    )


def load_app_spec(path: Union[str, Path]) -> AppSpec:
    path = Path(path)
    return parse_app_spec(path.read_text("utf-8"), source=str(path))


def fixture_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture_app(name: str) -> AppSpec:
    return load_app_spec(fixture_dir() / "apps" / f"{name}.yaml")
