from __future__ import annotations

import json

from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import CAPABILITY_ORDER, ScreenSnapshot, UiElement


def element_line(element: UiElement) -> str:
    actions = ",".join(c.value for c in CAPABILITY_ORDER if c in element.allowed_actions)
    label = json.dumps(derive_label(element), ensure_ascii=False)
    return f"[{element.id}] {element.widget_class} {label} {element.bounds} {{{actions}}}"


def serialize_for_prompt(snapshot: ScreenSnapshot) -> str:
    """Render the tree as text, e.g. ``[0] button "OK" (10,10,80,40) {CLICKABLE}``.

    Children are indented two spaces under their parent.
    """
    lines: list[str] = []

    def visit(element: UiElement, depth: int) -> None:
        lines.append("  " * depth + element_line(element))
        for child in element.children:
            visit(child, depth + 1)

    visit(snapshot.root, 0)
    return "\n".join(lines)
