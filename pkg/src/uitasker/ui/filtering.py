"""UI noise removal.

Draw order is document order: an element is hidden when an element drawn
after it (a later sibling of the element or of one of its ancestors, or a
descendant of such a sibling) fully covers it.  Only elements that survive
filtering themselves count as occluders, which keeps the filter idempotent.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiElement


def _on_screen(bounds: Bounds, width: int, height: int) -> bool:
    if bounds.area == 0:
        return False
    return bounds.right > 0 and bounds.bottom > 0 and bounds.x < width and bounds.y < height


def _has_caption(element: UiElement) -> bool:
    return bool((element.text or "").strip() or (element.content_desc or "").strip())


def filter_noise(snapshot: ScreenSnapshot) -> ScreenSnapshot:
    width, height = snapshot.resolution
    # Rectangles of surviving elements drawn after the element being decided.
    occluders: list[Bounds] = []

    def visit(element: UiElement) -> Optional[UiElement]:
        # Reverse preorder: children right-to-left before the parent, so every
        # later-drawn element has already been decided.
        if not _on_screen(element.bounds, width, height):
            return None
        if any(r.contains(element.bounds) for r in occluders):
            return None
        kept = []
        for child in reversed(element.children):
            survivor = visit(child)
            if survivor is not None:
                kept.append(survivor)
        kept.reverse()
        if element.widget_class == "container" and not kept and not _has_caption(element):
            return None
        occluders.append(element.bounds)
        if len(kept) == len(element.children) and all(
            a is b for a, b in zip(kept, element.children)
        ):
            return element
        return replace(element, children=tuple(kept))

    root = snapshot.root
    kept_children = []
    for child in reversed(root.children):
        survivor = visit(child)
        if survivor is not None:
            kept_children.append(survivor)
    kept_children.reverse()
    b = root.bounds
    x0, y0 = max(b.x, 0), max(b.y, 0)
    x1, y1 = min(b.right, width), min(b.bottom, height)
    clipped = Bounds(x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))
    return snapshot.with_root(replace(root, bounds=clipped, children=tuple(kept_children)))
