from __future__ import annotations

import re

from uitasker.ui.snapshot import UiElement

_ID_PREFIX = re.compile(r"^.*:id/")
_WIDGET_PREFIX = re.compile(r"^(?:ic|btn|iv)_", re.IGNORECASE)
_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def humanize_resource_name(name: str) -> str:
    """``"com.app:id/ic_search"`` -> ``"search"``, ``"iv_userAvatar"`` -> ``"user avatar"``."""
    name = _ID_PREFIX.sub("", name.strip())
    name = _WIDGET_PREFIX.sub("", name)
    words = []
    for chunk in re.split(r"[_\-\s.]+", name):
        words.extend(w for w in _CAMEL.split(chunk) if w)
    return " ".join(w.lower() for w in words)


def derive_label(element: UiElement) -> str:
    """Best human-readable caption: text, then description, then resource name, then class."""
    if element.text and element.text.strip():
        return element.text
    if element.content_desc and element.content_desc.strip():
        return element.content_desc
    if element.resource_name:
        humanized = humanize_resource_name(element.resource_name)
        if humanized:
            return humanized
    return element.widget_class
