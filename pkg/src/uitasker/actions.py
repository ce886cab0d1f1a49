"""The closed action vocabulary shared by prompts, parsers, executor and graph."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from uitasker.ui.snapshot import UiCapability


class ActionType(str, Enum):
    PRESS = "PRESS"
    ENTER_TEXT = "ENTER_TEXT"
    SCROLL = "SCROLL"
    SWIPE = "SWIPE"
    OPEN = "OPEN"
    BACK = "BACK"
    DONE = "DONE"


DIRECTIONS = ("up", "down", "left", "right")

# Capability an element must expose to be the target of an action.
REQUIRED_CAPABILITY = {
    ActionType.PRESS: UiCapability.CLICKABLE,
    ActionType.ENTER_TEXT: UiCapability.TEXT_EDITABLE,
    ActionType.SCROLL: UiCapability.SCROLLABLE,
}


@dataclass(frozen=True)
class Action:
    kind: ActionType
    # ENTER_TEXT payload, SCROLL/SWIPE direction or OPEN app name.
    argument: Optional[str] = None

    def __post_init__(self) -> None:
        kind = ActionType(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (ActionType.ENTER_TEXT, ActionType.OPEN):
            if not self.argument:
                raise ValueError(f"{kind.value} requires a nonempty argument")
        elif kind in (ActionType.SCROLL, ActionType.SWIPE):
            direction = (self.argument or "").lower()
            if direction not in DIRECTIONS:
                raise ValueError(f"{kind.value} needs a direction, got {self.argument!r}")
            object.__setattr__(self, "argument", direction)
        elif self.argument is not None:
            raise ValueError(f"{kind.value} takes no argument")

    @classmethod
    def press(cls) -> "Action":
        return cls(ActionType.PRESS)

    @classmethod
    def enter_text(cls, payload: str) -> "Action":
        return cls(ActionType.ENTER_TEXT, payload)

    @classmethod
    def scroll(cls, direction: str) -> "Action":
        return cls(ActionType.SCROLL, direction)

    @classmethod
    def swipe(cls, direction: str) -> "Action":
        return cls(ActionType.SWIPE, direction)

    @classmethod
    def open(cls, app: str) -> "Action":
        return cls(ActionType.OPEN, app)

    @classmethod
    def back(cls) -> "Action":
        return cls(ActionType.BACK)

    @classmethod
    def done(cls) -> "Action":
        return cls(ActionType.DONE)

    @property
    def needs_target(self) -> bool:
        return self.kind in REQUIRED_CAPABILITY

    @property
    def required_capability(self) -> Optional[UiCapability]:
        return REQUIRED_CAPABILITY.get(self.kind)

    def with_argument(self, argument: str) -> "Action":
        return Action(self.kind, argument)

    def __str__(self) -> str:
        return format_action(self)


def format_action(action: Action) -> str:
    """Canonical text form; ``parse_action_text`` reads it back."""
    if action.kind in (ActionType.ENTER_TEXT, ActionType.OPEN):
        return f"{action.kind.value} {json.dumps(action.argument, ensure_ascii=False)}"
    if action.kind in (ActionType.SCROLL, ActionType.SWIPE):
        return f"{action.kind.value} {action.argument.upper()}"
    return action.kind.value
