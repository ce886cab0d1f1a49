"""Turn human-readable step lists into scripted backend replies.

Fixture scripts name targets by resource name or label; the element ids a
backend must answer with depend on the screen, so the steps are walked on a
private simulator to compile them into concrete ``THOUGHT/RESULT`` replies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from uitasker.actions import Action, ActionType, format_action
from uitasker.backend.scripted import ScriptEntry, reply
from uitasker.sim.device import SimDevice
from uitasker.sim.spec import AppSpec
from uitasker.ui.filtering import filter_noise
from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import ScreenSnapshot, UiCapability, UiElement


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class ScriptStep:
    action: ActionType
    target: Optional[str] = None
    text: Optional[str] = None
    direction: Optional[str] = None

    @classmethod
    def from_document(cls, raw: Mapping) -> "ScriptStep":
        try:
            kind = ActionType(str(raw["action"]).upper())
        except (KeyError, ValueError):
            raise ScriptError(f"bad step {dict(raw)!r}") from None
        text = raw.get("text")
        return cls(
            kind,
            None if raw.get("target") is None else str(raw["target"]),
            None if text is None else str(text),
            raw.get("direction"),
        )

    def to_action(self) -> Action:
        if self.action in (ActionType.ENTER_TEXT, ActionType.OPEN):
            return Action(self.action, self.text)
        if self.action in (ActionType.SCROLL, ActionType.SWIPE):
            return Action(self.action, self.direction or "down")
        return Action(self.action)


def find_element(snapshot: ScreenSnapshot, name: str, capability: Optional[UiCapability] = None) -> UiElement:
    """Element whose resource name, label, text or description is ``name``."""
    wanted = name.casefold()
    matches = []
    for element in snapshot.root.iter_tree():
        names = {derive_label(element), element.resource_name, element.text, element.content_desc}
        if wanted in {n.casefold() for n in names if n}:
            matches.append(element)
    if capability is not None:
        capable = [e for e in matches if e.allows(capability)]
        matches = capable or matches
    if not matches:
        raise ScriptError(f"no element named {name!r} on {snapshot.activity_name}")
    exact = [e for e in matches if derive_label(e).casefold() == wanted]
    return (exact or matches)[0]


def target_reply(element: UiElement) -> str:
    label = derive_label(element).replace('"', "'")
    b = element.bounds
    return f'[{element.id}] "{label}" ({b.x},{b.y},{b.w},{b.h})'


def compile_script(app: AppSpec, steps: Sequence[ScriptStep]) -> list[ScriptEntry]:
    """Strict-mode entries answering the action/target prompts of ``steps``."""
    device = SimDevice(app, use_spec_perturbations=False)
    entries = []
    for step in steps:
        action = step.to_action()
        entries.append(ScriptEntry("action", reply(format_action(action))))
        target = None
        if action.needs_target:
            if step.target is None:
                raise ScriptError(f"{action.kind.value} step needs a target")
            element = find_element(filter_noise(device.snapshot()), step.target, action.required_capability)
            entries.append(ScriptEntry("target", reply(target_reply(element))))
            target = element.id
        if action.kind is not ActionType.DONE:
            device.perform(action, target)
    return entries


def navigate(device: SimDevice, steps: Sequence[ScriptStep]) -> None:
    """Drive ``device`` through ``steps`` directly, without any backend."""
    for step in steps:
        action = step.to_action()
        if action.kind is ActionType.DONE:
            continue
        target = None
        if action.needs_target:
            target = find_element(filter_noise(device.snapshot()), step.target, action.required_capability).id
        device.perform(action, target)
