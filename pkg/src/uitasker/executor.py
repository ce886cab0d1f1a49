"""Apply one action to a device, wait for the screen to settle, and check it worked."""

from __future__ import annotations

import abc
import logging
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from uitasker.actions import Action, ActionType
from uitasker.ui.filtering import filter_noise
from uitasker.ui.fingerprint import ScreenFingerprint, fingerprint, hamming
from uitasker.ui.snapshot import ScreenSnapshot, UiElement

logger = logging.getLogger(__name__)

LOADING_KEYWORDS = ("progress", "loading", "spinner")
POLL_INTERVAL = 0.1
STABILIZE_DEADLINE = 10.0
CHANGE_THRESHOLD = 1


class DeviceInterface(abc.ABC):
    """What the engine needs from a phone; the simulator and real adapters implement it."""

    @abc.abstractmethod
    def snapshot(self) -> ScreenSnapshot: ...

    @abc.abstractmethod
    def perform(self, action: Action, target: Optional[int] = None) -> bool:
        """Apply ``action``; returns the device's acknowledgment."""

    @abc.abstractmethod
    def installed_apps(self) -> list[str]: ...

    def wait(self, seconds: float) -> None:
        time.sleep(seconds)


class StepStatus(str, Enum):
    SUCCEEDED = "Succeeded"
    NO_EFFECT = "NoEffect"
    FAILED = "Failed"


@dataclass(frozen=True)
class StepOutcome:
    status: StepStatus
    before_fp: ScreenFingerprint
    after_fp: ScreenFingerprint
    after: ScreenSnapshot
    reason: str = ""
    before: Optional[ScreenSnapshot] = None

    @property
    def succeeded(self) -> bool:
        return self.status is StepStatus.SUCCEEDED


def is_loading(snapshot: ScreenSnapshot) -> bool:
    for element in snapshot.root.iter_tree():
        if element.widget_class == "progress-indicator":
            return True
        name = (element.resource_name or "").lower()
        if any(k in name for k in LOADING_KEYWORDS):
            return True
    return False


def await_stable(
    device: DeviceInterface,
    *,
    poll_interval: float = POLL_INTERVAL,
    deadline: float = STABILIZE_DEADLINE,
) -> ScreenSnapshot:
    """Poll until no loading widget is shown and two consecutive polls agree.

    Past the deadline the latest snapshot is returned with ``possibly_loading`` set.
    """
    max_waits = max(int(round(deadline / poll_interval)), 0)
    previous: Optional[ScreenFingerprint] = None
    waits = 0
    while True:
        snap = device.snapshot()
        if is_loading(snap):
            current = None
        else:
            current = fingerprint(filter_noise(snap))
            if previous is not None and current == previous:
                return snap
        if waits >= max_waits:
            logger.debug("screen did not settle within %.1fs", deadline)
            return replace(snap, possibly_loading=True)
        previous = current
        device.wait(poll_interval)
        waits += 1


def _counterpart(element: UiElement, snapshot: ScreenSnapshot) -> Optional[UiElement]:
    """The element in ``snapshot`` that plays the role ``element`` had before."""
    candidates = [e for e in snapshot.root.iter_tree() if e.widget_class == element.widget_class]
    if element.resource_name:
        named = [e for e in candidates if e.resource_name == element.resource_name]
        if named:
            return min(named, key=lambda e: (e.bounds != element.bounds, e.id))
    same_place = [e for e in candidates if e.bounds == element.bounds]
    if same_place:
        return same_place[0]
    return snapshot.find(element.id)


def execute_step(
    device: DeviceInterface,
    action: Action,
    target: Optional[int] = None,
    *,
    before: Optional[ScreenSnapshot] = None,
    change_threshold: int = CHANGE_THRESHOLD,
    poll_interval: float = POLL_INTERVAL,
    deadline: float = STABILIZE_DEADLINE,
) -> StepOutcome:
    if before is None:
        before = await_stable(device, poll_interval=poll_interval, deadline=deadline)
    before_view = filter_noise(before)
    before_fp = fingerprint(before_view)

    if action.kind is ActionType.DONE:
        return StepOutcome(StepStatus.SUCCEEDED, before_fp, before_fp, before_view, before=before_view)

    element = None
    if action.needs_target:
        if target is None:
            return StepOutcome(
                StepStatus.FAILED, before_fp, before_fp, before_view, "MissingTarget", before_view
            )
        element = device.snapshot().find(target)
        if element is None:
            return StepOutcome(
                StepStatus.FAILED, before_fp, before_fp, before_view, "TargetVanished", before_view
            )

    device.perform(action, target if action.needs_target else None)
    after = await_stable(device, poll_interval=poll_interval, deadline=deadline)
    after_view = filter_noise(after)
    after_fp = fingerprint(after_view)

    if action.kind is ActionType.ENTER_TEXT:
        field = _counterpart(element, after_view)
        if field is not None and action.argument in (field.text or ""):
            status, reason = StepStatus.SUCCEEDED, ""
        else:
            status, reason = StepStatus.FAILED, "TextNotEntered"
    else:
        changed = (
            hamming(before_fp, after_fp) >= change_threshold
            or before_fp.element_count != after_fp.element_count
        )
        status, reason = (StepStatus.SUCCEEDED, "") if changed else (StepStatus.NO_EFFECT, "ScreenUnchanged")
    return StepOutcome(status, before_fp, after_fp, after_view, reason, before_view)
