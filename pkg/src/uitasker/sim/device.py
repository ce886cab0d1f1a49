"""A scripted phone: a deterministic state machine over one or more app specs."""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from uitasker.actions import Action, ActionType
from uitasker.executor import DeviceInterface
from uitasker.sim.spec import AppSpec, ElementTemplate, Perturbation, Popup, Transition
from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiCapability, UiElement

TICK_SECONDS = 0.1


@dataclass
class _Frame:
    app: str
    screen: str
    fields: dict = field(default_factory=dict)


class _Formatter(dict):
    def __missing__(self, key: str) -> str:
        return ""


def _fill(text: Optional[str], params: dict) -> Optional[str]:
    if text is None or "{" not in text:
        return text
    try:
        return text.format_map(_Formatter(params))
    except (ValueError, IndexError, AttributeError):
        return text


class SimDevice(DeviceInterface):
    def __init__(
        self,
        apps: Union[AppSpec, Sequence[AppSpec]],
        *,
        perturbations: Iterable[Perturbation] = (),
        use_spec_perturbations: bool = True,
    ):
        apps = [apps] if isinstance(apps, AppSpec) else list(apps)
        if not apps:
            raise ValueError("at least one app spec is required")
        self.apps = {a.package_name: a for a in apps}
        self._launch = apps[0].package_name
        extra = list(perturbations)
        if use_spec_perturbations:
            extra = [p for a in apps for p in a.perturbations] + extra
        self.perturbations = tuple(sorted(extra, key=lambda p: p.after_step))
        self.reset()

    # -- state -----------------------------------------------------------
    def reset(self) -> None:
        app = self.apps[self._launch]
        self._frame = _Frame(app.package_name, app.initial_screen)
        self._stack: list[_Frame] = []
        self._params: dict[str, dict] = {p: dict(a.params) for p, a in self.apps.items()}
        self.tick = 0
        self.steps = 0
        self._popup: Optional[Popup] = None
        self._loading = 0
        self._shuffle: Optional[int] = None
        self.history: list[tuple[Action, Optional[int]]] = []
        self._index: dict[int, tuple[ElementTemplate, ...]] = {}

    @property
    def app(self) -> AppSpec:
        return self.apps[self._frame.app]

    @property
    def current_screen(self) -> str:
        return self._frame.screen

    @property
    def popup_active(self) -> bool:
        return self._popup is not None

    @property
    def params(self) -> dict:
        return dict(self._params[self._frame.app])

    @property
    def field_values(self) -> dict:
        """Text typed into editable fields on the current screen, keyed by field name."""
        return dict(self._frame.fields)

    def installed_apps(self) -> list[str]:
        return sorted(a.app_name for a in self.apps.values())

    def wait(self, seconds: float) -> None:
        ticks = max(1, int(round(seconds / TICK_SECONDS)))
        self.tick += ticks
        self._loading = max(0, self._loading - ticks)

    def goto(self, screen: str, params: Optional[dict] = None, package: Optional[str] = None) -> None:
        """Jump straight to ``screen`` with an empty back stack (for tests and rendering)."""
        package = package or self._frame.app
        if screen not in self.apps[package].screens:
            raise KeyError(screen)
        self._frame = _Frame(package, screen)
        self._stack = []
        if params:
            self._params[package].update(params)

    # -- rendering -------------------------------------------------------
    def snapshot(self) -> ScreenSnapshot:
        app = self.app
        screen = app.screen(self._frame.screen)
        width, height = app.resolution
        params = self._params[app.package_name]
        counter = iter(range(1, 1_000_000))
        index: dict[int, tuple[ElementTemplate, ...]] = {}

        def order(items: Sequence, salt: str) -> list:
            items = list(items)
            if self._shuffle is not None and len(items) > 1:
                seed = zlib.crc32(f"{self._shuffle}:{screen.name}:{salt}".encode())
                random.Random(seed).shuffle(items)
            return items

        def build(template: ElementTemplate, path: tuple) -> UiElement:
            element_id = next(counter)
            index[element_id] = path + (template,)
            text = _fill(template.text, params)
            key = template.resource_name or template.text or template.content_desc
            if UiCapability.TEXT_EDITABLE in template.actions and key in self._frame.fields:
                text = self._frame.fields[key]
            children = [build(c, path + (template,)) for c in order(template.children, key or "")]
            return UiElement(
                id=element_id,
                widget_class=template.widget_class,
                bounds=template.bounds,
                text=text,
                content_desc=_fill(template.content_desc, params),
                resource_name=template.resource_name,
                allowed_actions=template.actions,
                children=tuple(children),
            )

        children = [build(t, ()) for t in order(screen.elements, "root")]
        if self._loading > 0:
            children.append(
                UiElement(
                    id=next(counter),
                    widget_class="progress-indicator",
                    bounds=Bounds(width // 2 - 60, height // 2 - 60, 120, 120),
                    resource_name="loading_spinner",
                )
            )
        if self._popup is not None:
            overlay_id = next(counter)
            title = UiElement(next(counter), "label", Bounds(140, 700, 800, 160), text=self._popup.title)
            close = UiElement(
                next(counter),
                "button",
                Bounds(340, 1000, 400, 140),
                text=self._popup.close,
                resource_name="btn_close_popup",
                allowed_actions=frozenset({UiCapability.CLICKABLE}),
            )
            children.append(
                UiElement(overlay_id, "container", Bounds(0, 0, width, height), children=(title, close))
            )
        root = UiElement(0, "container", Bounds(0, 0, width, height), children=tuple(children))
        self._index = index
        return ScreenSnapshot(
            root=root,
            resolution=(width, height),
            app_name=app.app_name,
            package_name=app.package_name,
            activity_name=screen.activity,
            orientation="landscape" if width > height else "portrait",
            captured_at=self.tick,
        )

    # -- actions ---------------------------------------------------------
    def perform(self, action: Action, target: Optional[int] = None) -> bool:
        snap = self.snapshot()
        self.history.append((action, target))
        self.steps += 1
        self.tick += 1
        element = snap.find(target) if target is not None else None
        self._apply(action, target, element)
        for p in self.perturbations:
            if p.after_step == self.steps:
                self._trigger(p)
        return True

    def _trigger(self, p: Perturbation) -> None:
        if p.popup is not None:
            self._popup = p.popup
        if p.loading_ticks:
            self._loading = p.loading_ticks
        if p.shuffle_seed is not None:
            self._shuffle = p.shuffle_seed

    def _apply(self, action: Action, target: Optional[int], element: Optional[UiElement]) -> None:
        kind = action.kind
        if self._popup is not None:
            closes = kind is ActionType.BACK or (
                kind is ActionType.PRESS and element is not None and element.resource_name == "btn_close_popup"
            )
            if closes:
                self._popup = None
            return
        if kind is ActionType.DONE:
            return
        if kind is ActionType.BACK:
            if self._stack:
                self._frame = self._stack.pop()
            return
        if kind is ActionType.OPEN:
            wanted = action.argument.casefold()
            for package, app in self.apps.items():
                if wanted in (app.app_name.casefold(), package.casefold()):
                    self._navigate(package, app.initial_screen)
            return
        template = None
        if target is not None:
            path = self._index.get(target)
            if path is None or element is None:
                return
            template = path[-1]
            capability = action.required_capability
            if capability is not None and capability not in template.actions:
                return
        if kind is ActionType.ENTER_TEXT and template is not None:
            key = template.resource_name or template.text or template.content_desc
            self._frame.fields[key] = action.argument
        transition = self._match(kind, template, element, action.argument)
        if transition is None:
            return
        if transition.capture:
            value = action.argument if kind is ActionType.ENTER_TEXT else derive_label(element) if element else ""
            self._params[self._frame.app][transition.capture] = value
        if transition.to == self._frame.screen and kind is ActionType.ENTER_TEXT:
            return
        self._navigate(self._frame.app, transition.to)

    def _match(
        self, kind: ActionType, template: Optional[ElementTemplate], element: Optional[UiElement], argument
    ) -> Optional[Transition]:
        names = set()
        if template is not None:
            names = template.names()
            if element is not None:
                names.add(derive_label(element))
        for t in self.app.transitions:
            if t.screen != self._frame.screen or t.action is not kind:
                continue
            if t.target is not None and t.target not in names:
                continue
            if t.target is None and kind in (ActionType.PRESS, ActionType.ENTER_TEXT):
                continue
            if t.direction is not None and t.direction != argument:
                continue
            return t
        return None

    def _navigate(self, package: str, screen: str) -> None:
        self._stack.append(self._frame)
        self._frame = _Frame(package, screen)


def render_screen(app: AppSpec, screen: str, params: Optional[dict] = None) -> ScreenSnapshot:
    """Snapshot of ``screen`` as it would appear on a fresh device."""
    device = SimDevice(app, use_spec_perturbations=False)
    device.goto(screen, params)
    return device.snapshot()
