"""Loading the bundled task corpora (see src/uitasker/fixtures/tasks)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import yaml

from uitasker.actions import ActionType
from uitasker.evaluation.metrics import EvalError
from uitasker.evaluation.scripting import ScriptStep
from uitasker.sim.device import render_screen
from uitasker.sim.spec import AppSpec, fixture_dir, load_app_spec
from uitasker.ui.filtering import filter_noise
from uitasker.ui.snapshot import ScreenSnapshot


@dataclass(frozen=True)
class ParserCase:
    command: str
    snapshot_ref: str  # "app:screen"
    gold_action: ActionType
    gold_target: Optional[str] = None
    params: tuple[tuple[str, str], ...] = ()
    answer: Optional[ScriptStep] = None

    @property
    def app(self) -> str:
        return self.snapshot_ref.split(":", 1)[0]

    @property
    def screen(self) -> str:
        return self.snapshot_ref.split(":", 1)[1]


@dataclass(frozen=True)
class MultistepTask:
    id: str
    app: str
    command: str
    demo_steps: int
    gold_screen: str
    script: tuple[ScriptStep, ...]

    @property
    def budget(self) -> int:
        return self.demo_steps + 3


@dataclass(frozen=True)
class RecordedTask:
    command: str
    gold_screen: str
    steps: tuple[ScriptStep, ...]


@dataclass(frozen=True)
class ReplayTask:
    command: str
    base: int
    category: str  # "direct" | "parameterized"
    expect_text: Optional[str] = None
    mapping: tuple[tuple[str, str], ...] = ()


@dataclass
class ReplayApp:
    app: str
    record: list[RecordedTask] = field(default_factory=list)
    direct: list[ReplayTask] = field(default_factory=list)
    parameterized: list[ReplayTask] = field(default_factory=list)

    def tasks(self) -> list[ReplayTask]:
        return self.direct + self.parameterized


@dataclass(frozen=True)
class FixtureSet:
    """A fixtures directory: ``apps/*.yaml`` plus ``tasks/*.yaml``."""

    root: Path

    @classmethod
    def bundled(cls) -> "FixtureSet":
        return cls(fixture_dir())

    def app(self, name: str) -> AppSpec:
        return load_app_spec(self.root / "apps" / f"{name}.yaml")

    def apps(self) -> dict[str, AppSpec]:
        return {p.stem: load_app_spec(p) for p in sorted((self.root / "apps").glob("*.yaml"))}

    def task_file(self, name: str) -> Path:
        return self.root / "tasks" / f"{name}.yaml"


def _read(path: Union[str, Path]) -> Mapping:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text("utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise EvalError(f"cannot read {path}: {exc}") from None
    if not isinstance(doc, Mapping):
        raise EvalError(f"{path}: expected a mapping at top level")
    return doc


def _steps(raw) -> tuple[ScriptStep, ...]:
    return tuple(ScriptStep.from_document(s) for s in raw or ())


def _pairs(raw) -> tuple[tuple[str, str], ...]:
    return tuple((str(k), str(v)) for k, v in (raw or {}).items())


def load_parser_cases(path: Union[str, Path]) -> list[ParserCase]:
    cases = []
    for raw in _read(path).get("cases") or []:
        ref = str(raw["snapshot"])
        if ":" not in ref:
            raise EvalError(f"snapshot reference {ref!r} must look like app:screen")
        answer = raw.get("answer")
        cases.append(
            ParserCase(
                command=str(raw["command"]),
                snapshot_ref=ref,
                gold_action=ActionType(str(raw["gold_action"]).upper()),
                gold_target=None if raw.get("gold_target") is None else str(raw["gold_target"]),
                params=_pairs(raw.get("params")),
                answer=ScriptStep.from_document(answer) if answer else None,
            )
        )
    return cases


def load_multistep_tasks(path: Union[str, Path]) -> list[MultistepTask]:
    tasks = []
    for raw in _read(path).get("tasks") or []:
        tasks.append(
            MultistepTask(
                id=str(raw["id"]),
                app=str(raw["app"]),
                command=str(raw["command"]),
                demo_steps=int(raw["demo_steps"]),
                gold_screen=str(raw["gold_screen"]),
                script=_steps(raw.get("script")),
            )
        )
    return tasks


def load_replay_suite(path: Union[str, Path]) -> list[ReplayApp]:
    suite = []
    for name, body in (_read(path).get("apps") or {}).items():
        entry = ReplayApp(str(name))
        for raw in body.get("record") or []:
            entry.record.append(RecordedTask(str(raw["command"]), str(raw["gold_screen"]), _steps(raw["steps"])))
        for category in ("direct", "parameterized"):
            for raw in body.get(category) or []:
                base = int(raw["base"])
                if not 0 <= base < len(entry.record):
                    raise EvalError(f"{name}: task {raw['command']!r} refers to unknown recording {base}")
                task = ReplayTask(
                    command=str(raw["command"]),
                    base=base,
                    category=category,
                    expect_text=None if raw.get("expect_text") is None else str(raw["expect_text"]),
                    mapping=_pairs(raw.get("mapping")),
                )
                getattr(entry, category).append(task)
        suite.append(entry)
    return suite


def case_snapshot(case: ParserCase, apps: Mapping[str, AppSpec]) -> ScreenSnapshot:
    try:
        app = apps[case.app]
        return filter_noise(render_screen(app, case.screen, dict(case.params)))
    except KeyError as exc:
        raise EvalError(f"unknown snapshot reference {case.snapshot_ref!r}: {exc}") from None
