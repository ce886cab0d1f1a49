"""Prompt assembly for every LLM call the engine makes.

Every prompt is: preamble, knowledge sections in a fixed order, as many
few-shot exemplars as the token budget allows, then the query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from uitasker.actions import Action, format_action
from uitasker.prompting.context import TaskContext, render_task_history
from uitasker.prompting.templates import Exemplar, TemplateSet, default_templates
from uitasker.ui.serialize import element_line, serialize_for_prompt
from uitasker.ui.snapshot import ScreenSnapshot

DEFAULT_TOKEN_BUDGET = 6000
SECTION_ORDER = ("APP", "SYSTEM", "UI", "TASK", "FEEDBACK", "FAILED_ATTEMPTS")
_SEPARATOR = "\n\n"


class BudgetExceeded(Exception):
    pass


class NoCandidates(Exception):
    pass


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class AppInfo:
    app_name: str
    package_name: str
    activities: tuple[str, ...] = ()

    @classmethod
    def from_snapshot(cls, snapshot: ScreenSnapshot) -> "AppInfo":
        activities = (snapshot.activity_name,) if snapshot.activity_name else ()
        return cls(snapshot.app_name, snapshot.package_name, activities)


@dataclass(frozen=True)
class SystemInfo:
    resolution: tuple[int, int]
    orientation: str = "portrait"

    @classmethod
    def from_snapshot(cls, snapshot: ScreenSnapshot) -> "SystemInfo":
        return cls(snapshot.resolution, snapshot.orientation)


@dataclass(frozen=True)
class Prompt:
    kind: str
    task_preamble: str
    knowledge_sections: tuple[tuple[str, str], ...]
    exemplars: tuple[Exemplar, ...]
    query: str
    budget: int = DEFAULT_TOKEN_BUDGET
    # Candidate element ids for target prompts.
    candidates: tuple[int, ...] = field(default=(), compare=False)

    def blocks(self) -> list[str]:
        out = [self.task_preamble]
        out.extend(_section_block(name, text) for name, text in self.knowledge_sections)
        out.extend(_exemplar_block(i, e) for i, e in enumerate(self.exemplars, start=1))
        out.append(_query_block(self.query))
        return out

    def render(self) -> str:
        return _SEPARATOR.join(self.blocks())

    @property
    def estimated_tokens(self) -> int:
        return estimate_tokens(self.render())

    def with_suffix(self, suffix: str) -> "Prompt":
        """Append ``suffix`` to the query, dropping trailing exemplars to stay in budget."""
        exemplars = list(self.exemplars)
        while True:
            prompt = Prompt(
                self.kind,
                self.task_preamble,
                self.knowledge_sections,
                tuple(exemplars),
                f"{self.query}\n{suffix}",
                self.budget,
                self.candidates,
            )
            if prompt.estimated_tokens <= self.budget or not exemplars:
                return prompt
            exemplars.pop()


def _section_block(name: str, text: str) -> str:
    return f"## {name}\n{text}"


def _exemplar_block(index: int, exemplar: Exemplar) -> str:
    return (
        f"## EXAMPLE {index}\n{exemplar.sample_prompt}\n"
        f"THOUGHT: {exemplar.chain_of_thought}\nRESULT: {exemplar.sample_response}"
    )


def _query_block(query: str) -> str:
    return f"## QUERY\n{query}"


def _cost(block: str) -> int:
    # Costing each block with its separator over-estimates the joined text.
    return estimate_tokens(block + _SEPARATOR)


def select_exemplars(pool: Sequence[Exemplar], budget_remaining: int, *, first_index: int = 1) -> list[Exemplar]:
    """Longest prefix of ``pool`` whose rendered cost fits ``budget_remaining``."""
    chosen: list[Exemplar] = []
    spent = 0
    for index, exemplar in enumerate(pool, start=first_index):
        cost = _cost(_exemplar_block(index, exemplar))
        if spent + cost > budget_remaining:
            break
        chosen.append(exemplar)
        spent += cost
    return chosen


class PromptBuilder:
    def __init__(self, templates: Optional[TemplateSet] = None, budget: int = DEFAULT_TOKEN_BUDGET):
        self.templates = templates or default_templates()
        self.budget = budget

    def _assemble(
        self,
        kind: str,
        sections: dict[str, str],
        values: dict[str, str],
        candidates: tuple[int, ...] = (),
    ) -> Prompt:
        template = self.templates[kind]
        ordered = tuple((name, sections[name]) for name in SECTION_ORDER if sections.get(name))
        query = template.fill(template.query, values)
        preamble = template.fill(template.preamble, values)
        mandatory = _cost(preamble) + _cost(_query_block(query))
        mandatory += sum(_cost(_section_block(n, t)) for n, t in ordered)
        if mandatory > self.budget:
            raise BudgetExceeded(
                f"{kind} prompt needs {mandatory} tokens before exemplars; budget is {self.budget}"
            )
        exemplars = select_exemplars(template.exemplars, self.budget - mandatory)
        return Prompt(kind, preamble, ordered, tuple(exemplars), query, self.budget, candidates)

    def action_prompt(
        self,
        ctx: TaskContext,
        snapshot: ScreenSnapshot,
        app_info: Optional[AppInfo] = None,
        sys_info: Optional[SystemInfo] = None,
        *,
        screen_key: Optional[str] = None,
        feedback: Sequence[str] = (),
    ) -> Prompt:
        app_info = app_info or AppInfo.from_snapshot(snapshot)
        sys_info = sys_info or SystemInfo.from_snapshot(snapshot)
        sections = {
            "APP": _app_text(app_info, snapshot.activity_name),
            "SYSTEM": _system_text(sys_info),
            "UI": serialize_for_prompt(snapshot),
            "TASK": _task_text(ctx),
            "FEEDBACK": "\n".join(f"- {note}" for note in feedback),
            "FAILED_ATTEMPTS": _failures_text(ctx, screen_key),
        }
        return self._assemble("action", sections, {"command": ctx.command})

    def target_prompt(
        self,
        ctx: TaskContext,
        snapshot: ScreenSnapshot,
        action: Action,
        *,
        screen_key: Optional[str] = None,
        feedback: Sequence[str] = (),
    ) -> Prompt:
        capability = action.required_capability
        if capability is None:
            raise ValueError(f"{action.kind.value} does not take a target")
        candidates = [e for e in snapshot.root.iter_tree() if e.allows(capability)]
        if not candidates:
            raise NoCandidates(f"no element on screen supports {action.kind.value}")
        sections = {
            "APP": _app_text(AppInfo.from_snapshot(snapshot), snapshot.activity_name),
            "SYSTEM": _system_text(SystemInfo.from_snapshot(snapshot)),
            "UI": "\n".join(element_line(e) for e in candidates),
            "TASK": _task_text(ctx),
            "FEEDBACK": "\n".join(f"- {note}" for note in feedback),
            "FAILED_ATTEMPTS": _failures_text(ctx, screen_key),
        }
        values = {"command": ctx.command, "action": format_action(action)}
        return self._assemble("target", sections, values, tuple(e.id for e in candidates))

    def description_prompt(self, snapshot: ScreenSnapshot) -> Prompt:
        sections = {
            "APP": _app_text(AppInfo.from_snapshot(snapshot), snapshot.activity_name),
            "UI": serialize_for_prompt(snapshot),
        }
        return self._assemble("description", sections, {})

    def rank_prompt(self, request: str, screens: Sequence[tuple[int, str, Sequence[str]]]) -> Prompt:
        lines = []
        for node_id, description, served in screens:
            lines.append(f"[{node_id}] {description}")
            if served:
                lines.append("    served commands: " + "; ".join(served))
        values = {"request": request, "screens": "\n".join(lines) or "(no saved screens)"}
        return self._assemble("rank", {}, values)

    def substitution_prompt(self, saved_command: str, new_command: str, actions: Sequence[str]) -> Prompt:
        listing = "\n".join(f"{i}. {a}" for i, a in enumerate(actions, start=1))
        values = {
            "saved_command": saved_command,
            "new_command": new_command,
            "actions": listing or "(empty)",
        }
        return self._assemble("substitution", {}, values)


def _app_text(app: AppInfo, activity: str) -> str:
    lines = [f"App name: {app.app_name}", f"Package: {app.package_name}"]
    if activity:
        lines.append(f"Current activity: {activity}")
    if app.activities:
        lines.append("Known activities: " + ", ".join(app.activities))
    return "\n".join(lines)


def _system_text(sys_info: SystemInfo) -> str:
    width, height = sys_info.resolution
    return f"Screen resolution: {width}x{height} ({sys_info.orientation})"


def _task_text(ctx: TaskContext) -> str:
    lines = [f"User command: {ctx.command}", f"History: {render_task_history(ctx)}"]
    if ctx.visited_pages:
        lines.append("Visited pages: " + ", ".join(ctx.visited_pages))
    return "\n".join(lines)


def _failures_text(ctx: TaskContext, screen_key: Optional[str]) -> str:
    if screen_key is None:
        attempts = [a for group in ctx.failed_attempts.values() for a in group]
    else:
        attempts = ctx.failures_on(screen_key)
    if not attempts:
        return ""
    header = "These actions were already tried on this screen and failed; choose something else:"
    return header + "\n" + "\n".join(f"- {a.describe()}" for a in attempts)

