"""Prompt construction: knowledge sections, few-shot exemplars, token budget."""

from __future__ import annotations

from typing import Optional, Sequence

from uitasker.actions import Action
from uitasker.prompting.builders import (
    DEFAULT_TOKEN_BUDGET,
    SECTION_ORDER,
    AppInfo,
    BudgetExceeded,
    NoCandidates,
    Prompt,
    PromptBuilder,
    SystemInfo,
    estimate_tokens,
    select_exemplars,
)
from uitasker.prompting.context import (
    NO_HISTORY,
    FailedAttempt,
    Step,
    TaskContext,
    render_task_history,
)
from uitasker.prompting.templates import (
    PROMPT_KINDS,
    Exemplar,
    PromptTemplate,
    TemplateError,
    TemplateSet,
    default_templates,
    parse_template,
)
from uitasker.ui.snapshot import ScreenSnapshot


def build_action_prompt(
    ctx: TaskContext,
    snapshot: ScreenSnapshot,
    app_info: Optional[AppInfo] = None,
    sys_info: Optional[SystemInfo] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    feedback: Sequence[str] = (),
    screen_key: Optional[str] = None,
) -> Prompt:
    builder = PromptBuilder(budget=budget)
    return builder.action_prompt(ctx, snapshot, app_info, sys_info, feedback=feedback, screen_key=screen_key)


def build_target_prompt(
    ctx: TaskContext, snapshot: ScreenSnapshot, action: Action, *, budget: int = DEFAULT_TOKEN_BUDGET
) -> Prompt:
    return PromptBuilder(budget=budget).target_prompt(ctx, snapshot, action)


def build_description_prompt(snapshot: ScreenSnapshot, *, budget: int = DEFAULT_TOKEN_BUDGET) -> Prompt:
    return PromptBuilder(budget=budget).description_prompt(snapshot)


def build_rank_prompt(request: str, screens, *, budget: int = DEFAULT_TOKEN_BUDGET) -> Prompt:
    return PromptBuilder(budget=budget).rank_prompt(request, screens)


def build_substitution_prompt(
    saved_command: str, new_command: str, actions: Sequence[str], *, budget: int = DEFAULT_TOKEN_BUDGET
) -> Prompt:
    return PromptBuilder(budget=budget).substitution_prompt(saved_command, new_command, actions)


__all__ = [
    "DEFAULT_TOKEN_BUDGET",
    "NO_HISTORY",
    "PROMPT_KINDS",
    "SECTION_ORDER",
    "AppInfo",
    "BudgetExceeded",
    "Exemplar",
    "FailedAttempt",
    "NoCandidates",
    "Prompt",
    "PromptBuilder",
    "PromptTemplate",
    "Step",
    "SystemInfo",
    "TaskContext",
    "TemplateError",
    "TemplateSet",
    "build_action_prompt",
    "build_description_prompt",
    "build_rank_prompt",
    "build_substitution_prompt",
    "build_target_prompt",
    "default_templates",
    "estimate_tokens",
    "parse_template",
    "render_task_history",
    "select_exemplars",
]
