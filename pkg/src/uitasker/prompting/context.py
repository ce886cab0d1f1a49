"""Task knowledge: what has been asked, done and ruled out so far."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from uitasker.actions import Action, format_action

NO_HISTORY = "No previous steps."


@dataclass(frozen=True)
class Step:
    page: str
    action: Action
    target: Optional[str] = None
    landed: str = ""

    def describe(self) -> str:
        text = format_action(self.action)
        return f"{text} {self.target}" if self.target else text


@dataclass(frozen=True)
class FailedAttempt:
    action: Action
    target: Optional[str] = None
    reason: str = "no effect"

    def describe(self) -> str:
        text = format_action(self.action)
        if self.target:
            text = f"{text} {self.target}"
        return f"{text} ({self.reason})"


@dataclass
class TaskContext:
    command: str
    steps: list[Step] = field(default_factory=list)
    visited_pages: list[str] = field(default_factory=list)
    # Keyed by screen fingerprint (hex).
    failed_attempts: dict[str, list[FailedAttempt]] = field(default_factory=dict)
    step_cap: int = 15

    def record_step(self, screen_key: str, step: Step) -> None:
        if len(self.steps) >= self.step_cap:
            raise ValueError("step cap reached")
        self.steps.append(step)
        if not self.visited_pages:
            self.visited_pages.append(step.page)
        if step.landed:
            self.visited_pages.append(step.landed)
        failures = self.failed_attempts.get(screen_key)
        if failures:
            self.failed_attempts[screen_key] = [
                f for f in failures if (f.action, f.target) != (step.action, step.target)
            ]

    def record_failure(self, screen_key: str, attempt: FailedAttempt) -> None:
        self.failed_attempts.setdefault(screen_key, []).append(attempt)

    def failures_on(self, screen_key: str) -> list[FailedAttempt]:
        return list(self.failed_attempts.get(screen_key, ()))


def render_task_history(ctx: TaskContext) -> str:
    if not ctx.steps:
        return NO_HISTORY
    clauses = []
    for index, step in enumerate(ctx.steps):
        lead = f"Started from {step.page}, we" if index == 0 else "After that, we"
        clause = f"{lead} {step.describe()}"
        if step.landed:
            clause += f" to get to {step.landed}"
        clauses.append(clause + ".")
    return " ".join(clauses)
