"""The command pipeline: replay a saved route when one exists, explore otherwise.

Every step is validated.  A replay step that lands somewhere unexpected is
reverted with a single BACK, the current screen is located again and a new
route is planned without the failed edge; when no route is left the task
continues by step-by-step exploration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from uitasker.actions import Action, ActionType, format_action
from uitasker.backend.base import BackendError, LmBackend, UnparseableResponse
from uitasker.backend.parsing import (
    ActionNotAllowed,
    UnknownElement,
    parse_action_response,
    parse_target_response,
)
from uitasker.executor import (
    CHANGE_THRESHOLD,
    POLL_INTERVAL,
    STABILIZE_DEADLINE,
    DeviceInterface,
    StepOutcome,
    StepStatus,
    await_stable,
    execute_step,
)
from uitasker.graph.matching import (
    SUBSTITUTABLE,
    SubstitutionRefused,
    describe_screen,
    find_destination,
    locate_current,
    parameterize,
)
from uitasker.graph.model import AppGraph, TargetLocator, TransitionEdge, page_label, record_transition
from uitasker.graph.paths import NoPath, shortest_path
from uitasker.prompting.builders import DEFAULT_TOKEN_BUDGET, BudgetExceeded, NoCandidates, PromptBuilder
from uitasker.prompting.context import FailedAttempt, Step, TaskContext
from uitasker.ui.anonymize import anonymize
from uitasker.ui.filtering import filter_noise
from uitasker.ui.fingerprint import fingerprint, layout_signature
from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import ScreenSnapshot

logger = logging.getLogger(__name__)

FORMAT_REMINDER = (
    "Your previous reply could not be read. Answer with a THOUGHT: line "
    "followed by a RESULT: line in exactly the format requested above."
)


@dataclass
class Config:
    step_cap: int = 15
    retry_budget: int = 3
    max_divergences: int = 3
    token_budget: int = DEFAULT_TOKEN_BUDGET
    change_threshold: int = CHANGE_THRESHOLD
    poll_interval: float = POLL_INTERVAL
    stabilize_deadline: float = STABILIZE_DEADLINE
    # Ask the backend for screen summaries when new nodes are created.
    describe_with_lm: bool = False


class TaskStatus(str, Enum):
    COMPLETED = "Completed"
    STEP_CAP_EXCEEDED = "StepCapExceeded"
    UNRECOVERABLE = "Unrecoverable"


class PathSource(str, Enum):
    REPLAYED = "Replayed"
    EXPLORED = "Explored"
    HYBRID = "Hybrid"


class Validation(str, Enum):
    MATCHED = "Matched"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class TraceEvent:
    step: int  # device actions performed so far
    phase: str  # locate, destination, plan, substitute, replay, validate, revert, explore, done, end
    result: str
    prompt_kind: Optional[str] = None
    action: Optional[str] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "phase": self.phase,
            "result": self.result,
            "prompt_kind": self.prompt_kind,
            "action": self.action,
            "detail": self.detail,
        }

    def __str__(self) -> str:
        parts = [f"[{self.step:>2}] {self.phase:<11} {self.result}"]
        if self.action:
            parts.append(self.action)
        if self.detail:
            parts.append(f"({self.detail})")
        return " ".join(parts)


@dataclass
class TaskResult:
    command: str
    status: TaskStatus
    steps_taken: int
    path_source: PathSource
    final_node: Optional[int] = None
    reason: str = ""
    trace: list[TraceEvent] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status is TaskStatus.COMPLETED

    def events(self, phase: str) -> list[TraceEvent]:
        return [e for e in self.trace if e.phase == phase]


class _Stop(Exception):
    def __init__(self, status: TaskStatus, reason: str = ""):
        super().__init__(reason)
        self.status = status
        self.reason = reason


def validate_replay_step(
    expected_node: int,
    after_snapshot: ScreenSnapshot,
    graph: AppGraph,
    lm: Optional[LmBackend] = None,
    builder: Optional[PromptBuilder] = None,
) -> Validation:
    """Did a replayed step land on the node the saved edge promised?"""
    node = graph.nodes.get(expected_node)
    if node is None:
        return Validation.DIVERGED
    signature = layout_signature(after_snapshot)
    if signature == node.layout_signature:
        return Validation.MATCHED
    if graph.node_for_signature(signature) is not None:
        return Validation.DIVERGED
    located = locate_current(graph, after_snapshot, lm, builder)
    return Validation.MATCHED if located == expected_node else Validation.DIVERGED


class Orchestrator:
    def __init__(
        self,
        device: DeviceInterface,
        graph: AppGraph,
        lm: LmBackend,
        config: Optional[Config] = None,
        *,
        listener: Optional[Callable[[TraceEvent], None]] = None,
    ):
        self.device = device
        self.graph = graph
        self.lm = lm
        self.config = config or Config()
        self.builder = PromptBuilder(budget=self.config.token_budget)
        self.listener = listener

    # -- bookkeeping -----------------------------------------------------
    def _emit(self, phase: str, result: str, **kw) -> None:
        event = TraceEvent(self._steps, phase, result, **kw)
        self._trace.append(event)
        if self.listener is not None:
            self.listener(event)

    def _observe(self) -> tuple[ScreenSnapshot, ScreenSnapshot]:
        """Raw snapshot for the device plus the filtered, redacted view the engine reasons on."""
        raw = await_stable(
            self.device, poll_interval=self.config.poll_interval, deadline=self.config.stabilize_deadline
        )
        view, _ = anonymize(filter_noise(raw))
        return raw, view

    def _view_of(self, outcome: StepOutcome) -> ScreenSnapshot:
        return anonymize(outcome.after)[0]

    def _ensure(self, view: ScreenSnapshot) -> int:
        existing = self.graph.node_for_signature(layout_signature(view))
        if existing is not None:
            return existing
        description = describe_screen(view, self.lm if self.config.describe_with_lm else None, self.builder)
        return self.graph.ensure_node(view, description)

    def _record(self, before: ScreenSnapshot, action: Action, target: Optional[int], after: ScreenSnapshot) -> None:
        if action.kind in (ActionType.BACK, ActionType.DONE):
            return
        self._ensure(before)
        self._ensure(after)
        record_transition(self.graph, before, action, target, after)

    def _act(self, action: Action, target: Optional[int], raw: ScreenSnapshot) -> StepOutcome:
        if self._steps >= self.config.step_cap:
            raise _Stop(TaskStatus.STEP_CAP_EXCEEDED, f"step cap {self.config.step_cap} reached")
        outcome = execute_step(
            self.device,
            action,
            target,
            before=raw,
            change_threshold=self.config.change_threshold,
            poll_interval=self.config.poll_interval,
            deadline=self.config.stabilize_deadline,
        )
        if action.kind is not ActionType.DONE:
            self._steps += 1
        return outcome

    def _finish(self, node_id: int) -> None:
        self.graph.add_served_command(node_id, self._ctx.command)
        self._final = node_id

    # -- pipeline --------------------------------------------------------
    def handle_command(self, command: str) -> TaskResult:
        self._steps = 0
        self._trace: list[TraceEvent] = []
        self._ctx = TaskContext(command, step_cap=self.config.step_cap)
        self._final: Optional[int] = None
        self._replayed = 0
        self._explored = False
        self._failures: dict[str, int] = {}
        self._failed_triples: set = set()
        # (screen key, prompt kind) pairs whose last reply was unparseable.
        self._unreadable: set = set()
        status, reason = TaskStatus.COMPLETED, ""
        try:
            if not self._try_replay():
                self._explored = True
                self._explore()
        except _Stop as stop:
            status, reason = stop.status, stop.reason
        except BackendError as exc:
            status, reason = TaskStatus.UNRECOVERABLE, f"backend error: {exc}"
        if self._explored:
            source = PathSource.HYBRID if self._replayed else PathSource.EXPLORED
        else:
            source = PathSource.REPLAYED
        self._emit("end", status.value, detail=reason)
        return TaskResult(command, status, self._steps, source, self._final, reason, list(self._trace))

    def _try_replay(self) -> bool:
        raw, view = self._observe()
        current = locate_current(self.graph, view, self.lm, self.builder)
        self._emit("locate", "NONE" if current is None else str(current), prompt_kind=None)
        if current is None:
            return False
        dest = find_destination(self.graph, self._ctx.command, self.lm, self.builder)
        self._emit("destination", "NONE" if dest is None else str(dest))
        if dest is None:
            return False

        excluded: set = set()
        adapted: dict[Action, Action] = {}
        divergences = 0
        while current != dest:
            try:
                path = shortest_path(self.graph, current, dest, excluded)
            except NoPath:
                self._emit("plan", "NoPath", detail=f"{current} -> {dest}")
                return False
            path, saved = self._align(path, dest, excluded)
            self._emit("plan", f"{len(path)} steps", detail=" -> ".join(str(n) for n in [current] + [e.dest for e in path]))
            try:
                actions = self._adapt(path, saved, adapted)
            except SubstitutionRefused as exc:
                self._emit("substitute", "Refused", prompt_kind="substitution", detail=str(exc))
                return False
            for edge, action in zip(path, actions):
                landed = self._replay_edge(edge, action)
                if landed == edge.dest:
                    current = edge.dest
                    continue
                divergences += 1
                if landed is None or divergences > self.config.max_divergences:
                    return False
                if landed == edge.source:
                    excluded.add(edge.key)
                current = landed
                break
        self._emit("done", "Completed", detail=f"node {dest}")
        self._finish(dest)
        return True

    def _adapt(self, path: list[TransitionEdge], saved: str, adapted: dict) -> list[Action]:
        originals = [e.action for e in path]
        todo = [a for a in originals if a.kind in SUBSTITUTABLE and a not in adapted]
        if todo:
            labels = [e.locator.describe() if e.locator else None for e in path]
            new = parameterize(originals, saved, self._ctx.command, self.lm, self.builder, labels=labels)
            for old, replacement in zip(originals, new):
                adapted.setdefault(old, replacement)
            changed = [f"{format_action(o)} -> {format_action(n)}" for o, n in zip(originals, new) if o != n]
            self._emit(
                "substitute",
                "Rewritten" if changed else "Unchanged",
                prompt_kind="substitution",
                detail="; ".join(changed),
            )
        return [adapted.get(a, a) for a in originals]

    def _align(self, path: list[TransitionEdge], dest: int, excluded: set) -> tuple[list[TransitionEdge], str]:
        """Pick the saved command to adapt from and make the path type its payloads.

        Parallel edges that differ only in their typed text are equally short,
        so the planner may mix payloads from different recordings.  Each saved
        command of ``dest`` is tried, closest in wording to the new command
        first (most recent on ties); the first one whose payloads can all be
        matched by a parallel edge wins.
        """
        served = self.graph.node(dest).served_commands
        if not served:
            return path, ""
        words = set(self._ctx.command.casefold().split())
        ranked = sorted(
            range(len(served)),
            key=lambda i: (-len(words & set(served[i].casefold().split())), -i),
        )
        for i in ranked:
            command = served[i].casefold()
            aligned = []
            for edge in path:
                if edge.action.kind not in SUBSTITUTABLE or edge.action.argument.casefold() in command:
                    aligned.append(edge)
                    continue
                twin = next(
                    (
                        e
                        for e in self.graph.out_edges(edge.source)
                        if e.dest == edge.dest
                        and e.locator == edge.locator
                        and e.action.kind == edge.action.kind
                        and e.key not in excluded
                        and (e.action.argument or "").casefold() in command
                    ),
                    None,
                )
                if twin is None:
                    break
                aligned.append(twin)
            else:
                return aligned, served[i]
        return path, served[ranked[0]]

    def _replay_edge(self, edge: TransitionEdge, action: Action) -> Optional[int]:
        """Execute one saved edge; returns the node the device ended up on."""
        raw, view = self._observe()
        target = None
        if action.needs_target:
            element = edge.locator.resolve(view, action.required_capability) if edge.locator else None
            if element is None:
                self._emit("validate", Validation.DIVERGED.value, action=edge.describe(), detail="target not found")
                return locate_current(self.graph, view, self.lm, self.builder)
            target = element.id
        outcome = self._act(action, target, raw)
        after = self._view_of(outcome)
        label = edge.locator.describe() if edge.locator else None
        if outcome.succeeded:
            verdict = validate_replay_step(edge.dest, after, self.graph, self.lm, self.builder)
        else:
            verdict = Validation.DIVERGED
        self._emit(
            "replay",
            outcome.status.value,
            action=f"{format_action(action)} {label}" if label else format_action(action),
            detail=outcome.reason,
        )
        self._emit("validate", verdict.value, detail=f"expected node {edge.dest}")
        if verdict is Validation.MATCHED:
            self._replayed += 1
            edge.traversal_count += 1
            self._ctx.record_step(
                outcome.before_fp.hex(),
                Step(page_label(view.activity_name), action, label, page_label(after.activity_name)),
            )
            return edge.dest
        if outcome.after_fp != outcome.before_fp:
            back = self._act(Action(ActionType.BACK), None, outcome.after)
            self._emit("revert", back.status.value, action="BACK")
        _, here = self._observe()
        located = locate_current(self.graph, here, self.lm, self.builder)
        self._emit("locate", "NONE" if located is None else str(located), detail="after divergence")
        return located

    # -- exploration -----------------------------------------------------
    def _remind(self, prompt, key: str):
        """Append the format reminder when this screen's last reply of this kind was unreadable."""
        if (key, prompt.kind) in self._unreadable:
            return prompt.with_suffix(FORMAT_REMINDER)
        return prompt

    def exploration_step(self) -> Optional[StepOutcome]:
        """One predicted step on the current screen; None once the backend says DONE."""
        ctx = self._ctx
        raw, view = self._observe()
        key = fingerprint(view).hex()
        node = self.graph.node_for_signature(layout_signature(view))
        notes = self.graph.nodes[node].feedback_notes if node is not None else []

        def fail(action: Optional[Action], target_label: Optional[str], reason: str) -> None:
            if action is not None:
                ctx.record_failure(key, FailedAttempt(action, target_label, reason))
            count = self._failures.get(key, 0) + 1
            self._failures[key] = count
            if count >= self.config.retry_budget:
                raise _Stop(
                    TaskStatus.UNRECOVERABLE,
                    f"retry budget of {self.config.retry_budget} spent on {page_label(view.activity_name)} ({reason})",
                )

        try:
            prompt = self._remind(self.builder.action_prompt(ctx, view, screen_key=key, feedback=notes), key)
        except BudgetExceeded as exc:
            raise _Stop(TaskStatus.UNRECOVERABLE, str(exc)) from None
        try:
            action = parse_action_response(self.lm.complete(prompt))
            self._unreadable.discard((key, "action"))
        except UnparseableResponse as exc:
            self._unreadable.add((key, "action"))
            self._emit("explore", "Unparseable", prompt_kind="action", detail=str(exc))
            fail(None, None, "unparseable action")
            fp = fingerprint(view)
            return StepOutcome(StepStatus.FAILED, fp, fp, view, "Unparseable", view)
        self._emit("explore", "Proposed", prompt_kind="action", action=format_action(action))

        if action.kind is ActionType.DONE:
            node_id = self._ensure(view)
            self._emit("done", "Completed", detail=f"node {node_id}")
            self._finish(node_id)
            return None

        element = None
        locator = None
        if action.needs_target:
            try:
                prompt = self.builder.target_prompt(ctx, view, action, screen_key=key, feedback=notes)
                response = self.lm.complete(self._remind(prompt, key))
                try:
                    selection = parse_target_response(response, view, action)
                finally:
                    self._unreadable.discard((key, "target"))
            except UnparseableResponse as exc:
                self._unreadable.add((key, "target"))
                self._emit("explore", "NoTarget", prompt_kind="target", action=format_action(action), detail=str(exc))
                fail(action, None, type(exc).__name__)
                fp = fingerprint(view)
                return StepOutcome(StepStatus.FAILED, fp, fp, view, type(exc).__name__, view)
            except (NoCandidates, UnknownElement, ActionNotAllowed) as exc:
                self._emit("explore", "NoTarget", prompt_kind="target", action=format_action(action), detail=str(exc))
                fail(action, None, type(exc).__name__)
                fp = fingerprint(view)
                return StepOutcome(StepStatus.FAILED, fp, fp, view, type(exc).__name__, view)
            element = view.find(selection.element_id)
            locator = TargetLocator.of(element, view)
        label = derive_label(element) if element is not None else None
        shown = f"{format_action(action)} {label}" if label else format_action(action)

        triple = (key, action, locator)
        if triple in self._failed_triples:
            self._emit("explore", "Blocked", prompt_kind="target" if element else "action", action=shown,
                       detail="already failed on this screen")
            fail(action, label, "repeated failed action")
            fp = fingerprint(view)
            return StepOutcome(StepStatus.FAILED, fp, fp, view, "RepeatedFailure", view)

        outcome = self._act(action, element.id if element is not None else None, raw)
        after = self._view_of(outcome)
        self._emit("explore", outcome.status.value, action=shown, detail=outcome.reason)
        if outcome.succeeded:
            self._record(view, action, element.id if element is not None else None, after)
            ctx.record_step(key, Step(page_label(view.activity_name), action, label, page_label(after.activity_name)))
        else:
            self._failed_triples.add(triple)
            fail(action, label, outcome.reason or outcome.status.value)
        return outcome

    def _explore(self) -> None:
        while True:
            if self._steps >= self.config.step_cap:
                raise _Stop(TaskStatus.STEP_CAP_EXCEEDED, f"step cap {self.config.step_cap} reached")
            if self.exploration_step() is None:
                return


def handle_command(
    command: str,
    device: DeviceInterface,
    graph: AppGraph,
    lm: LmBackend,
    config: Optional[Config] = None,
    *,
    listener: Optional[Callable[[TraceEvent], None]] = None,
) -> TaskResult:
    return Orchestrator(device, graph, lm, config, listener=listener).handle_command(command)
