"""Batch evaluation: command parsing, multi-step exploration and replay."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from uitasker.actions import ActionType, format_action
from uitasker.backend.base import BackendError, LmBackend, UnparseableResponse
from uitasker.backend.parsing import (
    ActionNotAllowed,
    UnknownElement,
    parse_action_response,
    parse_target_response,
)
from uitasker.backend.scripted import ScriptedBackend, ScriptEntry, reply
from uitasker.evaluation.fixtures import (
    MultistepTask,
    ParserCase,
    RecordedTask,
    ReplayApp,
    ReplayTask,
    case_snapshot,
)
from uitasker.evaluation.metrics import EvalError, mean, micro_f1
from uitasker.evaluation.scripting import ScriptError, ScriptStep, compile_script, find_element, target_reply
from uitasker.graph.model import AppGraph
from uitasker.orchestrator import Config, TaskResult, handle_command
from uitasker.prompting.builders import NoCandidates, PromptBuilder
from uitasker.prompting.context import TaskContext
from uitasker.sim.device import SimDevice, render_screen
from uitasker.sim.spec import AppSpec, Perturbation, Popup
from uitasker.ui.anonymize import anonymize
from uitasker.ui.filtering import filter_noise
from uitasker.ui.fingerprint import ScreenFingerprint, layout_signature
from uitasker.ui.snapshot import ScreenSnapshot

logger = logging.getLogger(__name__)

PERTURBATION_KINDS = ("popup", "shuffle", "loading")


def _round(value: float) -> float:
    return round(value, 4)


def dumps_report(report: dict) -> str:
    """Stable JSON text: sorted keys, fixed float precision, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def gold_signature(app: AppSpec, screen: str) -> ScreenFingerprint:
    return layout_signature(filter_noise(render_screen(app, screen)))


def screen_signature(device: SimDevice) -> ScreenFingerprint:
    return layout_signature(filter_noise(device.snapshot()))


def screen_text(snapshot: ScreenSnapshot) -> str:
    return "\n".join(
        t for e in snapshot.root.iter_tree() for t in (e.text, e.content_desc) if t
    )


# -- parser evaluation ------------------------------------------------------
@dataclass
class ParserReport:
    em: float
    action_f1: float
    target_f1: float
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": "parser",
            "cases": len(self.rows),
            "em": _round(self.em),
            "action_f1": _round(self.action_f1),
            "target_f1": _round(self.target_f1),
            "rows": self.rows,
        }

    def table(self) -> str:
        return (
            f"parser cases: {len(self.rows)}\n"
            f"  EM         {self.em:.3f}\n"
            f"  Action F1  {self.action_f1:.3f}\n"
            f"  Target F1  {self.target_f1:.3f}\n"
        )


def score_case(
    pred_action: Optional[str],
    pred_target: Optional[str],
    gold_action: str,
    gold_target: Optional[str],
) -> tuple[bool, float, float]:
    """(exact match, action F1, target F1) for one case; targets compare case-insensitively."""
    pred_actions = {pred_action} if pred_action else set()
    gold_actions = {gold_action}
    pred_targets = {pred_target.casefold()} if pred_target else set()
    gold_targets = {gold_target.casefold()} if gold_target else set()
    em = pred_actions == gold_actions and pred_targets == gold_targets
    return em, micro_f1(pred_actions, gold_actions), micro_f1(pred_targets, gold_targets)


def _view(case: ParserCase, apps: Mapping[str, AppSpec]) -> ScreenSnapshot:
    return anonymize(case_snapshot(case, apps))[0]


def recorded_parser_backend(cases: Sequence[ParserCase], apps: Mapping[str, AppSpec]) -> ScriptedBackend:
    """Strict script replaying the ``answer`` stored with each case."""
    entries = []
    for case in cases:
        if case.answer is None:
            raise EvalError(f"case {case.command!r} has no recorded answer")
        action = case.answer.to_action()
        entries.append(ScriptEntry("action", reply(format_action(action))))
        if action.needs_target:
            element = find_element(_view(case, apps), case.answer.target or "", action.required_capability)
            entries.append(ScriptEntry("target", reply(target_reply(element))))
    return ScriptedBackend(entries)


def run_parser_eval(
    cases: Sequence[ParserCase],
    backend: Optional[LmBackend],
    apps: Mapping[str, AppSpec],
    *,
    builder: Optional[PromptBuilder] = None,
) -> ParserReport:
    if not cases:
        raise EvalError("no parser cases to evaluate")
    builder = builder or PromptBuilder()
    backend = backend or recorded_parser_backend(cases, apps)
    rows = []
    for index, case in enumerate(cases):
        view = _view(case, apps)
        if case.gold_target is not None:
            try:
                find_element(view, case.gold_target)
            except ScriptError:
                raise EvalError(f"case {index}: gold target {case.gold_target!r} not on {case.snapshot_ref}") from None
        ctx = TaskContext(case.command)
        action = None
        target = None
        try:
            action = parse_action_response(backend.complete(builder.action_prompt(ctx, view)))
            if action.needs_target:
                prompt = builder.target_prompt(ctx, view, action)
                target = parse_target_response(backend.complete(prompt), view, action).label
        except (UnparseableResponse, NoCandidates, UnknownElement, ActionNotAllowed) as exc:
            logger.debug("case %d: %s", index, exc)
        em, a_f1, t_f1 = score_case(
            action.kind.value if action else None, target, case.gold_action.value, case.gold_target
        )
        rows.append(
            {
                "index": index,
                "command": case.command,
                "snapshot": case.snapshot_ref,
                "gold": [case.gold_action.value, case.gold_target],
                "predicted": [action.kind.value if action else None, target],
                "em": em,
                "action_f1": _round(a_f1),
                "target_f1": _round(t_f1),
            }
        )
    return ParserReport(
        em=mean(1.0 if r["em"] else 0.0 for r in rows),
        action_f1=mean(r["action_f1"] for r in rows),
        target_f1=mean(r["target_f1"] for r in rows),
        rows=rows,
    )


# -- multi-step exploration -------------------------------------------------
@dataclass
class MultistepReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return mean(1.0 if r["success"] else 0.0 for r in self.rows)

    @property
    def mean_saving(self) -> float:
        return mean(r["saving"] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "kind": "multistep",
            "tasks": len(self.rows),
            "succeeded": sum(1 for r in self.rows if r["success"]),
            "success_rate": _round(self.success_rate),
            "mean_explored_steps": _round(mean(r["steps_taken"] for r in self.rows)),
            "mean_replayed_steps": _round(mean(r["replay_steps"] for r in self.rows)),
            "mean_step_saving": _round(self.mean_saving),
            "rows": self.rows,
        }

    def table(self) -> str:
        lines = [f"{'task':<28}{'demo':>5}{'budget':>7}{'explored':>9}{'replayed':>9}  result"]
        for r in self.rows:
            lines.append(
                f"{r['id']:<28}{r['demo_steps']:>5}{r['budget']:>7}{r['steps_taken']:>9}"
                f"{r['replay_steps']:>9}  {'success' if r['success'] else 'failure'}"
            )
        d = self.to_dict()
        lines.append(f"success {d['succeeded']}/{d['tasks']}; mean step saving on replay {d['mean_step_saving']:.2f}")
        return "\n".join(lines) + "\n"


def run_multistep_task(
    task: MultistepTask,
    app: AppSpec,
    config: Optional[Config] = None,
    backend: Optional[LmBackend] = None,
) -> dict:
    device = SimDevice(app, use_spec_perturbations=False)
    graph = AppGraph(app.package_name)
    backend = backend or ScriptedBackend(compile_script(app, task.script))
    result = handle_command(task.command, device, graph, backend, config)
    gold = gold_signature(app, task.gold_screen)
    reached = screen_signature(device) == gold
    success = reached and result.steps_taken <= task.budget

    # Same command again on a fresh device: should replay from the graph with no prompts.
    device.reset()
    silent = ScriptedBackend([])
    again = handle_command(task.command, device, graph, silent, config)
    return {
        "id": task.id,
        "app": task.app,
        "demo_steps": task.demo_steps,
        "budget": task.budget,
        "status": result.status.value,
        "path_source": result.path_source.value,
        "steps_taken": result.steps_taken,
        "reached_gold": reached,
        "success": success,
        "replay_status": again.status.value,
        "replay_source": again.path_source.value,
        "replay_steps": again.steps_taken,
        "replay_reached_gold": screen_signature(device) == gold,
        "replay_prompts": len(silent.calls),
        "saving": result.steps_taken - again.steps_taken,
        "trace": [str(e) for e in result.trace],
    }


def run_multistep_eval(
    tasks: Sequence[MultistepTask],
    apps: Mapping[str, AppSpec],
    config: Optional[Config] = None,
    backend_factory: Optional[Callable[[MultistepTask], LmBackend]] = None,
) -> MultistepReport:
    if not tasks:
        raise EvalError("no multi-step tasks to evaluate")
    report = MultistepReport()
    for task in tasks:
        if task.app not in apps:
            raise EvalError(f"task {task.id}: unknown app {task.app!r}")
        backend = backend_factory(task) if backend_factory else None
        report.rows.append(run_multistep_task(task, apps[task.app], config, backend))
    return report


# -- replay -----------------------------------------------------------------
@dataclass
class ReplayReport:
    perturbed: bool
    rows: list[dict] = field(default_factory=list)

    def count(self, category: str, app: Optional[str] = None) -> tuple[int, int]:
        rows = [r for r in self.rows if r["category"] == category and (app is None or r["app"] == app)]
        return sum(1 for r in rows if r["success"]), len(rows)

    def failures_traced(self) -> bool:
        return all(r["diverged"] and r["recovery_attempted"] for r in self.rows if not r["success"])

    def to_dict(self) -> dict:
        apps = sorted({r["app"] for r in self.rows})
        table = {}
        for app in apps:
            table[app] = {c: list(self.count(c, app)) for c in ("direct", "parameterized")}
        totals = {c: list(self.count(c)) for c in ("direct", "parameterized")}
        return {
            "kind": "replay",
            "perturbed": self.perturbed,
            "per_app": table,
            "totals": totals,
            "direct_rate": _round(totals["direct"][0] / max(totals["direct"][1], 1)),
            "parameterized_rate": _round(totals["parameterized"][0] / max(totals["parameterized"][1], 1)),
            "failures_traced": self.failures_traced(),
            "rows": self.rows,
        }

    def table(self) -> str:
        title = "replay (perturbed)" if self.perturbed else "replay"
        lines = [f"{title}", f"{'app':<12}{'direct':>9}{'param':>9}"]
        d = self.to_dict()
        for app, cats in d["per_app"].items():
            lines.append(f"{app:<12}{'%d/%d' % tuple(cats['direct']):>9}{'%d/%d' % tuple(cats['parameterized']):>9}")
        t = d["totals"]
        lines.append(f"{'total':<12}{'%d/%d' % tuple(t['direct']):>9}{'%d/%d' % tuple(t['parameterized']):>9}")
        return "\n".join(lines) + "\n"


def perturbation_for(index: int, seed: int = 7) -> tuple[str, Perturbation]:
    kind = PERTURBATION_KINDS[index % len(PERTURBATION_KINDS)]
    if kind == "popup":
        return kind, Perturbation(after_step=1, popup=Popup("Try Premium free for 30 days", "Not now"))
    if kind == "shuffle":
        return kind, Perturbation(after_step=1, shuffle_seed=seed + index)
    return kind, Perturbation(after_step=1, loading_ticks=4)


def populate_graph(app: AppSpec, record: Sequence[RecordedTask], config: Optional[Config] = None) -> AppGraph:
    """Navigate each recorded task by script so the graph knows its route."""
    graph = AppGraph(app.package_name)
    device = SimDevice(app, use_spec_perturbations=False)
    for task in record:
        device.reset()
        steps = list(task.steps) + [ScriptStep(ActionType.DONE)]
        # by-kind so the ranking prompts of a non-empty graph are answered NONE
        backend = ScriptedBackend(compile_script(app, steps), mode="by-kind", defaults={"rank": reply("NONE")})
        result = handle_command(task.command, device, graph, backend, config)
        if not result.completed or screen_signature(device) != gold_signature(app, task.gold_screen):
            raise EvalError(f"recording {task.command!r} did not reach {task.gold_screen}: {result.reason}")
    return graph


def replay_backend(task: ReplayTask, dest: int) -> ScriptedBackend:
    entries = [ScriptEntry("rank", reply(str(dest), "The saved screen that served a matching command."))]
    if task.mapping:
        lines = "\n".join(f'"{old}" -> "{new}"' for old, new in task.mapping)
        entries.append(ScriptEntry("substitution", reply(lines, "Only the entity differs between the commands.")))
    return ScriptedBackend(
        entries,
        mode="by-kind",
        defaults={"rank": reply("NONE"), "substitution": reply("UNCHANGED")},
    )


def run_replay_task(
    task: ReplayTask,
    app: AppSpec,
    graph: AppGraph,
    gold_screen: str,
    config: Optional[Config] = None,
    perturbation: Optional[tuple[str, Perturbation]] = None,
) -> dict:
    gold = gold_signature(app, gold_screen)
    dest = graph.node_for_signature(gold)
    if dest is None:
        raise EvalError(f"gold screen {gold_screen} is not in the populated graph")
    extra = (perturbation[1],) if perturbation else ()
    device = SimDevice(app, perturbations=extra, use_spec_perturbations=False)
    try:
        result: Optional[TaskResult] = handle_command(task.command, device, graph, replay_backend(task, dest), config)
    except BackendError as exc:  # handle_command already converts these; belt and braces
        raise EvalError(str(exc)) from None
    reached = screen_signature(device) == gold
    text_ok = task.expect_text is None or task.expect_text.casefold() in screen_text(device.snapshot()).casefold()
    phases = [(e.phase, e.result) for e in result.trace]
    diverged = ("validate", "Diverged") in phases
    first = phases.index(("validate", "Diverged")) if diverged else len(phases)
    recovery = any(p in ("revert", "locate") for p, _ in phases[first + 1 :])
    return {
        "app": app.app_name,
        "category": task.category,
        "command": task.command,
        "perturbation": perturbation[0] if perturbation else None,
        "status": result.status.value,
        "path_source": result.path_source.value,
        "steps_taken": result.steps_taken,
        "reached_gold": reached,
        "expected_text_found": text_ok,
        "success": result.completed and reached and text_ok,
        "diverged": diverged,
        "recovery_attempted": recovery,
        "trace": [str(e) for e in result.trace],
    }


def run_replay_eval(
    suite: Sequence[ReplayApp],
    apps: Mapping[str, AppSpec],
    *,
    perturb: bool = False,
    config: Optional[Config] = None,
) -> ReplayReport:
    if not suite:
        raise EvalError("no replay tasks to evaluate")
    report = ReplayReport(perturbed=perturb)
    counters = {"direct": 0, "parameterized": 0}
    for entry in suite:
        if entry.app not in apps:
            raise EvalError(f"unknown app {entry.app!r} in replay suite")
        app = apps[entry.app]
        graph = populate_graph(app, entry.record, config)
        for task in entry.tasks():
            perturbation = None
            if perturb:
                perturbation = perturbation_for(counters[task.category])
            counters[task.category] += 1
            gold_screen = entry.record[task.base].gold_screen
            report.rows.append(run_replay_task(task, app, graph, gold_screen, config, perturbation))
    return report
