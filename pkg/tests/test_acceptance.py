"""One test per top-level acceptance criterion; each logs a PASS/FAIL line with its measurement."""

from __future__ import annotations

import random
import time
from collections import Counter
from fractions import Fraction

import pytest

from oracles import (
    F1_CASES,
    bfs_distance,
    expected_path,
    graph_structure,
    grid_snapshot,
    layout_mutation,
    pii_corpus,
    random_graph,
    run_step_case,
    sim_state,
    step_matrix,
    text_mutation,
)
from uitasker.actions import Action, ActionType
from uitasker.backend import ScriptedBackend, ScriptEntry, reply
from uitasker.cli import main
from uitasker.evaluation import (
    load_multistep_tasks,
    load_replay_suite,
    micro_f1,
    run_multistep_eval,
    run_replay_eval,
)
from uitasker.evaluation.harness import score_case
from uitasker.evaluation.scripting import target_reply
from uitasker.executor import StepStatus
from uitasker.graph import AppGraph, NoPath, TransitionEdge, load, persist, shortest_path
from uitasker.orchestrator import Config, Orchestrator
from uitasker.sim import SimDevice
from uitasker.ui.anonymize import anonymize, deanonymize, redact_text, restore_text, Substitution
from uitasker.ui.filtering import filter_noise
from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiCapability, UiElement


@pytest.fixture(scope="module")
def multistep(fixtures, apps):
    start = time.perf_counter()
    report = run_multistep_eval(load_multistep_tasks(fixtures.task_file("multistep")), apps)
    return report, time.perf_counter() - start


# 1 -------------------------------------------------------------------------
def test_metric_oracle(criterion):
    start = time.perf_counter()
    exact = sum(Fraction(micro_f1(p, g)).limit_denominator(10_000) == want for p, g, want in F1_CASES)

    rng = random.Random(11)
    actions = [None, "PRESS", "ENTER_TEXT", "SCROLL", "BACK"]
    targets = [None, "Library", "library", "Search", "Home"]
    consistent = 0
    for _ in range(1000):
        pa, pt = rng.choice(actions), rng.choice(targets)
        ga, gt = rng.choice(actions[1:]), rng.choice(targets)
        em, a_f1, t_f1 = score_case(pa, pt, ga, gt)
        consistent += em == (a_f1 == 1.0 and t_f1 == 1.0)
    elapsed = time.perf_counter() - start
    ok = exact == len(F1_CASES) == 20 and consistent == 1000 and elapsed < 1.0
    criterion("1 metric oracle", ok, f"{exact}/20 exact, EM/F1 invariant {consistent}/1000, {elapsed:.3f}s")
    assert ok


# 2 -------------------------------------------------------------------------
def _shuffled_copy(graph: AppGraph, rng: random.Random) -> AppGraph:
    copy = AppGraph(graph.package_name)
    for node_id in rng.sample(sorted(graph.nodes), len(graph.nodes)):
        copy.add_node(graph.nodes[node_id])
    for edge in rng.sample(list(graph.edges.values()), len(graph.edges)):
        copy.add_edge(TransitionEdge(edge.source, edge.dest, edge.action, edge.locator, edge.traversal_count))
    return copy


def test_shortest_path_oracle(criterion):
    start = time.perf_counter()
    rng = random.Random(5)
    length_ok = determinism_ok = tiebreak_ok = 0
    for _ in range(100):
        graph = random_graph(rng, 20, 60)
        assert len(graph.nodes) <= 20 and len(graph.edges) <= 60
        s, d = rng.choice(sorted(graph.nodes)), rng.choice(sorted(graph.nodes))
        adjacency: dict[int, set[int]] = {}
        for e in graph.edges.values():
            adjacency.setdefault(e.source, set()).add(e.dest)
        want = bfs_distance(adjacency, s, d)
        runs = []
        for run in range(5):
            g = graph if run == 0 else _shuffled_copy(graph, rng)
            try:
                runs.append(tuple(e.key for e in shortest_path(g, s, d)))
            except NoPath:
                runs.append(None)
        length_ok += (runs[0] is None and want is None) or (runs[0] is not None and len(runs[0]) == want)
        determinism_ok += len(set(runs)) == 1
        oracle = expected_path(graph, s, d)
        tiebreak_ok += (oracle is None and runs[0] is None) or (
            oracle is not None and runs[0] == tuple(e.key for e in oracle)
        )
    elapsed = time.perf_counter() - start
    ok = length_ok == determinism_ok == tiebreak_ok == 100 and elapsed < 5.0
    criterion(
        "2 shortest-path oracle",
        ok,
        f"length {length_ok}/100, deterministic over 5 runs {determinism_ok}/100, "
        f"tie-break {tiebreak_ok}/100, {elapsed:.3f}s",
    )
    assert ok


# 3 -------------------------------------------------------------------------
def test_node_identity(criterion):
    rng = random.Random(3)
    same = different = 0
    for _ in range(200):
        base = grid_snapshot(rng)
        graph = AppGraph()
        node = graph.ensure_node(base)
        same += graph.ensure_node(text_mutation(rng, base)) == node
        different += graph.ensure_node(layout_mutation(rng, base)) != node
    ok = same == 200 and different == 200
    criterion("3 node identity", ok, f"text-only same node {same}/200, layout change new node {different}/200")
    assert ok


# 4 -------------------------------------------------------------------------
def test_exploration(criterion, multistep):
    report, elapsed = multistep
    rows = report.rows
    succeeded = sum(r["success"] for r in rows)
    at_budget = [r for r in rows if r["steps_taken"] == r["budget"]]
    over = [r for r in rows if r["steps_taken"] == r["budget"] + 1]
    boundary = bool(at_budget) and all(r["success"] for r in at_budget) and bool(over) and not any(
        r["success"] for r in over
    )
    ok = len(rows) == 10 and succeeded >= 9 and boundary and elapsed < 10.0
    criterion(
        "4 exploration",
        ok,
        f"{succeeded}/{len(rows)} within demo+3; demo+3 success: {[r['id'] for r in at_budget]}; "
        f"demo+4 failure: {[r['id'] for r in over]}; {elapsed:.2f}s",
    )
    assert ok


# 5 -------------------------------------------------------------------------
def test_replay(criterion, fixtures, apps):
    start = time.perf_counter()
    suite = load_replay_suite(fixtures.task_file("replay"))
    plain = run_replay_eval(suite, apps, perturb=False)
    perturbed = run_replay_eval(suite, apps, perturb=True)
    elapsed = time.perf_counter() - start
    pd, pp = plain.count("direct"), plain.count("parameterized")
    qd, qp = perturbed.count("direct"), perturbed.count("parameterized")
    ok = (
        pd[0] + pp[0] == 30
        and pd[1] + pp[1] == 30
        and qd[0] >= 12
        and qp[0] >= 10
        and plain.failures_traced()
        and perturbed.failures_traced()
        and elapsed < 30.0
    )
    failures = [f"{r['app']}:{r['command']} ({r['perturbation']})" for r in perturbed.rows if not r["success"]]
    criterion(
        "5 replay",
        ok,
        f"unperturbed {pd[0] + pp[0]}/30; perturbed direct {qd[0]}/{qd[1]}, parameterized {qp[0]}/{qp[1]}; "
        f"failures traced to Diverged+recovery: {perturbed.failures_traced()} {failures}; {elapsed:.2f}s",
    )
    assert ok


# 6 -------------------------------------------------------------------------
class CountingDevice(SimDevice):
    """Counts actions that left the simulated state unchanged, per screen."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.ineffective: Counter = Counter()

    def perform(self, action, target=None):
        before = sim_state(self)
        acked = super().perform(action, target)
        if sim_state(self) == before:
            self.ineffective[before[0]] += 1
        return acked


FAILURE_RESULTS = {"NoEffect", "Failed", "Blocked", "NoTarget", "Unparseable"}


def _split(app, screen):
    """(inert, navigating) clickable elements on ``screen``, judged by the simulator."""
    device = SimDevice(app, use_spec_perturbations=False)
    device.goto(screen)
    view = filter_noise(device.snapshot())
    inert, moving = [], []
    for element in (e for e in view.root.iter_tree() if e.allows(UiCapability.CLICKABLE)):
        probe = SimDevice(app, use_spec_perturbations=False)
        probe.goto(screen)
        before = sim_state(probe)
        probe.perform(Action.press(), element.id)
        (inert if sim_state(probe) == before else moving).append(element)
    return inert, moving


def _inert_screen(app, minimum=1):
    """First screen (launch screen preferred) with at least ``minimum`` inert clickables."""
    for screen in [app.initial_screen] + sorted(app.screens):
        inert, _ = _split(app, screen)
        if len(inert) >= minimum:
            return screen, inert
    raise AssertionError(f"{app.app_name} has no inert clickable element")


def _press(element):
    return [ScriptEntry("action", reply("PRESS")), ScriptEntry("target", reply(target_reply(element)))]


def adversarial_scenarios(apps):
    """(label, app, start screen, scripted replies); every script is longer than any run can use."""
    scenarios = []
    names = sorted(apps)
    for name in names:
        app = apps[name]
        screen, inert = _inert_screen(app)
        scenarios.append((f"{name}: same inert press", name, screen, _press(inert[0]) * 30))
        _, moving = _split(app, app.initial_screen)
        bounce = _press(moving[0]) + [ScriptEntry("action", reply("BACK"))]
        scenarios.append((f"{name}: ping-pong", name, app.initial_screen, bounce * 30))
    for name in names[:4]:
        prose = [ScriptEntry("action", reply("Maybe tap something?"))] * 30
        scenarios.append((f"{name}: prose replies", name, apps[name].initial_screen, prose))
    for name in names[:2]:
        unknown = [ScriptEntry("action", reply("PRESS")), ScriptEntry("target", reply("[999]"))] * 30
        scenarios.append((f"{name}: unknown element", name, apps[name].initial_screen, unknown))
    for name in names[2:4]:
        screen, inert = _inert_screen(apps[name], minimum=2)
        scenarios.append((f"{name}: alternating inert presses", name, screen, (_press(inert[0]) + _press(inert[1])) * 30))
    return scenarios


def test_no_repeat(criterion, apps):
    scenarios = adversarial_scenarios(apps)
    step_cap = 10
    worst_attempts = worst_ineffective = worst_steps = 0
    problems = []
    for label, name, screen, entries in scenarios:
        device = CountingDevice(apps[name], use_spec_perturbations=False)
        device.goto(screen)
        failures: Counter = Counter()

        def listen(event, device=device, failures=failures):
            if event.phase == "explore" and event.result in FAILURE_RESULTS:
                failures[sim_state(device)[0]] += 1

        orch = Orchestrator(device, AppGraph(), ScriptedBackend(entries), Config(step_cap=step_cap), listener=listen)
        result = orch.handle_command("do something impossible")
        attempts = max(failures.values(), default=0)
        ineffective = max(device.ineffective.values(), default=0)
        worst_attempts = max(worst_attempts, attempts)
        worst_ineffective = max(worst_ineffective, ineffective)
        worst_steps = max(worst_steps, device.steps, result.steps_taken)
        if attempts > 3 or ineffective > 3 or device.steps > step_cap or result.steps_taken > step_cap:
            problems.append(label)
    ok = len(scenarios) == 20 and not problems
    criterion(
        "6 no-repeat",
        ok,
        f"{len(scenarios)} scenarios; max failed attempts on one screen {worst_attempts}, "
        f"max ineffective device actions on one screen {worst_ineffective}, max steps {worst_steps}/{step_cap}"
        + (f"; violations {problems}" if problems else ""),
    )
    assert ok


# 7 -------------------------------------------------------------------------
def test_executor(criterion, apps):
    cases = step_matrix(apps)
    false_success = enter_violations = inert_violations = inert_total = 0
    for case in cases:
        outcome, changed, entered = run_step_case(case, apps)
        if case.action.kind is ActionType.ENTER_TEXT:
            false_success += outcome.succeeded and not entered
            if outcome.succeeded:
                enter_violations += not any(case.action.argument in (e.text or "") for e in outcome.after.root.iter_tree())
        else:
            false_success += outcome.succeeded and not changed
            if case.action.kind is ActionType.PRESS and not changed:
                inert_total += 1
                inert_violations += outcome.status is not StepStatus.NO_EFFECT
    ok = len(cases) >= 50 and false_success == 0 and enter_violations == 0 and inert_violations == 0 and inert_total > 0
    criterion(
        "7 executor",
        ok,
        f"{len(cases)} step cases; false Succeeded {false_success}; ENTER success without payload {enter_violations}; "
        f"inert PRESS not NoEffect {inert_violations}/{inert_total}",
    )
    assert ok


# 8 -------------------------------------------------------------------------
def test_anonymizer(criterion):
    corpus = pii_corpus(seed=2024, size=200)
    recalled = round_trip = 0
    children = []
    for i, (sentence, value, tag) in enumerate(corpus, start=1):
        redacted, found = redact_text(sentence)
        recalled += value not in redacted and tag in redacted
        subs = [Substitution(original, t, 0, "text", pos) for original, t, pos in found]
        round_trip += restore_text(redacted, subs) == sentence
        children.append(UiElement(i, "label", Bounds(0, (i - 1) * 9, 1080, 9), text=sentence))
    snap = ScreenSnapshot(UiElement(0, "container", Bounds(0, 0, 1080, 1920), children=tuple(children)), (1080, 1920))
    view, redactions = anonymize(snap)
    snapshot_ok = deanonymize(view, redactions) == snap and not any(
        value in (e.text or "") for e, (_, value, _) in zip(view.root.children, corpus)
    )
    ok = recalled == 200 and round_trip == 200 and snapshot_ok
    criterion(
        "8 anonymizer",
        ok,
        f"recall {recalled}/200, text round-trip {round_trip}/200, snapshot round-trip {snapshot_ok}",
    )
    assert ok


# 9 -------------------------------------------------------------------------
def test_determinism_and_persistence(criterion, tmp_path):
    identical = []
    for suite in ("parser", "multistep", "replay"):
        a, b = tmp_path / f"{suite}-a.json", tmp_path / f"{suite}-b.json"
        assert main(["eval", suite, "--report", str(a)]) == 0
        assert main(["eval", suite, "--report", str(b)]) == 0
        identical.append(a.read_bytes() == b.read_bytes())

    rng = random.Random(9)
    same = 0
    for i in range(50):
        graph = random_graph(rng, 20, 60)
        path = persist(graph, tmp_path / f"g{i}.jsonl")
        back = load(path)
        same += graph_structure(back) == graph_structure(graph) and back == graph
    ok = all(identical) and same == 50
    criterion(
        "9 determinism and persistence",
        ok,
        f"eval reports byte-identical {sum(identical)}/3 suites; persist/load identical {same}/50 graphs",
    )
    assert ok


# 10 ------------------------------------------------------------------------
def test_step_saving(criterion, multistep):
    report, _ = multistep
    explored = sum(r["steps_taken"] for r in report.rows) / len(report.rows)
    replayed = sum(r["replay_steps"] for r in report.rows) / len(report.rows)
    delta = explored - replayed
    ok = delta >= 2.0 and all(r["replay_prompts"] == 0 for r in report.rows if r["success"])
    criterion(
        "10 step saving",
        ok,
        f"mean device actions explored {explored:.2f} vs replayed {replayed:.2f}; delta {delta:.2f}",
    )
    assert ok
