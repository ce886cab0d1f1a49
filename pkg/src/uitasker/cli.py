"""Command-line entry point: interactive session, batch evaluation, graph import/export."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from uitasker.backend.base import BackendError, LmBackend
from uitasker.backend.remote import API_KEY_ENV, ENDPOINT_ENV, HttpBackend
from uitasker.backend.scripted import ScriptedBackend
from uitasker.evaluation.fixtures import (
    FixtureSet,
    load_multistep_tasks,
    load_parser_cases,
    load_replay_suite,
)
from uitasker.evaluation.harness import (
    dumps_report,
    run_multistep_eval,
    run_parser_eval,
    run_replay_eval,
)
from uitasker.evaluation.metrics import EvalError
from uitasker.graph.model import AppGraph, GraphError, amend_command, apply_feedback
from uitasker.graph.store import dumps_graph, load, loads_graph, persist
from uitasker.orchestrator import Config, Orchestrator, TaskResult, TraceEvent
from uitasker.sim.device import SimDevice
from uitasker.sim.spec import AppSpec, SpecError, fixture_dir, load_app_spec
from uitasker.ui.filtering import filter_noise
from uitasker.ui.fingerprint import layout_signature
from uitasker.ui.serialize import serialize_for_prompt

logger = logging.getLogger("uitasker")

DEFAULT_GRAPH = "uitasker-graph.jsonl"


class CliError(Exception):
    pass


def resolve_app(value: str) -> AppSpec:
    """A path to a YAML spec, or the name of a bundled fixture app."""
    path = Path(value)
    if not path.exists():
        path = fixture_dir() / "apps" / f"{value}.yaml"
    if not path.exists():
        raise CliError(f"no app spec at {value!r} and no bundled app of that name")
    return load_app_spec(path)


def make_backend(spec: Optional[str]) -> Optional[LmBackend]:
    if spec is None:
        return None
    if spec.startswith("mock:"):
        return ScriptedBackend.from_file(spec[len("mock:"):])
    if spec == "http":
        return HttpBackend.from_env()
    raise CliError(f"unknown backend {spec!r}; use mock:<script> or http")


# -- repl -----------------------------------------------------------------
class Session:
    """State of one interactive session; I/O is injected so it can be driven from tests."""

    def __init__(
        self,
        device: SimDevice,
        orchestrator: Orchestrator,
        graph_path: Optional[Path],
        out: TextIO,
    ):
        self.device = device
        self.orchestrator = orchestrator
        self.graph_path = graph_path
        self.out = out
        self.last: Optional[TaskResult] = None

    @property
    def graph(self):
        return self.orchestrator.graph

    def say(self, text: str = "") -> None:
        print(text, file=self.out)

    def show_screen(self) -> None:
        self.say(serialize_for_prompt(filter_noise(self.device.snapshot())))

    def save(self) -> None:
        if self.graph_path is not None:
            persist(self.graph, self.graph_path)

    def current_node(self) -> Optional[int]:
        return self.graph.node_for_signature(layout_signature(filter_noise(self.device.snapshot())))

    def feedback(self, text: str) -> None:
        if not text:
            self.say("feedback is empty")
            return
        if self.last is not None and self.last.final_node is not None:
            target = self.last.final_node
        else:
            target = self.current_node()
        if target is None:
            self.say("no saved screen to attach feedback to yet")
            return
        apply_feedback(self.graph, target, text)
        self.save()
        self.say(f"noted on screen {target}")

    def amend(self, text: str) -> None:
        if self.last is None or self.last.final_node is None or not self.last.completed:
            self.say("nothing to amend: no completed command in this session")
            return
        if not text:
            self.say("amended command is empty")
            return
        amend_command(self.graph, self.last.final_node, self.last.command, text)
        self.save()
        self.say(f"screen {self.last.final_node} now serves {text!r}")

    def run_command(self, command: str) -> TaskResult:
        result = self.orchestrator.handle_command(command)
        self.last = result
        self.save()
        where = f" on screen {result.final_node}" if result.final_node is not None else ""
        self.say(f"=> {result.status.value} after {result.steps_taken} steps ({result.path_source.value}){where}")
        if result.reason:
            self.say(f"   {result.reason}")
        return result

    def handle(self, line: str) -> bool:
        """Process one input line; returns False when the session should end."""
        line = line.strip()
        if not line:
            return True
        lowered = line.lower()
        if lowered in ("quit", "exit"):
            return False
        if lowered == "screen":
            self.show_screen()
        elif lowered == "reset":
            self.device.reset()
            self.show_screen()
        elif lowered.startswith("feedback:"):
            self.feedback(line.split(":", 1)[1].strip())
        elif lowered.startswith("amend:"):
            self.amend(line.split(":", 1)[1].strip())
        else:
            try:
                self.run_command(line)
            except BackendError as exc:
                self.say(f"backend error: {exc}")
            self.show_screen()
        return True


def repl(session: Session, lines: TextIO, interactive: bool = False) -> None:
    session.show_screen()
    while True:
        if interactive:
            print("> ", end="", file=session.out, flush=True)
        line = lines.readline()
        if not line:
            break
        try:
            if not session.handle(line):
                break
        except GraphError as exc:
            session.say(f"error: {exc}")


def cmd_repl(args: argparse.Namespace) -> int:
    app = resolve_app(args.app)
    backend = make_backend(args.backend) or ScriptedBackend([])
    graph_path = Path(args.graph) if args.graph else None
    graph = load(graph_path, app.package_name) if graph_path else AppGraph(app.package_name)
    device = SimDevice(app, use_spec_perturbations=not args.no_perturbations)
    out = sys.stdout

    def listener(event: TraceEvent) -> None:
        print(f"  {event}", file=out, flush=True)

    orchestrator = Orchestrator(device, graph, backend, Config(step_cap=args.step_cap), listener=listener)
    session = Session(device, orchestrator, graph_path, out)
    repl(session, sys.stdin, interactive=sys.stdin.isatty())
    return 0


# -- eval -----------------------------------------------------------------
def cmd_eval(args: argparse.Namespace) -> int:
    fixtures = FixtureSet(Path(args.fixtures)) if args.fixtures else FixtureSet.bundled()
    apps = fixtures.apps()
    if args.suite == "parser":
        backend = make_backend(args.backend)
        report = run_parser_eval(load_parser_cases(fixtures.task_file("parser")), backend, apps)
        doc, text = report.to_dict(), report.table()
    elif args.suite == "multistep":
        report = run_multistep_eval(load_multistep_tasks(fixtures.task_file("multistep")), apps)
        doc, text = report.to_dict(), report.table()
    else:
        suite = load_replay_suite(fixtures.task_file("replay"))
        plain = run_replay_eval(suite, apps, perturb=False)
        perturbed = run_replay_eval(suite, apps, perturb=True)
        doc = {"kind": "replay", "unperturbed": plain.to_dict(), "perturbed": perturbed.to_dict()}
        text = plain.table() + "\n" + perturbed.table()
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(dumps_report(doc), encoding="utf-8")
    return 0


# -- graph ----------------------------------------------------------------
def cmd_graph(args: argparse.Namespace) -> int:
    store = Path(args.graph)
    if args.op == "export":
        if not store.exists():
            raise CliError(f"no graph store at {store}")
        text = dumps_graph(load(store))
        if args.file == "-":
            sys.stdout.write(text)
        else:
            Path(args.file).write_text(text, encoding="utf-8")
    else:
        source = Path(args.file)
        graph = loads_graph(source.read_text("utf-8"), str(source))
        persist(graph, store)
        print(f"imported {len(graph.nodes)} screens and {len(graph.edges)} transitions into {store}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uitasker", description="Natural-language task automation for app UIs.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    backend_help = (
        f"mock:<script.yaml> for a scripted backend, or http (reads {ENDPOINT_ENV} and {API_KEY_ENV})"
    )

    p = sub.add_parser("repl", help="type commands against a simulated app")
    p.add_argument("--app", required=True, help="app spec YAML file or bundled app name")
    p.add_argument("--backend", help=backend_help)
    p.add_argument("--graph", help="graph store file; loaded at start and saved after each command")
    p.add_argument("--step-cap", type=int, default=Config.step_cap)
    p.add_argument("--no-perturbations", action="store_true", help="ignore perturbations declared in the app spec")
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("eval", help="run a bundled evaluation suite")
    p.add_argument("suite", choices=("parser", "multistep", "replay"))
    p.add_argument("--fixtures", help="fixtures directory with apps/ and tasks/ (default: bundled)")
    p.add_argument("--report", help="write the machine-readable JSON report here")
    p.add_argument("--backend", help=backend_help + " (parser suite only; default replays recorded answers)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("graph", help="export or import a graph store")
    p.add_argument("op", choices=("export", "import"))
    p.add_argument("file", help="destination (export; - for stdout) or source (import)")
    p.add_argument("--graph", default=DEFAULT_GRAPH, help=f"graph store file (default {DEFAULT_GRAPH})")
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, EvalError, SpecError, GraphError, BackendError, OSError) as exc:
        print(f"uitasker: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
