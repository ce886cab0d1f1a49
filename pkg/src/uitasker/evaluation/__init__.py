"""Evaluation harness and metrics."""

from uitasker.evaluation.fixtures import (
    FixtureSet,
    MultistepTask,
    ParserCase,
    RecordedTask,
    ReplayApp,
    ReplayTask,
    load_multistep_tasks,
    load_parser_cases,
    load_replay_suite,
)
from uitasker.evaluation.harness import (
    MultistepReport,
    ParserReport,
    ReplayReport,
    dumps_report,
    perturbation_for,
    populate_graph,
    recorded_parser_backend,
    run_multistep_eval,
    run_parser_eval,
    run_replay_eval,
)
from uitasker.evaluation.metrics import EvalError, micro_f1
from uitasker.evaluation.scripting import ScriptError, ScriptStep, compile_script

__all__ = [
    "EvalError",
    "FixtureSet",
    "MultistepReport",
    "MultistepTask",
    "ParserCase",
    "ParserReport",
    "RecordedTask",
    "ReplayApp",
    "ReplayReport",
    "ReplayTask",
    "ScriptError",
    "ScriptStep",
    "compile_script",
    "dumps_report",
    "load_multistep_tasks",
    "load_parser_cases",
    "load_replay_suite",
    "micro_f1",
    "perturbation_for",
    "populate_graph",
    "recorded_parser_backend",
    "run_multistep_eval",
    "run_parser_eval",
    "run_replay_eval",
]
