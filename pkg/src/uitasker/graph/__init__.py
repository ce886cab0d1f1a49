"""Screen-transition graphs: recording, lookup, path planning and persistence."""

from uitasker.graph.matching import (
    SubstitutionRefused,
    describe_screen,
    find_destination,
    locate_current,
    parameterize,
)
from uitasker.graph.model import (
    MAX_SERVED_COMMANDS,
    AppGraph,
    GraphError,
    ScreenDescription,
    ScreenNode,
    TargetLocator,
    TransitionEdge,
    UnknownCommand,
    UnknownNode,
    amend_command,
    apply_feedback,
    heuristic_description,
    page_label,
    record_transition,
)
from uitasker.graph.paths import NoPath, shortest_path
from uitasker.graph.store import CorruptStore, dumps_graph, load, loads_graph, persist

__all__ = [
    "MAX_SERVED_COMMANDS",
    "AppGraph",
    "CorruptStore",
    "GraphError",
    "NoPath",
    "ScreenDescription",
    "ScreenNode",
    "SubstitutionRefused",
    "TargetLocator",
    "TransitionEdge",
    "UnknownCommand",
    "UnknownNode",
    "amend_command",
    "apply_feedback",
    "describe_screen",
    "dumps_graph",
    "find_destination",
    "heuristic_description",
    "load",
    "loads_graph",
    "locate_current",
    "page_label",
    "parameterize",
    "persist",
    "record_transition",
    "shortest_path",
]
