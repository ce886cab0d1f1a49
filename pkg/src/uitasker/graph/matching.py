"""Backend-assisted lookups over a graph: where am I, where should I go."""

from __future__ import annotations

import logging
import re
from typing import Optional, Sequence

from uitasker.actions import Action, ActionType, format_action
from uitasker.backend.base import LmBackend, UnparseableResponse
from uitasker.backend.parsing import (
    parse_description_response,
    parse_rank_response,
    parse_substitution_response,
)
from uitasker.graph.model import AppGraph, GraphError, ScreenDescription, heuristic_description
from uitasker.prompting.builders import PromptBuilder
from uitasker.ui.fingerprint import layout_signature
from uitasker.ui.snapshot import ScreenSnapshot

logger = logging.getLogger(__name__)

SUBSTITUTABLE = (ActionType.ENTER_TEXT, ActionType.OPEN)


class SubstitutionRefused(GraphError):
    pass


def describe_screen(
    snapshot: ScreenSnapshot,
    lm: Optional[LmBackend] = None,
    builder: Optional[PromptBuilder] = None,
) -> ScreenDescription:
    """Description of a screen; the summary comes from ``lm`` when one is given."""
    if lm is None:
        return heuristic_description(snapshot)
    builder = builder or PromptBuilder()
    summary = parse_description_response(lm.complete(builder.description_prompt(snapshot)))
    return heuristic_description(snapshot, summary)


def _ranked(graph: AppGraph, request: str, lm: LmBackend, builder: Optional[PromptBuilder]) -> Optional[int]:
    builder = builder or PromptBuilder()
    screens = [
        (n.node_id, n.description.render(), n.served_commands)
        for n in sorted(graph.nodes.values(), key=lambda n: n.node_id)
    ]
    response = lm.complete(builder.rank_prompt(request, screens))
    try:
        choice = parse_rank_response(response)
    except UnparseableResponse:
        logger.warning("unreadable ranking reply %r; treating as NONE", response.result_block[:60])
        return None
    if choice is not None and choice not in graph.nodes:
        logger.warning("ranker chose unknown screen %s; treating as NONE", choice)
        return None
    return choice


def locate_current(
    graph: AppGraph,
    snapshot: ScreenSnapshot,
    lm: Optional[LmBackend] = None,
    builder: Optional[PromptBuilder] = None,
) -> Optional[int]:
    exact = graph.node_for_signature(layout_signature(snapshot))
    if exact is not None or not graph.nodes or lm is None:
        return exact
    request = "Identify the current screen: " + heuristic_description(snapshot).render()
    return _ranked(graph, request, lm, builder)


def find_destination(
    graph: AppGraph,
    command: str,
    lm: Optional[LmBackend] = None,
    builder: Optional[PromptBuilder] = None,
) -> Optional[int]:
    serving = graph.nodes_serving(command)
    if serving:
        return serving[0]
    if not graph.nodes or lm is None:
        return None
    return _ranked(graph, command, lm, builder)


def _normalize(command: str) -> str:
    return " ".join(command.casefold().split())


def _replace_all(text: str, mapping: Sequence[tuple[str, str]]) -> str:
    for old, new in mapping:
        text = re.sub(re.escape(old), lambda _m, new=new: new, text, flags=re.IGNORECASE)
    return text


def parameterize(
    path_actions: Sequence[Action],
    saved_command: str,
    new_command: str,
    lm: Optional[LmBackend],
    builder: Optional[PromptBuilder] = None,
    *,
    labels: Optional[Sequence[Optional[str]]] = None,
) -> list[Action]:
    """Adapt a saved action sequence to a related command.

    Only ENTER_TEXT payloads and OPEN arguments may change; a reply that
    alters anything else is treated as a refusal.
    """
    actions = list(path_actions)
    if _normalize(saved_command) == _normalize(new_command):
        return actions
    if not any(a.kind in SUBSTITUTABLE for a in actions):
        return actions
    if lm is None:
        raise SubstitutionRefused("no backend available to adapt the saved actions")
    builder = builder or PromptBuilder()
    labels = list(labels) if labels is not None else [None] * len(actions)
    listing = [
        f"{format_action(a)} {label}" if label and a.kind not in SUBSTITUTABLE else format_action(a)
        for a, label in zip(actions, labels)
    ]
    response = lm.complete(builder.substitution_prompt(saved_command, new_command, listing))
    try:
        reply = parse_substitution_response(response)
    except UnparseableResponse as exc:
        raise SubstitutionRefused(f"unreadable substitution reply: {exc}") from None
    if reply.status == "unchanged":
        return actions
    if reply.status == "refused":
        raise SubstitutionRefused(f"backend found no mapping from {saved_command!r} to {new_command!r}")
    if reply.status == "mapping":
        return [
            a.with_argument(_replace_all(a.argument, reply.mapping)) if a.kind in SUBSTITUTABLE else a
            for a in actions
        ]
    rewritten = list(reply.actions)
    if len(rewritten) != len(actions):
        raise SubstitutionRefused(f"rewrite has {len(rewritten)} actions, expected {len(actions)}")
    adapted = []
    for old, new in zip(actions, rewritten):
        if old.kind is not new.kind:
            raise SubstitutionRefused(f"rewrite changed {old.kind.value} into {new.kind.value}")
        if old.kind in SUBSTITUTABLE:
            adapted.append(new)
        elif old.argument != new.argument:
            raise SubstitutionRefused(f"rewrite changed a {old.kind.value} argument")
        else:
            adapted.append(old)
    return adapted
