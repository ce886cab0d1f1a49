"""Parsers for the ``THOUGHT: ...`` / ``RESULT: ...`` response grammar.

Parsers raise :class:`UnparseableResponse` (or a resolution error) and never
anything else, whatever the input string.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from uitasker.actions import DIRECTIONS, Action, ActionType
from uitasker.backend.base import LmResponse, UnparseableResponse
from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiElement

_RESULT_LINE = re.compile(r"^\s*RESULT\s*:\s?(.*)$", re.IGNORECASE)
_THOUGHT_LINE = re.compile(r"^\s*THOUGHT\s*:\s?(.*)$", re.IGNORECASE)
_KEYWORD = re.compile(
    r"^\s*(PRESS|TAP|CLICK|ENTER_TEXT|ENTER|TYPE|SCROLL|SWIPE|OPEN|BACK|DONE)\b(.*)$",
    re.IGNORECASE | re.DOTALL,
)
_ALIASES = {"TAP": "PRESS", "CLICK": "PRESS", "ENTER": "ENTER_TEXT", "TYPE": "ENTER_TEXT"}
_BOUNDS = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)")
_LEADING_ID = re.compile(r"^\s*(?:\[\s*(\d+)\s*\]|id\s*[=:]?\s*(\d+)\b|(\d+)(?=\s|$|[\"'(]))", re.IGNORECASE)
_NUMBERED = re.compile(r"^\s*\d+\s*[.)]\s*")
_MAPPING = re.compile(
    r"^\s*(?:REPLACE\s+)?(?P<old>\"[^\"]+\"|'[^']+'|[^\s=>-][^=>]*?)\s*(?:->|=>|\s+WITH\s+)\s*(?P<new>\"[^\"]+\"|'[^']+'|.+?)\s*$",
    re.IGNORECASE,
)


class UnknownElement(LookupError):
    pass


class ActionNotAllowed(ValueError):
    pass


def split_response(raw: str) -> LmResponse:
    """Separate the chain of thought from the result block."""
    lines = raw.splitlines()
    result_at = None
    for index in range(len(lines) - 1, -1, -1):
        if _RESULT_LINE.match(lines[index]):
            result_at = index
            break
    if result_at is None:
        return LmResponse(raw=raw, chain_of_thought=None, result_block=raw.strip())
    first = _RESULT_LINE.match(lines[result_at]).group(1)
    block = "\n".join([first, *lines[result_at + 1 :]]).strip()
    thought_lines = []
    capturing = False
    for line in lines[:result_at]:
        m = _THOUGHT_LINE.match(line)
        if m:
            capturing = True
            thought_lines.append(m.group(1))
        elif capturing:
            thought_lines.append(line)
    thought = "\n".join(thought_lines).strip() or None
    return LmResponse(raw=raw, chain_of_thought=thought, result_block=block)


def _quoted(text: str) -> tuple[Optional[str], str]:
    """Read a leading quoted string; returns (value, remainder)."""
    text = text.lstrip()
    if text.startswith('"'):
        try:
            value, end = json.JSONDecoder().raw_decode(text)
        except json.JSONDecodeError:
            close = text.find('"', 1)
            if close < 0:
                return None, text
            return text[1:close], text[close + 1 :]
        if isinstance(value, str):
            return value, text[end:]
        return None, text
    if text.startswith("'"):
        line_end = text.find("\n")
        line = text if line_end < 0 else text[:line_end]
        close = line.rfind("'")
        if close <= 0:
            return None, text
        return line[1:close], text[close + 1 :]
    return None, text


def parse_action_text(text: str) -> tuple[Action, str]:
    """Parse one action from the start of ``text``; returns (action, trailing text)."""
    m = _KEYWORD.match(text)
    if not m:
        raise UnparseableResponse(f"no action keyword in {text[:60]!r}")
    keyword = m.group(1).upper()
    keyword = _ALIASES.get(keyword, keyword)
    rest = m.group(2)
    kind = ActionType(keyword)
    if kind in (ActionType.ENTER_TEXT, ActionType.OPEN):
        rest = re.sub(r"^\s*[:=]", "", rest)
        value, remainder = _quoted(rest)
        if value is None:
            line = rest.strip().splitlines()[0] if rest.strip() else ""
            value, remainder = line.strip(), ""
        if not value:
            raise UnparseableResponse(f"{kind.value} without an argument")
        return Action(kind, value), remainder
    if kind in (ActionType.SCROLL, ActionType.SWIPE):
        d = re.match(r"^\s*[:=]?\s*(\w+)(.*)$", rest, re.DOTALL)
        if not d or d.group(1).lower() not in DIRECTIONS:
            raise UnparseableResponse(f"{kind.value} without a direction")
        return Action(kind, d.group(1).lower()), d.group(2)
    return Action(kind), rest


def parse_action_response(response: LmResponse) -> Action:
    block = response.result_block.strip()
    if not block:
        raise UnparseableResponse("empty result")
    first = block.splitlines()[0]
    action, rest = parse_action_text(first)
    if action.kind in (ActionType.PRESS, ActionType.BACK, ActionType.DONE):
        # Trailing words would mean the model strayed from the grammar, e.g.
        # "PRESS the button" is fine but "DONE? maybe" is not an answer.
        if action.kind is not ActionType.PRESS and re.search(r"\w", rest):
            raise UnparseableResponse(f"unexpected text after {action.kind.value}: {rest[:40]!r}")
    return action


@dataclass(frozen=True)
class TargetSelection:
    element_id: int
    label: str
    bounds: Bounds
    rationale: str = ""


def _label_matches(snapshot: ScreenSnapshot, label: str) -> list[UiElement]:
    wanted = label.strip().casefold()
    return [e for e in snapshot.root.iter_tree() if derive_label(e).strip().casefold() == wanted]


def parse_target_response(
    response: LmResponse, snapshot: ScreenSnapshot, action: Optional[Action] = None
) -> TargetSelection:
    block = response.result_block.strip()
    if not block:
        raise UnparseableResponse("empty result")
    line = block.splitlines()[0]
    id_match = _LEADING_ID.match(line)
    element_id = None
    rest = line
    if id_match:
        element_id = int(next(g for g in id_match.groups() if g is not None))
        rest = line[id_match.end() :]
    label, _ = _quoted(rest)
    bounds_match = _BOUNDS.search(line)
    if element_id is None and label is None:
        if bounds_match is None:
            raise UnparseableResponse(f"no element reference in {line[:60]!r}")
    capability = action.required_capability if action is not None else None

    def prefer(candidates: list[UiElement]) -> Optional[UiElement]:
        if capability is not None:
            capable = [e for e in candidates if e.allows(capability)]
            if capable:
                candidates = capable
        return candidates[0] if candidates else None

    element = snapshot.find(element_id) if element_id is not None else None
    if element is not None and label is not None:
        if derive_label(element).strip().casefold() != label.strip().casefold():
            by_label = prefer(_label_matches(snapshot, label))
            if by_label is not None:
                element = by_label
    if element is None and label is not None:
        element = prefer(_label_matches(snapshot, label))
    if element is None and element_id is None and label is None and bounds_match:
        b = Bounds(*(int(v) for v in bounds_match.groups()))
        element = prefer([e for e in snapshot.root.iter_tree() if e.bounds == b])
    if element is None:
        ref = f"id {element_id}" if element_id is not None else repr(label)
        raise UnknownElement(f"{ref} is not on the current screen")
    if capability is not None and not element.allows(capability):
        raise ActionNotAllowed(
            f"element {element.id} ({derive_label(element)!r}) does not allow {action.kind.value}"
        )
    return TargetSelection(element.id, derive_label(element), element.bounds, response.chain_of_thought or "")


def parse_rank_response(response: LmResponse) -> Optional[int]:
    block = response.result_block.strip()
    if not block:
        raise UnparseableResponse("empty result")
    first = block.splitlines()[0].strip().rstrip(".")
    if first.upper() in ("NONE", "NO MATCH", "NULL"):
        return None
    m = re.match(r"^\[?\s*(?:id\s*[=:]?\s*)?(\d+)\s*\]?", first, re.IGNORECASE)
    if not m:
        raise UnparseableResponse(f"expected a screen id or NONE, got {first[:40]!r}")
    return int(m.group(1))


def parse_description_response(response: LmResponse) -> str:
    summary = response.result_block.strip().split("\n\n")[0].strip()
    if not summary:
        raise UnparseableResponse("empty description")
    return " ".join(summary.split())


@dataclass(frozen=True)
class SubstitutionReply:
    status: str  # "unchanged" | "refused" | "rewritten" | "mapping"
    actions: tuple[Action, ...] = ()
    mapping: tuple[tuple[str, str], ...] = field(default=())


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_substitution_response(response: LmResponse) -> SubstitutionReply:
    block = response.result_block.strip()
    if not block:
        raise UnparseableResponse("empty result")
    head = block.splitlines()[0].strip().rstrip(".").upper()
    if head == "UNCHANGED":
        return SubstitutionReply("unchanged")
    if head in ("NONE", "REFUSED"):
        return SubstitutionReply("refused")
    lines = [l for l in block.splitlines() if l.strip()]
    actions = []
    try:
        for line in lines:
            action, _ = parse_action_text(_NUMBERED.sub("", line))
            actions.append(action)
        return SubstitutionReply("rewritten", tuple(actions))
    except UnparseableResponse:
        pass
    pairs = []
    for line in lines:
        m = _MAPPING.match(_NUMBERED.sub("", line))
        if not m:
            raise UnparseableResponse(f"unreadable substitution line {line[:60]!r}")
        old, new = _unquote(m.group("old")), _unquote(m.group("new"))
        if not old or not new:
            raise UnparseableResponse(f"empty side in substitution line {line[:60]!r}")
        pairs.append((old, new))
    return SubstitutionReply("mapping", mapping=tuple(pairs))
