"""Rule-based PII detection and tag substitution for on-screen text.

Detectors (in priority order when spans overlap): e-mail addresses,
13-19 digit payment cards that pass the Luhn check, street addresses
(house number + street keyword), and phone numbers (7-15 digits with
optional separators).  Nothing is learned; every decision is a regex.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from uitasker.ui.snapshot import ScreenSnapshot, UiElement

PHONE_TAG = "<phone number>"
EMAIL_TAG = "<email>"
ADDRESS_TAG = "<address>"
CARD_TAG = "<payment card>"

_EMAIL = re.compile(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}")
_CARD = re.compile(r"(?<![\d-])\d(?:[ -]?\d){12,18}(?![\d])")
_STREET_WORDS = (
    "street|st|avenue|ave|road|rd|boulevard|blvd|lane|ln|drive|dr|court|ct|"
    "way|place|pl|terrace|parade|highway|hwy|crescent|cres|square|sq"
)
_ADDRESS = re.compile(
    r"\b\d{1,5}[A-Za-z]?(?:/\d{1,5})?\s+(?:[A-Za-z][A-Za-z'\-]*\s+){1,3}"
    rf"(?:{_STREET_WORDS})\b\.?",
    re.IGNORECASE,
)
_PHONE = re.compile(r"(?<![\w+])\+?\(?\d(?:[\d\s().\-]*\d)?(?!\w)")
_DATE_LIKE = re.compile(r"^\d{4}[-/.]\d{1,2}[-/.]\d{1,2}$|^\d{1,2}[-/.]\d{1,2}[-/.]\d{2,4}$")


def luhn_valid(digits: str) -> bool:
    total = 0
    for index, char in enumerate(reversed(digits)):
        value = int(char)
        if index % 2 == 1:
            value *= 2
            if value > 9:
                value -= 9
        total += value
    return total % 10 == 0


def _digits(text: str) -> str:
    return "".join(c for c in text if c.isdigit())


def _spans(text: str) -> list[tuple[int, int, str]]:
    found: list[tuple[int, int, int, str]] = []
    for m in _EMAIL.finditer(text):
        found.append((m.start(), m.end(), 0, EMAIL_TAG))
    for m in _CARD.finditer(text):
        digits = _digits(m.group())
        if 13 <= len(digits) <= 19 and luhn_valid(digits):
            found.append((m.start(), m.end(), 1, CARD_TAG))
    for m in _ADDRESS.finditer(text):
        found.append((m.start(), m.end(), 2, ADDRESS_TAG))
    for m in _PHONE.finditer(text):
        candidate = m.group().strip()
        end = m.start() + len(m.group().rstrip())
        if not 7 <= len(_digits(candidate)) <= 15 or _DATE_LIKE.match(candidate):
            continue
        found.append((m.start(), end, 3, PHONE_TAG))
    found.sort(key=lambda s: (s[0], s[2], -s[1]))
    chosen: list[tuple[int, int, str]] = []
    for start, end, priority, tag in found:
        if chosen and start < chosen[-1][1]:
            prev_start, prev_end, prev_tag = chosen[-1]
            prev_priority = {EMAIL_TAG: 0, CARD_TAG: 1, ADDRESS_TAG: 2, PHONE_TAG: 3}[prev_tag]
            if priority < prev_priority:
                chosen[-1] = (start, end, tag)
            continue
        chosen.append((start, end, tag))
    return chosen


@dataclass(frozen=True)
class Substitution:
    original: str
    tag: str
    element_id: int
    field: str = "text"
    # Offset of the tag inside the redacted string.
    position: int = 0


@dataclass(frozen=True)
class RedactionMap:
    substitutions: tuple[Substitution, ...] = ()

    def __len__(self) -> int:
        return len(self.substitutions)

    def for_element(self, element_id: int, field: str) -> list[Substitution]:
        return [s for s in self.substitutions if s.element_id == element_id and s.field == field]


def redact_text(text: str) -> tuple[str, list[tuple[str, str, int]]]:
    """Return the redacted text and ``(original, tag, position)`` triples."""
    out = []
    records = []
    cursor = 0
    length = 0
    for start, end, tag in _spans(text):
        out.append(text[cursor:start])
        length += start - cursor
        records.append((text[start:end], tag, length))
        out.append(tag)
        length += len(tag)
        cursor = end
    out.append(text[cursor:])
    return "".join(out), records


def restore_text(text: str, subs: Iterable[Substitution]) -> str:
    for sub in sorted(subs, key=lambda s: s.position, reverse=True):
        if text[sub.position : sub.position + len(sub.tag)] != sub.tag:
            raise ValueError(f"tag {sub.tag!r} not found at offset {sub.position}")
        text = text[: sub.position] + sub.original + text[sub.position + len(sub.tag) :]
    return text


def anonymize(snapshot: ScreenSnapshot) -> tuple[ScreenSnapshot, RedactionMap]:
    subs: list[Substitution] = []

    def visit(element: UiElement) -> UiElement:
        changes = {}
        for field_name in ("text", "content_desc"):
            value: Optional[str] = getattr(element, field_name)
            if not value:
                continue
            redacted, records = redact_text(value)
            if records:
                changes[field_name] = redacted
                subs.extend(
                    Substitution(original, tag, element.id, field_name, pos)
                    for original, tag, pos in records
                )
        children = tuple(visit(c) for c in element.children)
        if children != element.children:
            changes["children"] = children
        return replace(element, **changes) if changes else element

    root = visit(snapshot.root)
    return snapshot.with_root(root), RedactionMap(tuple(subs))


def deanonymize(snapshot: ScreenSnapshot, redactions: RedactionMap) -> ScreenSnapshot:
    """Invert :func:`anonymize`."""
    if not redactions.substitutions:
        return snapshot

    def visit(element: UiElement) -> UiElement:
        changes = {}
        for field_name in ("text", "content_desc"):
            subs = redactions.for_element(element.id, field_name)
            if subs:
                changes[field_name] = restore_text(getattr(element, field_name) or "", subs)
        children = tuple(visit(c) for c in element.children)
        if children != element.children:
            changes["children"] = children
        return replace(element, **changes) if changes else element

    return snapshot.with_root(visit(snapshot.root))
