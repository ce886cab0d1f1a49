"""Deterministic scripted backend used by tests, fixtures and the offline CLI.

A script is an ordered list of ``(prompt kind, response text)`` entries.  In
``strict`` mode entries are consumed in order and a prompt of the wrong kind
is an error.  In ``by-kind`` mode each prompt kind has its own queue, which
lets a script answer ranking/substitution calls whose position depends on how
a run unfolds; ``defaults`` answer a kind whose queue is empty.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import yaml

from uitasker.backend.base import LmBackend, LmResponse, ScriptExhausted, ScriptMismatch
from uitasker.backend.parsing import split_response
from uitasker.prompting.builders import Prompt
from uitasker.prompting.templates import PROMPT_KINDS

MODES = ("strict", "by-kind")


@dataclass(frozen=True)
class ScriptEntry:
    kind: str
    response: str

    def __post_init__(self) -> None:
        if self.kind not in PROMPT_KINDS:
            raise ValueError(f"unknown prompt kind {self.kind!r}")


@dataclass(frozen=True)
class CallRecord:
    index: int
    kind: str
    prompt: str
    response: str


def reply(result: str, thought: str = "") -> str:
    """Format a response in the THOUGHT/RESULT grammar."""
    thought = thought or "Following the scripted scenario."
    return f"THOUGHT: {thought}\nRESULT: {result}"


class ScriptedBackend(LmBackend):
    def __init__(
        self,
        entries: Iterable[Union[ScriptEntry, tuple[str, str]]] = (),
        *,
        mode: str = "strict",
        defaults: Optional[Mapping[str, str]] = None,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.entries = tuple(e if isinstance(e, ScriptEntry) else ScriptEntry(*e) for e in entries)
        self.mode = mode
        self.defaults = dict(defaults or {})
        for kind in self.defaults:
            if kind not in PROMPT_KINDS:
                raise ValueError(f"unknown prompt kind {kind!r} in defaults")
        self._lock = threading.Lock()
        self.reset()

    def reset(self) -> None:
        with self._lock:
            self._position = 0
            self._queues = {kind: deque() for kind in PROMPT_KINDS}
            for entry in self.entries:
                self._queues[entry.kind].append(entry.response)
            self.calls: list[CallRecord] = []

    @property
    def remaining(self) -> int:
        if self.mode == "strict":
            return len(self.entries) - self._position
        return sum(len(q) for q in self._queues.values())

    def calls_of(self, kind: str) -> list[CallRecord]:
        return [c for c in self.calls if c.kind == kind]

    def complete(self, prompt: Prompt) -> LmResponse:
        with self._lock:
            index = len(self.calls)
            text = self._next(prompt.kind, index)
            self.calls.append(CallRecord(index, prompt.kind, prompt.render(), text))
        return split_response(text)

    def _next(self, kind: str, index: int) -> str:
        if self.mode == "strict":
            if self._position >= len(self.entries):
                if kind in self.defaults:
                    return self.defaults[kind]
                raise ScriptExhausted(f"call {index} ({kind}): script has no more entries")
            entry = self.entries[self._position]
            if entry.kind != kind:
                raise ScriptMismatch(
                    f"call {index}: script expects a {entry.kind!r} prompt, got {kind!r}"
                )
            self._position += 1
            return entry.response
        queue = self._queues[kind]
        if queue:
            return queue.popleft()
        if kind in self.defaults:
            return self.defaults[kind]
        raise ScriptExhausted(f"call {index}: no scripted {kind!r} response left")

    @classmethod
    def from_document(cls, doc) -> "ScriptedBackend":
        if isinstance(doc, list):
            doc = {"entries": doc}
        if not isinstance(doc, Mapping):
            raise ValueError("script must be a list of entries or a mapping with 'entries'")
        entries = []
        for raw in doc.get("entries") or []:
            if "response" in raw:
                text = str(raw["response"])
            else:
                text = reply(str(raw["result"]), str(raw.get("thought") or ""))
            entries.append(ScriptEntry(str(raw["kind"]), text))
        defaults = {}
        for kind, value in (doc.get("defaults") or {}).items():
            defaults[kind] = value if str(value).lstrip().upper().startswith(("THOUGHT", "RESULT")) else reply(str(value))
        return cls(entries, mode=doc.get("mode", "strict"), defaults=defaults)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedBackend":
        return cls.from_document(yaml.safe_load(Path(path).read_text("utf-8")))
