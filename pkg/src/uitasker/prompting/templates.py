"""Loading of the editable prompt template files.

Layout of a template file (one per prompt kind, see docs/prompt-templates.md)::

    === PREAMBLE ===
    free text
    === EXEMPLAR ===          (zero or more, in priority order)
    --- PROMPT ---
    --- THOUGHT ---
    --- RESPONSE ---
    === QUERY ===
    text with {{placeholders}}
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

PROMPT_KINDS = ("action", "target", "description", "rank", "substitution")

_SECTION = re.compile(r"^=== (PREAMBLE|EXEMPLAR|QUERY) ===\s*$", re.MULTILINE)
_PART = re.compile(r"^--- (PROMPT|THOUGHT|RESPONSE) ---\s*$", re.MULTILINE)
_PLACEHOLDER = re.compile(r"\{\{\s*([a-z_]+)\s*\}\}")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Exemplar:
    sample_prompt: str
    chain_of_thought: str
    sample_response: str

    def __post_init__(self) -> None:
        if not self.chain_of_thought.strip():
            raise TemplateError("exemplar chain of thought must be nonempty")


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    preamble: str
    exemplars: tuple[Exemplar, ...]
    query: str

    def fill(self, text: str, values: Mapping[str, str]) -> str:
        def sub(match: re.Match) -> str:
            name = match.group(1)
            if name not in values:
                raise TemplateError(f"{self.kind} template: no value for {{{{{name}}}}}")
            return values[name]

        return _PLACEHOLDER.sub(sub, text)


def parse_template(kind: str, text: str) -> PromptTemplate:
    pieces = _SECTION.split(text)
    if pieces[0].strip():
        raise TemplateError(f"{kind} template: text before the first section header")
    preamble: Optional[str] = None
    query: Optional[str] = None
    exemplars = []
    for name, body in zip(pieces[1::2], pieces[2::2]):
        body = body.strip("\n")
        if name == "PREAMBLE":
            preamble = body.strip()
        elif name == "QUERY":
            query = body.strip()
        else:
            parts = _PART.split(body)
            fields = dict(zip(parts[1::2], (p.strip() for p in parts[2::2])))
            if set(fields) != {"PROMPT", "THOUGHT", "RESPONSE"}:
                raise TemplateError(f"{kind} template: exemplar needs PROMPT, THOUGHT and RESPONSE")
            exemplars.append(Exemplar(fields["PROMPT"], fields["THOUGHT"], fields["RESPONSE"]))
    if preamble is None or query is None:
        raise TemplateError(f"{kind} template: PREAMBLE and QUERY sections are required")
    return PromptTemplate(kind, preamble, tuple(exemplars), query)


class TemplateSet:
    """All prompt templates, read once and never modified afterwards."""

    def __init__(self, templates: Mapping[str, PromptTemplate]):
        missing = set(PROMPT_KINDS) - set(templates)
        if missing:
            raise TemplateError(f"missing templates: {sorted(missing)}")
        self._templates = dict(templates)

    def __getitem__(self, kind: str) -> PromptTemplate:
        return self._templates[kind]

    @classmethod
    def load(cls, directory: Optional[Path] = None) -> "TemplateSet":
        templates = {}
        for kind in PROMPT_KINDS:
            if directory is None:
                text = resources.files("uitasker.prompting").joinpath(f"templates/{kind}.txt").read_text("utf-8")
            else:
                text = (Path(directory) / f"{kind}.txt").read_text("utf-8")
            templates[kind] = parse_template(kind, text)
        return cls(templates)


_DEFAULT: Optional[TemplateSet] = None


def default_templates() -> TemplateSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = TemplateSet.load()
    return _DEFAULT
