"""Language-model backends (remote or scripted) and response parsers."""

from uitasker.backend.base import (
    BackendError,
    LmBackend,
    LmResponse,
    RateLimited,
    ScriptExhausted,
    ScriptMismatch,
    Timeout,
    TransportError,
    UnparseableResponse,
)
from uitasker.backend.remote import HttpBackend
from uitasker.backend.parsing import (
    ActionNotAllowed,
    SubstitutionReply,
    TargetSelection,
    UnknownElement,
    parse_action_response,
    parse_action_text,
    parse_description_response,
    parse_rank_response,
    parse_substitution_response,
    parse_target_response,
    split_response,
)
from uitasker.backend.scripted import ScriptedBackend, ScriptEntry, reply

__all__ = [
    "ActionNotAllowed",
    "BackendError",
    "HttpBackend",
    "LmBackend",
    "LmResponse",
    "RateLimited",
    "ScriptEntry",
    "ScriptExhausted",
    "ScriptMismatch",
    "ScriptedBackend",
    "SubstitutionReply",
    "TargetSelection",
    "Timeout",
    "TransportError",
    "UnknownElement",
    "UnparseableResponse",
    "parse_action_response",
    "parse_action_text",
    "parse_description_response",
    "parse_rank_response",
    "parse_substitution_response",
    "parse_target_response",
    "reply",
    "split_response",
]
