from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Optional

from uitasker.prompting.builders import Prompt


class BackendError(Exception):
    retryable = False


class Timeout(BackendError):
    retryable = True


class TransportError(BackendError):
    pass


class RateLimited(BackendError):
    retryable = True


class ScriptExhausted(BackendError):
    pass


class ScriptMismatch(BackendError):
    """The scripted backend was asked a different kind of prompt than scripted."""


class UnparseableResponse(ValueError):
    pass


@dataclass(frozen=True)
class LmResponse:
    raw: str
    chain_of_thought: Optional[str]
    result_block: str


class LmBackend(abc.ABC):
    @abc.abstractmethod
    def complete(self, prompt: Prompt) -> LmResponse:
        """Return the model's answer to ``prompt``."""
