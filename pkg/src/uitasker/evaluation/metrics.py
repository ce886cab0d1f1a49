"""Scoring primitives."""

from __future__ import annotations

from typing import AbstractSet, Iterable


class EvalError(ValueError):
    pass


def micro_f1(pred: AbstractSet, gold: AbstractSet) -> float:
    """``2|pred & gold| / (|pred| + |gold|)``; two empty sets agree vacuously (1.0)."""
    pred, gold = set(pred), set(gold)
    if not pred and not gold:
        return 1.0
    return 2 * len(pred & gold) / (len(pred) + len(gold))


def mean(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise EvalError("mean of no values")
    return sum(values) / len(values)
