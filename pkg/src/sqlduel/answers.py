"""Answer normalization and comparison.

Rows that are entirely null are dropped, duplicates are removed, each row
becomes a set of values and the answer becomes a set of such row-sets, so
neither row order nor column order matters when answers are compared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .evaluator import AnswerTable
from .values import Scalar, value_key


@dataclass(frozen=True)
class NormalizedAnswer:
    row_sets: frozenset  # frozenset[frozenset[Scalar key]]
    original_arity: int

    def is_empty(self) -> bool:
        return not self.row_sets


def normalize_answer(table: AnswerTable) -> NormalizedAnswer:
    row_sets = set()
    for row in table.rows:
        if all(v is None for v in row):
            continue
        row_sets.add(frozenset(value_key(v) for v in row))
    return NormalizedAnswer(row_sets=frozenset(row_sets), original_arity=table.arity)


def answers_equal(a: NormalizedAnswer, b: NormalizedAnswer) -> bool:
    """Set equality of the row-sets; arity is ignored."""
    return a.row_sets == b.row_sets


def _sort_token(value: Scalar) -> tuple:
    if value is None:
        return (2, "")
    if isinstance(value, str):
        return (1, value)
    return (0, value)


def answer_to_lists(answer: NormalizedAnswer) -> list[list[Scalar]]:
    """Deterministic json-friendly rendering of a normalized answer."""
    rows = [sorted(row_set, key=_sort_token) for row_set in answer.row_sets]
    rows.sort(key=lambda row: json.dumps(row, default=str))
    return rows
